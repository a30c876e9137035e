//! VSS addition: splitting an edge (and its reverse) with a new VSS border
//! vertex, and the discrete variant that promotes an existing vertex.

use std::collections::BTreeSet;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::kinematics::{TrackInterval, TrackRange};
use crate::network::{Border, Edge, EdgeId, RailwayNetwork, Vertex, VertexId};
use crate::sections::{derive_sections, Level};
use crate::timetable::Station;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VssOperator {
    pub edge: EdgeId,
    pub rho: Ratio<i64>,
}

/// Maps every edge of a network to the edges replacing it after one or more
/// operator applications, in travel order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeRefinement {
    pub children: Vec<Vec<EdgeId>>,
}

impl EdgeRefinement {
    pub fn identity(edge_count: usize) -> Self {
        EdgeRefinement { children: (0..edge_count as u32).map(|i| vec![EdgeId(i)]).collect() }
    }

    pub fn refine_edge(&self, e: EdgeId) -> &[EdgeId] {
        &self.children[e.idx()]
    }

    pub fn refine_sequence(&self, seq: &[EdgeId]) -> Vec<EdgeId> {
        seq.iter().flat_map(|e| self.children[e.idx()].iter().copied()).collect()
    }

    pub fn refine_set(&self, set: &BTreeSet<EdgeId>) -> BTreeSet<EdgeId> {
        set.iter().flat_map(|e| self.children[e.idx()].iter().copied()).collect()
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &EdgeRefinement) -> EdgeRefinement {
        EdgeRefinement {
            children: self.children.iter().map(|c| next.refine_sequence(c)).collect(),
        }
    }

    /// Re-express a range of the old network on the refined network.
    pub fn refine_range(&self, rg: &TrackRange, new_net: &RailwayNetwork) -> TrackRange {
        let mut intervals = Vec::new();
        for iv in &rg.intervals {
            let kids = &self.children[iv.edge.idx()];
            if kids.len() == 1 {
                intervals.push(TrackInterval::new(kids[0], iv.from_mm, iv.to_mm));
                continue;
            }
            let mut start = 0;
            let mut pieces = Vec::new();
            for &k in kids {
                let end = start + new_net.length(k);
                let a = iv.from_mm.max(start);
                let b = iv.to_mm.min(end);
                if a < b {
                    pieces.push(TrackInterval::new(k, a - start, b - start));
                }
                start = end;
            }
            if pieces.is_empty() {
                // zero-length interval: place it on the child that holds the point
                let mut start = 0;
                for (i, &k) in kids.iter().enumerate() {
                    let end = start + new_net.length(k);
                    if iv.from_mm < end || i + 1 == kids.len() {
                        pieces.push(TrackInterval::new(k, iv.from_mm - start, iv.to_mm - start));
                        break;
                    }
                    start = end;
                }
            }
            intervals.extend(pieces);
        }
        TrackRange { s_in_mm: rg.s_in_mm, intervals, s_out_mm: rg.s_out_mm }
    }
}

#[derive(Debug, Clone)]
pub struct Applied {
    pub network: RailwayNetwork,
    pub stations: Vec<Station>,
    pub refinement: EdgeRefinement,
    pub new_vertices: Vec<VertexId>,
}

/// True when `e` lies in a TTD marked unbreakable.
pub fn is_unbreakable(net: &RailwayNetwork, e: EdgeId) -> bool {
    if net.unbreakable_marks().is_empty() {
        return false;
    }
    let ttd = derive_sections(net, Level::Ttd);
    let s = ttd.section_of(e);
    net.unbreakable_marks().iter().any(|&m| ttd.section_of(m) == s)
}

/// Split position in mm from the source of `op.edge`.
pub fn split_offset(net: &RailwayNetwork, op: &VssOperator) -> Result<i64> {
    if !net.has_edge(op.edge) {
        return Err(Error::UnknownEdge(format!("#{}", op.edge.0)));
    }
    let zero = Ratio::from_integer(0);
    let one = Ratio::from_integer(1);
    if op.rho <= zero || op.rho >= one {
        return Err(Error::InvalidOperator(format!("rho {} not in (0,1)", op.rho)));
    }
    let len = net.length(op.edge);
    let pos = op.rho * Ratio::from_integer(len);
    if !pos.is_integer() {
        return Err(Error::InvalidOperator(format!(
            "split of {} at rho {} is not a whole millimetre",
            net.edge(op.edge).name,
            op.rho
        )));
    }
    Ok(pos.to_integer())
}

fn unique_name(taken: impl Fn(&str) -> bool, base: String) -> String {
    if !taken(&base) {
        return base;
    }
    (2..)
        .map(|i| format!("{base}~{i}"))
        .find(|n| !taken(n))
        .expect("unbounded suffix search")
}

pub fn apply_vss_operator(net: &RailwayNetwork, stations: &[Station], op: &VssOperator) -> Result<Applied> {
    let offset = split_offset(net, op)?;
    if is_unbreakable(net, op.edge) {
        return Err(Error::InvalidOperator(format!(
            "edge {} lies in an unbreakable TTD",
            net.edge(op.edge).name
        )));
    }
    let star = op.edge;
    let e = net.edge(star).clone();
    let rev = e.reverse;
    let mut vertices = net.vertices.clone();
    let mut edges = net.edges.clone();
    let mut successors = net.successors.clone();

    let vname = unique_name(|n| net.vertex_id(n).is_ok(), format!("{}@{}", e.name, offset));
    let hint = match (net.vertex(e.source).hint, net.vertex(e.target).hint) {
        (Some((x1, y1)), Some((x2, y2))) => {
            let f = offset as f64 / e.length_mm as f64;
            Some((x1 + f * (x2 - x1), y1 + f * (y2 - y1)))
        }
        _ => None,
    };
    vertices.push(Vertex { name: vname, border: Border::Vss, headway_ms: None, hint });
    successors.push(Default::default());
    let vnew = VertexId(vertices.len() as u32 - 1);

    let edge_taken = |n: &str| net.edge_id(n).is_ok();
    // e★ keeps its id as the first child, the second child is appended
    let second = EdgeId(edges.len() as u32);
    edges[star.idx()] = Edge {
        name: unique_name(edge_taken, format!("{}.1", e.name)),
        source: e.source,
        target: vnew,
        length_mm: offset,
        reverse: None,
    };
    edges.push(Edge {
        name: unique_name(edge_taken, format!("{}.2", e.name)),
        source: vnew,
        target: e.target,
        length_mm: e.length_mm - offset,
        reverse: rev,
    });
    let mut children = EdgeRefinement::identity(net.edge_count());
    children.children[star.idx()] = vec![star, second];

    // at the old target, e★ arrives as its second child now
    if let Some(outs) = successors[e.target.idx()].remove(&star) {
        successors[e.target.idx()].insert(second, outs);
    }
    successors[vnew.idx()].insert(star, [second].into_iter().collect());

    let mut rev_second = None;
    if let Some(r) = rev {
        let re = net.edge(r).clone();
        let rs = EdgeId(edges.len() as u32);
        rev_second = Some(rs);
        edges[r.idx()] = Edge {
            name: unique_name(edge_taken, format!("{}.1", re.name)),
            source: re.source,
            target: vnew,
            length_mm: re.length_mm - offset,
            reverse: Some(second),
        };
        edges.push(Edge {
            name: unique_name(edge_taken, format!("{}.2", re.name)),
            source: vnew,
            target: re.target,
            length_mm: offset,
            reverse: Some(star),
        });
        edges[star.idx()].reverse = Some(rs);
        edges[second.idx()].reverse = Some(r);
        if let Some(outs) = successors[re.target.idx()].remove(&r) {
            successors[re.target.idx()].insert(rs, outs);
        }
        successors[vnew.idx()].insert(r, [rs].into_iter().collect());
        children.children[r.idx()] = vec![r, rs];
    }

    let stations = stations
        .iter()
        .map(|s| {
            let mut edges = s.edges.clone();
            if edges.contains(&star) {
                edges.insert(second);
            }
            if let (Some(r), Some(rs)) = (rev, rev_second) {
                if edges.contains(&r) {
                    edges.insert(rs);
                }
            }
            Station { name: s.name.clone(), edges }
        })
        .collect();

    let network = RailwayNetwork::from_parts(vertices, edges, successors, net.unbreakable.clone());
    Ok(Applied { network, stations, refinement: children, new_vertices: vec![vnew] })
}

/// Applies operators one after another, each referring to the network
/// produced by its predecessors.
pub fn apply_operators(net: &RailwayNetwork, stations: &[Station], ops: &[VssOperator]) -> Result<Applied> {
    let mut cur = Applied {
        network: net.clone(),
        stations: stations.to_vec(),
        refinement: EdgeRefinement::identity(net.edge_count()),
        new_vertices: Vec::new(),
    };
    for op in ops {
        let next = apply_vss_operator(&cur.network, &cur.stations, op)?;
        cur.refinement = cur.refinement.then(&next.refinement);
        cur.network = next.network;
        cur.stations = next.stations;
        cur.new_vertices.extend(next.new_vertices);
    }
    Ok(cur)
}

/// A cut position on an edge of the original network, in mm from its source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cut {
    pub edge: EdgeId,
    pub offset_mm: i64,
}

/// Orients a cut onto the lower-numbered edge of a reverse pair.
pub fn normalize_cut(net: &RailwayNetwork, cut: Cut) -> Cut {
    match net.reverse(cut.edge) {
        Some(r) if r < cut.edge => Cut { edge: r, offset_mm: net.length(r) - cut.offset_mm },
        _ => cut,
    }
}

/// Converts cuts given on original edges into a sequence of operators on the
/// evolving network and applies them.
pub fn apply_cuts(net: &RailwayNetwork, stations: &[Station], cuts: &[Cut]) -> Result<(Applied, Vec<VssOperator>)> {
    let mut sorted: Vec<Cut> = cuts.iter().map(|&c| normalize_cut(net, c)).collect();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidOperator("duplicate cut position".into()));
    }
    let mut ops = Vec::with_capacity(sorted.len());
    let mut cur = Applied {
        network: net.clone(),
        stations: stations.to_vec(),
        refinement: EdgeRefinement::identity(net.edge_count()),
        new_vertices: Vec::new(),
    };
    let mut i = 0;
    while i < sorted.len() {
        let edge = sorted[i].edge;
        if !net.has_edge(edge) {
            return Err(Error::UnknownEdge(format!("#{}", edge.0)));
        }
        let mut current = edge;
        let mut consumed = 0;
        while i < sorted.len() && sorted[i].edge == edge {
            let o = sorted[i].offset_mm;
            let len = cur.network.length(current);
            if o <= consumed || o - consumed >= len {
                return Err(Error::InvalidOperator(format!(
                    "cut at {o} mm outside edge {}",
                    net.edge(edge).name
                )));
            }
            let op = VssOperator { edge: current, rho: Ratio::new(o - consumed, len) };
            let next = apply_vss_operator(&cur.network, &cur.stations, &op)?;
            current = next.refinement.children[current.idx()][1];
            cur.refinement = cur.refinement.then(&next.refinement);
            cur.network = next.network;
            cur.stations = next.stations;
            cur.new_vertices.extend(next.new_vertices);
            ops.push(op);
            consumed = o;
            i += 1;
        }
    }
    Ok((cur, ops))
}

/// Promotes an interior vertex of degree at most two to a VSS border.
pub fn add_discrete_vss_border(net: &RailwayNetwork, v: VertexId) -> Result<RailwayNetwork> {
    if v.idx() >= net.vertex_count() {
        return Err(Error::UnknownVertex(format!("#{}", v.0)));
    }
    let vx = net.vertex(v);
    if vx.border != Border::None {
        return Err(Error::InvalidBorder(format!("{} is already a border", vx.name)));
    }
    if net.neighbors(v).len() > 2 {
        return Err(Error::InvalidBorder(format!("{} is a junction", vx.name)));
    }
    let incident = net.in_edges(v).iter().chain(net.out_edges(v)).copied();
    for e in incident {
        if is_unbreakable(net, e) {
            return Err(Error::InvalidBorder(format!("{} lies in an unbreakable TTD", vx.name)));
        }
    }
    let mut vertices = net.vertices.clone();
    vertices[v.idx()].border = Border::Vss;
    Ok(RailwayNetwork::from_parts(
        vertices,
        net.edges.clone(),
        net.successors.clone(),
        net.unbreakable.clone(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkBuilder;
    use crate::sections::derive_sections;

    fn single_track(len: i64) -> RailwayNetwork {
        let mut b = NetworkBuilder::new();
        let a = b.boundary("a", 0);
        let m = b.vertex("m", Border::None);
        let c = b.vertex("c", Border::None);
        let d = b.boundary("d", 0);
        b.track("x", "xr", a, m, 50_000);
        b.track("e1", "e1r", m, c, len);
        b.track("y", "yr", c, d, 50_000);
        b.allow_straight_through();
        b.build()
    }

    #[test]
    fn split_lengths_and_sections() {
        let net = single_track(200_000);
        let e1 = net.edge_id("e1").unwrap();
        let stations = vec![Station { name: "S".into(), edges: [e1].into_iter().collect() }];
        let out = apply_vss_operator(&net, &stations, &VssOperator { edge: e1, rho: Ratio::new(3, 5) })
            .unwrap();
        let n = &out.network;
        assert!(n.validate().is_ok(), "{}", n.validate());
        let kids = out.refinement.refine_edge(e1);
        assert_eq!(kids.len(), 2);
        assert_eq!(n.length(kids[0]), 120_000);
        assert_eq!(n.length(kids[1]), 80_000);
        assert_eq!(n.total_length_mm(), net.total_length_mm());
        assert_eq!(derive_sections(n, Level::Vss).len(), derive_sections(&net, Level::Vss).len() + 1);
        assert_eq!(derive_sections(n, Level::Ttd).len(), derive_sections(&net, Level::Ttd).len());
        assert_eq!(out.stations[0].edges.len(), 2);
        let route: Vec<EdgeId> = ["x", "e1", "y"].iter().map(|s| net.edge_id(s).unwrap()).collect();
        assert!(n.is_valid_track_sequence(&out.refinement.refine_sequence(&route)).unwrap());
        let back: Vec<EdgeId> = ["yr", "e1r", "xr"].iter().map(|s| net.edge_id(s).unwrap()).collect();
        assert!(n.is_valid_track_sequence(&out.refinement.refine_sequence(&back)).unwrap());
    }

    #[test]
    fn non_integral_split_rejected() {
        let net = single_track(1001);
        let e1 = net.edge_id("e1").unwrap();
        let err = apply_vss_operator(&net, &[], &VssOperator { edge: e1, rho: Ratio::new(1, 2) });
        assert!(matches!(err, Err(Error::InvalidOperator(_))));
        let err = apply_vss_operator(&net, &[], &VssOperator { edge: e1, rho: Ratio::new(1, 1) });
        assert!(err.is_err());
    }

    #[test]
    fn unbreakable_ttd_rejects_split() {
        let mut b = NetworkBuilder::new();
        let a = b.vertex("a", Border::Ttd);
        let m = b.vertex("m", Border::None);
        let c = b.vertex("c", Border::Ttd);
        let (x, _) = b.track("x", "xr", a, m, 10);
        let (y, _) = b.track("y", "yr", m, c, 10);
        b.mark_unbreakable(x);
        let net = b.build();
        let err = apply_vss_operator(&net, &[], &VssOperator { edge: y, rho: Ratio::new(1, 2) });
        assert!(err.is_err());
        assert!(add_discrete_vss_border(&net, m).is_err());
    }

    #[test]
    fn range_refinement_covers_both_children() {
        let net = single_track(200_000);
        let e1 = net.edge_id("e1").unwrap();
        let out = apply_vss_operator(&net, &[], &VssOperator { edge: e1, rho: Ratio::new(1, 2) }).unwrap();
        let rg = TrackRange { s_in_mm: 0, intervals: vec![TrackInterval::new(e1, 90_000, 110_000)], s_out_mm: 0 };
        let r2 = out.refinement.refine_range(&rg, &out.network);
        let kids = out.refinement.refine_edge(e1);
        assert_eq!(
            r2.intervals,
            vec![TrackInterval::new(kids[0], 90_000, 100_000), TrackInterval::new(kids[1], 0, 10_000)]
        );
        let rg = TrackRange { s_in_mm: 0, intervals: vec![TrackInterval::new(e1, 0, 100_000)], s_out_mm: 0 };
        assert_eq!(out.refinement.refine_range(&rg, &out.network).intervals.len(), 1);
    }

    #[test]
    fn split_inside_a_loop_does_not_add_a_section() {
        // ring a-b-c-a without any border
        let mut b = NetworkBuilder::new();
        let a = b.vertex("a", Border::None);
        let v = b.vertex("b", Border::None);
        let c = b.vertex("c", Border::None);
        let (x, _) = b.track("x", "xr", a, v, 10);
        b.track("y", "yr", v, c, 10);
        b.track("z", "zr", c, a, 10);
        b.allow_straight_through();
        let net = b.build();
        let before = derive_sections(&net, Level::Vss).len();
        let out = apply_vss_operator(&net, &[], &VssOperator { edge: x, rho: Ratio::new(1, 2) }).unwrap();
        assert_eq!(derive_sections(&out.network, Level::Vss).len(), before);
    }

    #[test]
    fn sequential_cuts_on_one_edge() {
        let net = single_track(10_000);
        let e1 = net.edge_id("e1").unwrap();
        let e1r = net.edge_id("e1r").unwrap();
        let cuts = [Cut { edge: e1, offset_mm: 7000 }, Cut { edge: e1r, offset_mm: 8000 }];
        let (out, ops) = apply_cuts(&net, &[], &cuts).unwrap();
        assert_eq!(ops.len(), 2);
        let kids = out.refinement.refine_edge(e1);
        let lens: Vec<i64> = kids.iter().map(|&k| out.network.length(k)).collect();
        assert_eq!(lens, vec![2000, 5000, 3000]);
        let rkids = out.refinement.refine_edge(e1r);
        let rlens: Vec<i64> = rkids.iter().map(|&k| out.network.length(k)).collect();
        assert_eq!(rlens, vec![3000, 5000, 2000]);
        assert!(out.network.validate().is_ok());
        // replaying the operators gives the same network
        let replay = apply_operators(&net, &[], &ops).unwrap();
        assert_eq!(replay.network, out.network);
    }

    #[test]
    fn discrete_border() {
        let net = single_track(10_000);
        let m = net.vertex_id("m").unwrap();
        let n2 = add_discrete_vss_border(&net, m).unwrap();
        assert_eq!(n2.border(m), Border::Vss);
        assert_eq!(derive_sections(&n2, Level::Vss).len(), 2);
        assert!(add_discrete_vss_border(&n2, m).is_err());
        let a = net.vertex_id("a").unwrap();
        assert!(add_discrete_vss_border(&net, a).is_err());
    }

    #[test]
    fn turnout_center_is_not_promotable() {
        let mut b = NetworkBuilder::new();
        let c = b.vertex("c", Border::None);
        for i in 0..3 {
            let o = b.vertex(&format!("o{i}"), Border::Ttd);
            b.track(&format!("t{i}"), &format!("t{i}r"), c, o, 10);
        }
        let net = b.build();
        assert!(add_discrete_vss_border(&net, c).is_err());
    }
}
