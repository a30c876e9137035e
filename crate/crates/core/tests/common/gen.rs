//! Seeded generators and independent oracles shared by the property tests
//! and the acceptance suite.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use htd_core::kinematics::{RouteTimeline, Sample, Train, TrackInterval, TrackRange, TrainState};
use htd_core::network::{Border, EdgeId, NetworkBuilder, RailwayNetwork, VertexId};
use htd_core::reduction::MonotoneCnf;
use htd_core::solver::{ProblemInstance, SolverConfig};
use htd_core::timetable::{Station, Stop, TimeWindow, TimetableRequest};

fn border<R: Rng>(rng: &mut R) -> Border {
    [Border::None, Border::Vss, Border::Ttd][rng.gen_range(0..3)]
}

/// Arbitrary small graph: mostly bidirectional tracks, some one-way edges,
/// random borders and successors.
pub fn random_network<R: Rng>(rng: &mut R) -> RailwayNetwork {
    let n = rng.gen_range(2..=8);
    let mut b = NetworkBuilder::new();
    let vs: Vec<VertexId> = (0..n).map(|i| b.vertex(&format!("v{i}"), border(rng))).collect();
    let m = rng.gen_range(1..=12);
    for i in 0..m {
        let s = *vs.choose(rng).unwrap();
        let mut t = *vs.choose(rng).unwrap();
        while t == s {
            t = *vs.choose(rng).unwrap();
        }
        let len = rng.gen_range(1..=50) * 1000;
        if rng.gen_bool(0.7) {
            b.track(&format!("e{i}"), &format!("e{i}r"), s, t, len);
        } else {
            b.edge(&format!("e{i}"), s, t, len);
        }
    }
    b.allow_straight_through();
    b.build()
}

/// Random tree of bidirectional tracks; leaves are entry/exit vertices.
pub fn random_tree<R: Rng>(rng: &mut R) -> RailwayNetwork {
    let n = rng.gen_range(2..=9);
    let parents: Vec<usize> = (1..n).map(|i| rng.gen_range(0..i)).collect();
    let mut degree = vec![0usize; n];
    for (i, &p) in parents.iter().enumerate() {
        degree[i + 1] += 1;
        degree[p] += 1;
    }
    let mut b = NetworkBuilder::new();
    let vs: Vec<VertexId> = (0..n)
        .map(|i| {
            if degree[i] == 1 {
                b.boundary(&format!("v{i}"), 0)
            } else {
                b.vertex(&format!("v{i}"), border(rng))
            }
        })
        .collect();
    for (i, &p) in parents.iter().enumerate() {
        let len = rng.gen_range(2..=40) * 1000;
        b.track(&format!("e{}", i + 1), &format!("e{}r", i + 1), vs[p], vs[i + 1], len);
    }
    b.allow_straight_through();
    b.build()
}

/// Edge partition oracle: reverse pairs together, and all edges at a vertex
/// whose border is below `level` together.
pub fn oracle_sections(net: &RailwayNetwork, level: u8) -> Vec<BTreeSet<EdgeId>> {
    let m = net.edge_count();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    let union = |p: &mut Vec<usize>, a: usize, b: usize| {
        let (ra, rb) = (find(p, a), find(p, b));
        if ra != rb {
            p[ra.max(rb)] = ra.min(rb);
        }
    };
    for (e, edge) in net.edges() {
        if let Some(r) = edge.reverse {
            union(&mut parent, e.idx(), r.idx());
        }
    }
    for (v, vert) in net.vertices() {
        if vert.border.level() < level {
            let inc: Vec<EdgeId> = net.in_edges(v).iter().chain(net.out_edges(v)).copied().collect();
            for w in inc.windows(2) {
                union(&mut parent, w[0].idx(), w[1].idx());
            }
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<EdgeId>> = BTreeMap::new();
    for e in 0..m {
        let r = find(&mut parent, e);
        groups.entry(r).or_default().insert(EdgeId(e as u32));
    }
    let mut out: Vec<BTreeSet<EdgeId>> = groups.into_values().collect();
    out.sort_by_key(|s| *s.iter().next().unwrap());
    out
}

/// Random walk following the successor relation.
pub fn random_walk<R: Rng>(net: &RailwayNetwork, rng: &mut R) -> Vec<EdgeId> {
    let edges: Vec<EdgeId> = net.edge_ids().collect();
    let mut walk = vec![*edges.choose(rng).unwrap()];
    for _ in 0..rng.gen_range(0..8) {
        let succ: Vec<EdgeId> = net.successors(*walk.last().unwrap()).unwrap().iter().copied().collect();
        match succ.choose(rng) {
            Some(&e) => walk.push(e),
            None => break,
        }
    }
    walk
}

fn sec(s: i64) -> i64 {
    s * 1000
}

/// Single line vl - ... - vr with two or three tracks, one station track,
/// one to three trains of equal length running left to right, some of them
/// optional.
pub fn random_instance<R: Rng>(rng: &mut R) -> ProblemInstance {
    let n_edges = rng.gen_range(2..=3);
    let mut b = NetworkBuilder::new();
    let vl = b.boundary("vl", sec(rng.gen_range(0..=5)));
    let mut vs = vec![vl];
    for i in 1..n_edges {
        let border = if rng.gen_bool(0.6) { Border::Ttd } else { Border::None };
        vs.push(b.vertex(&format!("v{i}"), border));
    }
    let vr = b.boundary("vr", sec(rng.gen_range(0..=5)));
    vs.push(vr);
    let mut tracks = Vec::new();
    for i in 0..n_edges {
        let len = rng.gen_range(8..=20) * 1000;
        tracks.push(b.track(&format!("e{}", i + 1), &format!("e{}r", i + 1), vs[i], vs[i + 1], len));
    }
    b.allow_straight_through();
    let network = b.build();
    let st = tracks[rng.gen_range(0..n_edges)];
    let station = Station { name: "S".into(), edges: [st.0, st.1].into_iter().collect() };
    let n_trains = rng.gen_range(1..=3);
    let length_mm = rng.gen_range(2..=5) * 1000;
    let mut trains = Vec::new();
    let mut requests = Vec::new();
    for i in 0..n_trains {
        trains.push(Train {
            name: format!("t{i}"),
            length_mm,
            v_max_mm_s: 2000,
            accel_mm_s2: 1000,
            decel_mm_s2: 1000,
            tim: rng.gen_bool(0.8),
        });
        let t0 = rng.gen_range(0..=30);
        let stops = if rng.gen_bool(0.5) {
            vec![Stop {
                station: 0,
                arrival: TimeWindow::new(sec(t0), sec(t0 + 40)),
                departure: TimeWindow::new(sec(t0), sec(t0 + 60)),
                min_dwell_ms: sec(rng.gen_range(0..=15)),
            }]
        } else {
            vec![]
        };
        requests.push(TimetableRequest {
            train: i,
            entry: vl,
            entry_window: TimeWindow::new(sec(t0), sec(t0 + rng.gen_range(0..=10))),
            exit: vr,
            exit_window: TimeWindow::new(sec(t0), sec(t0 + 60)),
            stops,
            route: None,
            weight: rng.gen_range(1..=2),
            optional: i > 0 && rng.gen_bool(0.3),
        });
    }
    ProblemInstance {
        network,
        stations: vec![station],
        trains,
        requests,
        k_max: Some(2),
        config: SolverConfig::default(),
    }
}

/// Range with front at `front` mm along `route` and length `len`, including
/// overhang before the start and beyond the end.
pub fn range_on(net: &RailwayNetwork, route: &[EdgeId], front: i64, len: i64) -> TrackRange {
    let total: i64 = route.iter().map(|&e| net.length(e)).sum();
    let rear = front - len;
    let (a, z) = (rear.max(0).min(total), front.max(0).min(total));
    let mut intervals = Vec::new();
    let mut start = 0;
    for &e in route {
        let l = net.length(e);
        let (lo, hi) = (a.max(start), z.min(start + l));
        let point = a == z && a >= start && a <= start + l;
        if lo < hi || (point && intervals.is_empty()) {
            intervals.push(TrackInterval::new(e, lo - start, hi.max(lo) - start));
        }
        start += l;
    }
    TrackRange { s_in_mm: (-rear).max(0).min(len), intervals, s_out_mm: (front - total).max(0).min(len) }
}

/// Trains crossing a line network at constant speed with random start
/// times, sampled every second. Ranges may overlap.
pub fn random_scenario<R: Rng>(
    rng: &mut R,
    all_tim: bool,
    vss_borders: bool,
) -> (RailwayNetwork, Vec<Train>, Vec<RouteTimeline>) {
    let n_edges = rng.gen_range(2..=6);
    let mut b = NetworkBuilder::new();
    let mut vs = vec![b.boundary("a", 0)];
    for i in 1..n_edges {
        let border = match rng.gen_range(0..3) {
            0 => Border::None,
            1 if vss_borders => Border::Vss,
            _ => Border::Ttd,
        };
        vs.push(b.vertex(&format!("p{i}"), border));
    }
    vs.push(b.boundary("z", 0));
    let route: Vec<EdgeId> = (0..n_edges)
        .map(|i| b.edge(&format!("e{i}"), vs[i], vs[i + 1], rng.gen_range(5..=30) * 1000))
        .collect();
    for w in route.windows(2) {
        b.allow(w[0], &[w[1]]);
    }
    let net = b.build();
    let total: i64 = route.iter().map(|&e| net.length(e)).sum();
    let n_trains = rng.gen_range(1..=4);
    let mut trains = Vec::new();
    let mut timelines = Vec::new();
    for i in 0..n_trains {
        let len = rng.gen_range(2..=10) * 1000;
        let v = rng.gen_range(1..=10) * 1000;
        trains.push(Train {
            name: format!("t{i}"),
            length_mm: len,
            v_max_mm_s: v,
            accel_mm_s2: 1000,
            decel_mm_s2: 1000,
            tim: all_tim || rng.gen_bool(0.5),
        });
        let t0 = rng.gen_range(0..=20);
        let mut samples = Vec::new();
        let mut front = 0;
        let mut t = t0;
        loop {
            samples.push(Sample {
                t_ms: t * 1000,
                state: TrainState { range: range_on(&net, &route, front, len), v_mm_s: v },
            });
            if front - len >= total {
                break;
            }
            front += v;
            t += 1;
        }
        timelines.push(RouteTimeline { train: i, samples });
    }
    (net, trains, timelines)
}

/// Per-TTD exclusivity computed from the oracle partition: at no sample
/// instant do two trains list edges of the same TTD.
pub fn classical_ttd_ok(net: &RailwayNetwork, timelines: &[RouteTimeline]) -> bool {
    let ttd = oracle_sections(net, 2);
    let section_of: BTreeMap<EdgeId, usize> =
        ttd.iter().enumerate().flat_map(|(i, s)| s.iter().map(move |&e| (e, i))).collect();
    let mut by_t: BTreeMap<i64, Vec<BTreeSet<usize>>> = BTreeMap::new();
    for tl in timelines {
        for s in &tl.samples {
            by_t.entry(s.t_ms).or_default().push(s.state.range.edges().map(|e| section_of[&e]).collect());
        }
    }
    by_t.values().all(|occ| {
        (0..occ.len()).all(|i| (i + 1..occ.len()).all(|j| occ[i].is_disjoint(&occ[j])))
    })
}

/// Valid Monotone 3-SAT-(<=2,<=2) formula with `n` variables, or `None`
/// when the random draw runs out of literal slots.
pub fn random_monotone_cnf<R: Rng>(rng: &mut R, n: usize, m: usize) -> Option<MonotoneCnf> {
    let mut left = [vec![2usize; n + 1], vec![2usize; n + 1]];
    let mut clauses = Vec::new();
    for _ in 0..m {
        let pos = rng.gen_bool(0.5);
        let slot = usize::from(!pos);
        let avail: Vec<usize> = (1..=n).filter(|&v| left[slot][v] > 0).collect();
        if avail.len() < 3 {
            return None;
        }
        let vars: Vec<usize> = avail.choose_multiple(rng, 3).copied().collect();
        let mut c = [0i32; 3];
        for (k, &v) in vars.iter().enumerate() {
            left[slot][v] -= 1;
            c[k] = if pos { v as i32 } else { -(v as i32) };
        }
        clauses.push(c);
    }
    Some(MonotoneCnf { num_vars: n, clauses })
}

/// Uniform-polarity clauses over 1..=n, variables may repeat.
pub fn random_structural_cnf<R: Rng>(rng: &mut R, n: usize, m: usize) -> MonotoneCnf {
    let clauses = (0..m)
        .map(|_| {
            let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
            [0; 3].map(|_| sign * rng.gen_range(1..=n as i32))
        })
        .collect();
    MonotoneCnf { num_vars: n, clauses }
}

/// Instances small enough for the joint-state oracle: a line of two or
/// three tracks of 2 to 4 m, one to three 1 m trains at 1 m/s in either
/// direction, short windows, optional stop.
pub fn tiny_instance<R: Rng>(rng: &mut R) -> ProblemInstance {
    let n_edges = rng.gen_range(2..=3);
    let mut b = NetworkBuilder::new();
    let vl = b.boundary("vl", sec(rng.gen_range(0..=2)));
    let mut vs = vec![vl];
    for i in 1..n_edges {
        vs.push(b.vertex(&format!("v{i}"), border(rng)));
    }
    let vr = b.boundary("vr", sec(rng.gen_range(0..=2)));
    vs.push(vr);
    let mut tracks = Vec::new();
    for i in 0..n_edges {
        let len = rng.gen_range(2..=4) * 1000;
        tracks.push(b.track(&format!("e{}", i + 1), &format!("e{}r", i + 1), vs[i], vs[i + 1], len));
    }
    b.allow_straight_through();
    let network = b.build();
    let st = tracks[rng.gen_range(0..n_edges)];
    let station = Station { name: "S".into(), edges: [st.0, st.1].into_iter().collect() };
    let n_trains = rng.gen_range(1..=3);
    let mut trains = Vec::new();
    let mut requests = Vec::new();
    for i in 0..n_trains {
        trains.push(Train {
            name: format!("t{i}"),
            length_mm: 1000,
            v_max_mm_s: 1000,
            accel_mm_s2: 1000,
            decel_mm_s2: 1000,
            tim: rng.gen_bool(0.6),
        });
        let (entry, exit) = if rng.gen_bool(0.7) { (vl, vr) } else { (vr, vl) };
        let t0 = rng.gen_range(0..=8);
        let stops = if rng.gen_bool(0.4) {
            vec![Stop {
                station: 0,
                arrival: TimeWindow::new(sec(t0), sec(t0 + 12)),
                departure: TimeWindow::new(sec(t0), sec(t0 + 16)),
                min_dwell_ms: sec(rng.gen_range(0..=3)),
            }]
        } else {
            vec![]
        };
        requests.push(TimetableRequest {
            train: i,
            entry,
            entry_window: TimeWindow::new(sec(t0), sec(t0 + rng.gen_range(0..=3))),
            exit,
            exit_window: TimeWindow::new(sec(t0), sec(t0 + rng.gen_range(6..=20))),
            stops,
            route: None,
            weight: 1,
            optional: false,
        });
    }
    ProblemInstance {
        network,
        stations: vec![station],
        trains,
        requests,
        k_max: Some(1),
        config: SolverConfig::default(),
    }
}
