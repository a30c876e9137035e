//! DOT and SVG drawings of a network. TTD borders are filled nodes, VSS
//! borders hatched (dashed outline, grey fill), entry/exit vertices double
//! circles. Station edges are blue and occupied edges red. A reverse pair
//! is drawn once, as an undirected line; one-way edges get an arrow.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write;

use crate::kinematics::RouteTimeline;
use crate::network::{Border, EdgeId, RailwayNetwork, VertexId};
use crate::timetable::Station;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenderSpec {
    /// Positions overriding the vertex hints.
    pub positions: BTreeMap<VertexId, (f64, f64)>,
    pub stations: BTreeSet<EdgeId>,
    pub occupied: BTreeSet<EdgeId>,
    /// Shown as graph label.
    pub title: Option<String>,
}

impl RenderSpec {
    pub fn with_stations(mut self, stations: &[Station]) -> Self {
        self.stations.extend(stations.iter().flat_map(|s| s.edges.iter().copied()));
        self
    }

    /// Marks every edge listed in a sample at `t_ms`.
    pub fn with_occupancy(mut self, timelines: &[RouteTimeline], t_ms: i64) -> Self {
        for tl in timelines {
            if let Some(s) = tl.at(t_ms) {
                self.occupied.extend(s.range.edges());
            }
        }
        self
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Edges to draw: one per reverse pair (the lower id), plus one-way edges.
fn drawn_edges(net: &RailwayNetwork) -> Vec<(EdgeId, bool)> {
    net.edge_ids()
        .filter(|&e| net.reverse(e).is_none_or(|r| e < r))
        .map(|e| (e, net.reverse(e).is_some()))
        .collect()
}

fn marked(set: &BTreeSet<EdgeId>, net: &RailwayNetwork, e: EdgeId) -> bool {
    set.contains(&e) || net.reverse(e).is_some_and(|r| set.contains(&r))
}

fn position(net: &RailwayNetwork, spec: &RenderSpec, v: VertexId) -> Option<(f64, f64)> {
    spec.positions.get(&v).copied().or(net.vertex(v).hint)
}

pub fn render_dot(net: &RailwayNetwork, spec: &RenderSpec) -> String {
    let mut out = String::from("digraph network {\n");
    if let Some(t) = &spec.title {
        let _ = writeln!(out, "  label={};", quote(t));
    }
    out.push_str("  node [shape=circle, fontsize=10];\n  edge [fontsize=9];\n");
    for (v, vert) in net.vertices() {
        let mut attrs = Vec::new();
        if net.is_entry_exit(v) {
            attrs.push("shape=doublecircle".to_string());
        }
        match vert.border {
            Border::Ttd => attrs.push("style=filled, fillcolor=black, fontcolor=white".into()),
            Border::Vss => attrs.push("style=\"filled,dashed\", fillcolor=gray80".into()),
            Border::None => {}
        }
        if let Some((x, y)) = position(net, spec, v) {
            attrs.push(format!("pos=\"{x},{y}!\""));
        }
        let _ = write!(out, "  {}", quote(&vert.name));
        if !attrs.is_empty() {
            let _ = write!(out, " [{}]", attrs.join(", "));
        }
        out.push_str(";\n");
    }
    for (e, paired) in drawn_edges(net) {
        let edge = net.edge(e);
        let mut label = edge.name.clone();
        if let Some(r) = edge.reverse {
            let _ = write!(label, "/{}", net.edge(r).name);
        }
        let _ = write!(label, " ({} m)", edge.length_mm as f64 / 1000.0);
        let mut attrs = vec![format!("label={}", quote(&label))];
        if paired {
            attrs.push("dir=none".into());
        }
        if marked(&spec.occupied, net, e) {
            attrs.push("color=red, penwidth=3".into());
        } else if marked(&spec.stations, net, e) {
            attrs.push("color=blue, penwidth=3".into());
        }
        let _ = writeln!(
            out,
            "  {} -> {} [{}];",
            quote(&net.vertex(edge.source).name),
            quote(&net.vertex(edge.target).name),
            attrs.join(", ")
        );
    }
    out.push_str("}\n");
    out
}

/// Vertices without a position are placed by breadth-first layers from the
/// first vertex of each component.
fn layout(net: &RailwayNetwork, spec: &RenderSpec) -> Vec<(f64, f64)> {
    let n = net.vertex_count();
    let mut pos: Vec<Option<(f64, f64)>> = (0..n).map(|i| position(net, spec, VertexId(i as u32))).collect();
    if pos.iter().all(Option::is_some) {
        return pos.into_iter().flatten().collect();
    }
    let mut row = 0.0;
    for start in 0..n {
        if pos[start].is_some() {
            continue;
        }
        let mut depth_count: BTreeMap<usize, usize> = BTreeMap::new();
        let mut queue = VecDeque::from([(VertexId(start as u32), 0usize)]);
        let mut seen = BTreeSet::from([start]);
        while let Some((v, d)) = queue.pop_front() {
            let slot = depth_count.entry(d).or_default();
            if pos[v.idx()].is_none() {
                pos[v.idx()] = Some((d as f64, row + *slot as f64));
            }
            *slot += 1;
            for w in net.neighbors(v) {
                if seen.insert(w.idx()) {
                    queue.push_back((w, d + 1));
                }
            }
        }
        row += depth_count.values().max().copied().unwrap_or(1) as f64 + 1.0;
    }
    pos.into_iter().flatten().collect()
}

pub fn render_svg(net: &RailwayNetwork, spec: &RenderSpec) -> String {
    let pos = layout(net, spec);
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for &(x, y) in &pos {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if pos.is_empty() {
        (x0, y0, x1, y1) = (0.0, 0.0, 0.0, 0.0);
    }
    let scale = 80.0;
    let pad = 40.0;
    let px = |(x, y): (f64, f64)| (pad + (x - x0) * scale, pad + (y1 - y) * scale);
    let w = pad * 2.0 + (x1 - x0) * scale;
    let h = pad * 2.0 + (y1 - y0) * scale;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    out.push_str(
        "<defs><pattern id=\"hatch\" width=\"4\" height=\"4\" patternUnits=\"userSpaceOnUse\">\
<path d=\"M0,4 L4,0\" stroke=\"black\" stroke-width=\"1\"/></pattern></defs>\n",
    );
    for (e, paired) in drawn_edges(net) {
        let edge = net.edge(e);
        let (ax, ay) = px(pos[edge.source.idx()]);
        let (bx, by) = px(pos[edge.target.idx()]);
        let color = if marked(&spec.occupied, net, e) {
            "red"
        } else if marked(&spec.stations, net, e) {
            "blue"
        } else {
            "black"
        };
        let dash = if paired { "" } else { " stroke-dasharray=\"6,3\"" };
        let _ = writeln!(
            out,
            "<line x1=\"{ax}\" y1=\"{ay}\" x2=\"{bx}\" y2=\"{by}\" stroke=\"{color}\" stroke-width=\"3\"{dash}><title>{}</title></line>",
            xml(&edge.name)
        );
    }
    for (v, vert) in net.vertices() {
        let (cx, cy) = px(pos[v.idx()]);
        let fill = match vert.border {
            Border::Ttd => "black",
            Border::Vss => "url(#hatch)",
            Border::None => "white",
        };
        let r = if net.is_entry_exit(v) { 9 } else { 6 };
        let _ = writeln!(
            out,
            "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"{r}\" fill=\"{fill}\" stroke=\"black\"/><text x=\"{cx}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
            cy - 12.0,
            xml(&vert.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
