//! Railway network graph: directed edges with reverse pairing, per-vertex
//! successor maps, border levels and entry/exit vertices.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::report::ValidationReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl VertexId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl EdgeId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Value of the border function at a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Border {
    None = 0,
    Vss = 1,
    Ttd = 2,
}

impl Border {
    pub fn level(self) -> u8 {
        self as u8
    }

    pub fn from_level(level: u8) -> Option<Self> {
        match level {
            0 => Some(Border::None),
            1 => Some(Border::Vss),
            2 => Some(Border::Ttd),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub name: String,
    pub border: Border,
    /// `Some(h)` marks an entry/exit vertex with headway `h` milliseconds.
    pub headway_ms: Option<i64>,
    /// Optional drawing position.
    pub hint: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub name: String,
    pub source: VertexId,
    pub target: VertexId,
    pub length_mm: i64,
    pub reverse: Option<EdgeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NetworkIssue {
    NonPositiveLength { edge: String },
    ReverseNotInvolutive { edge: String },
    ReverseEndpoints { edge: String },
    LengthAsymmetric { edge: String },
    SuccessorDomain { vertex: String, in_edge: String },
    SuccessorCodomain { vertex: String, in_edge: String, out_edge: String },
    BorderDegree { vertex: String, neighbors: usize },
    BorderLevel { vertex: String },
    DuplicateName { name: String },
}

impl fmt::Display for NetworkIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkIssue::NonPositiveLength { edge } => write!(f, "edge {edge}: length must be positive"),
            NetworkIssue::ReverseNotInvolutive { edge } => {
                write!(f, "edge {edge}: reverse pairing is not involutive")
            }
            NetworkIssue::ReverseEndpoints { edge } => {
                write!(f, "edge {edge}: reverse edge does not swap source and target")
            }
            NetworkIssue::LengthAsymmetric { edge } => {
                write!(f, "edge {edge}: length differs from its reverse")
            }
            NetworkIssue::SuccessorDomain { vertex, in_edge } => {
                write!(f, "vertex {vertex}: successor key {in_edge} does not enter the vertex")
            }
            NetworkIssue::SuccessorCodomain { vertex, in_edge, out_edge } => write!(
                f,
                "vertex {vertex}: successor {out_edge} of {in_edge} does not leave the vertex"
            ),
            NetworkIssue::BorderDegree { vertex, neighbors } => write!(
                f,
                "entry/exit vertex {vertex} has {neighbors} neighbors, expected exactly 1"
            ),
            NetworkIssue::BorderLevel { vertex } => {
                write!(f, "entry/exit vertex {vertex} must be a TTD border")
            }
            NetworkIssue::DuplicateName { name } => write!(f, "duplicate id {name}"),
        }
    }
}

static NO_SUCCESSORS: BTreeSet<EdgeId> = BTreeSet::new();

/// Directed multigraph with the railway-specific annotations. Immutable once
/// built; transformations return new values.
#[derive(Debug, Clone, PartialEq)]
pub struct RailwayNetwork {
    pub(crate) vertices: Vec<Vertex>,
    pub(crate) edges: Vec<Edge>,
    /// Per vertex: incoming edge -> allowed outgoing edges.
    pub(crate) successors: Vec<BTreeMap<EdgeId, BTreeSet<EdgeId>>>,
    /// Edges marking unbreakable TTDs (any member edge marks its TTD).
    pub(crate) unbreakable: BTreeSet<EdgeId>,
    pub(crate) out_edges: Vec<Vec<EdgeId>>,
    pub(crate) in_edges: Vec<Vec<EdgeId>>,
    vertex_index: HashMap<String, VertexId>,
    edge_index: HashMap<String, EdgeId>,
}

impl RailwayNetwork {
    pub(crate) fn from_parts(
        vertices: Vec<Vertex>,
        edges: Vec<Edge>,
        successors: Vec<BTreeMap<EdgeId, BTreeSet<EdgeId>>>,
        unbreakable: BTreeSet<EdgeId>,
    ) -> Self {
        let mut out_edges = vec![Vec::new(); vertices.len()];
        let mut in_edges = vec![Vec::new(); vertices.len()];
        for (i, e) in edges.iter().enumerate() {
            out_edges[e.source.idx()].push(EdgeId(i as u32));
            in_edges[e.target.idx()].push(EdgeId(i as u32));
        }
        let vertex_index = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), VertexId(i as u32)))
            .collect();
        let edge_index = edges
            .iter()
            .enumerate()
            .map(|(i, e)| (e.name.clone(), EdgeId(i as u32)))
            .collect();
        RailwayNetwork {
            vertices,
            edges,
            successors,
            unbreakable,
            out_edges,
            in_edges,
            vertex_index,
            edge_index,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        &self.vertices[v.idx()]
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.idx()]
    }

    pub fn vertices(&self) -> impl Iterator<Item = (VertexId, &Vertex)> {
        self.vertices.iter().enumerate().map(|(i, v)| (VertexId(i as u32), v))
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, &Edge)> {
        self.edges.iter().enumerate().map(|(i, e)| (EdgeId(i as u32), e))
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.edges.len() as u32).map(EdgeId)
    }

    pub fn vertex_id(&self, name: &str) -> Result<VertexId> {
        self.vertex_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(name.to_string()))
    }

    pub fn edge_id(&self, name: &str) -> Result<EdgeId> {
        self.edge_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownEdge(name.to_string()))
    }

    pub fn has_edge(&self, e: EdgeId) -> bool {
        e.idx() < self.edges.len()
    }

    fn check_edge(&self, e: EdgeId) -> Result<()> {
        if self.has_edge(e) {
            Ok(())
        } else {
            Err(Error::UnknownEdge(format!("#{}", e.0)))
        }
    }

    pub fn length(&self, e: EdgeId) -> i64 {
        self.edges[e.idx()].length_mm
    }

    pub fn reverse(&self, e: EdgeId) -> Option<EdgeId> {
        self.edges[e.idx()].reverse
    }

    pub fn source(&self, e: EdgeId) -> VertexId {
        self.edges[e.idx()].source
    }

    pub fn target(&self, e: EdgeId) -> VertexId {
        self.edges[e.idx()].target
    }

    pub fn border(&self, v: VertexId) -> Border {
        self.vertices[v.idx()].border
    }

    pub fn is_entry_exit(&self, v: VertexId) -> bool {
        self.vertices[v.idx()].headway_ms.is_some()
    }

    pub fn headway_ms(&self, v: VertexId) -> i64 {
        self.vertices[v.idx()].headway_ms.unwrap_or(0)
    }

    pub fn entry_exit_vertices(&self) -> Vec<VertexId> {
        self.vertices()
            .filter(|(_, v)| v.headway_ms.is_some())
            .map(|(id, _)| id)
            .collect()
    }

    pub fn out_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.out_edges[v.idx()]
    }

    pub fn in_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.in_edges[v.idx()]
    }

    pub fn unbreakable_marks(&self) -> &BTreeSet<EdgeId> {
        &self.unbreakable
    }

    /// Undirected neighborhood Γ(v).
    pub fn neighbors(&self, v: VertexId) -> BTreeSet<VertexId> {
        let mut n = BTreeSet::new();
        for &e in &self.out_edges[v.idx()] {
            n.insert(self.target(e));
        }
        for &e in &self.in_edges[v.idx()] {
            n.insert(self.source(e));
        }
        n.remove(&v);
        n
    }

    /// Successor edges allowed after traversing `incoming`.
    pub fn successors(&self, incoming: EdgeId) -> Result<&BTreeSet<EdgeId>> {
        self.check_edge(incoming)?;
        let v = self.target(incoming);
        Ok(self.successors[v.idx()].get(&incoming).unwrap_or(&NO_SUCCESSORS))
    }

    pub fn successor_map(&self, v: VertexId) -> &BTreeMap<EdgeId, BTreeSet<EdgeId>> {
        &self.successors[v.idx()]
    }

    /// Consecutive edges are head-to-tail connected.
    pub fn is_track_sequence(&self, seq: &[EdgeId]) -> Result<bool> {
        for &e in seq {
            self.check_edge(e)?;
        }
        Ok(seq.windows(2).all(|w| self.target(w[0]) == self.source(w[1])))
    }

    /// Connected and every step allowed by the successor map at the joint.
    pub fn is_valid_track_sequence(&self, seq: &[EdgeId]) -> Result<bool> {
        if !self.is_track_sequence(seq)? {
            return Ok(false);
        }
        for w in seq.windows(2) {
            if !self.successors(w[0])?.contains(&w[1]) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn validate(&self) -> ValidationReport<NetworkIssue> {
        let mut report = ValidationReport::new();
        let mut names = BTreeSet::new();
        for v in &self.vertices {
            if !names.insert(v.name.as_str()) {
                report.push(NetworkIssue::DuplicateName { name: v.name.clone() });
            }
        }
        let mut enames = BTreeSet::new();
        for e in &self.edges {
            if !enames.insert(e.name.as_str()) {
                report.push(NetworkIssue::DuplicateName { name: e.name.clone() });
            }
        }
        for (id, e) in self.edges() {
            if e.length_mm <= 0 {
                report.push(NetworkIssue::NonPositiveLength { edge: e.name.clone() });
            }
            if let Some(r) = e.reverse {
                if !self.has_edge(r) || self.reverse(r) != Some(id) || r == id {
                    report.push(NetworkIssue::ReverseNotInvolutive { edge: e.name.clone() });
                    continue;
                }
                let re = self.edge(r);
                if re.source != e.target || re.target != e.source {
                    report.push(NetworkIssue::ReverseEndpoints { edge: e.name.clone() });
                }
                if re.length_mm != e.length_mm {
                    report.push(NetworkIssue::LengthAsymmetric { edge: e.name.clone() });
                }
            }
        }
        for (vid, v) in self.vertices() {
            for (inc, outs) in &self.successors[vid.idx()] {
                if !self.has_edge(*inc) || self.target(*inc) != vid {
                    report.push(NetworkIssue::SuccessorDomain {
                        vertex: v.name.clone(),
                        in_edge: self.name_of(*inc),
                    });
                    continue;
                }
                for o in outs {
                    if !self.has_edge(*o) || self.source(*o) != vid {
                        report.push(NetworkIssue::SuccessorCodomain {
                            vertex: v.name.clone(),
                            in_edge: self.name_of(*inc),
                            out_edge: self.name_of(*o),
                        });
                    }
                }
            }
            if v.headway_ms.is_some() {
                let n = self.neighbors(vid).len();
                if n != 1 {
                    report.push(NetworkIssue::BorderDegree { vertex: v.name.clone(), neighbors: n });
                }
                if v.border != Border::Ttd {
                    report.push(NetworkIssue::BorderLevel { vertex: v.name.clone() });
                }
            }
        }
        report
    }

    fn name_of(&self, e: EdgeId) -> String {
        if self.has_edge(e) {
            self.edge(e).name.clone()
        } else {
            format!("#{}", e.0)
        }
    }

    pub fn total_length_mm(&self) -> i64 {
        self.edges.iter().map(|e| e.length_mm).sum()
    }
}

/// Incremental construction of a [`RailwayNetwork`]. No validation happens
/// here; call [`RailwayNetwork::validate`] on the result.
#[derive(Debug, Default, Clone)]
pub struct NetworkBuilder {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    successors: Vec<BTreeMap<EdgeId, BTreeSet<EdgeId>>>,
    unbreakable: BTreeSet<EdgeId>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(&mut self, name: &str, border: Border) -> VertexId {
        self.vertices.push(Vertex {
            name: name.to_string(),
            border,
            headway_ms: None,
            hint: None,
        });
        self.successors.push(BTreeMap::new());
        VertexId(self.vertices.len() as u32 - 1)
    }

    /// Entry/exit vertex (always a TTD border).
    pub fn boundary(&mut self, name: &str, headway_ms: i64) -> VertexId {
        let v = self.vertex(name, Border::Ttd);
        self.vertices[v.idx()].headway_ms = Some(headway_ms);
        v
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertices[v.idx()].name
    }

    pub fn set_hint(&mut self, v: VertexId, x: f64, y: f64) {
        self.vertices[v.idx()].hint = Some((x, y));
    }

    pub fn set_headway(&mut self, v: VertexId, headway_ms: Option<i64>) {
        self.vertices[v.idx()].headway_ms = headway_ms;
    }

    pub fn edge(&mut self, name: &str, source: VertexId, target: VertexId, length_mm: i64) -> EdgeId {
        self.edges.push(Edge {
            name: name.to_string(),
            source,
            target,
            length_mm,
            reverse: None,
        });
        EdgeId(self.edges.len() as u32 - 1)
    }

    /// Bidirectional track: `name` runs source→target, `rev_name` back.
    pub fn track(
        &mut self,
        name: &str,
        rev_name: &str,
        source: VertexId,
        target: VertexId,
        length_mm: i64,
    ) -> (EdgeId, EdgeId) {
        let a = self.edge(name, source, target, length_mm);
        let b = self.edge(rev_name, target, source, length_mm);
        self.pair(a, b);
        (a, b)
    }

    pub fn pair(&mut self, a: EdgeId, b: EdgeId) {
        self.edges[a.idx()].reverse = Some(b);
        self.edges[b.idx()].reverse = Some(a);
    }

    /// Allow `outs` after `incoming` at the target vertex of `incoming`.
    pub fn allow(&mut self, incoming: EdgeId, outs: &[EdgeId]) {
        let v = self.edges[incoming.idx()].target;
        self.successors[v.idx()]
            .entry(incoming)
            .or_default()
            .extend(outs.iter().copied());
    }

    /// Raw successor entry; `vertex` is not checked against `incoming`.
    pub fn allow_at(&mut self, vertex: VertexId, incoming: EdgeId, outs: &[EdgeId]) {
        self.successors[vertex.idx()]
            .entry(incoming)
            .or_default()
            .extend(outs.iter().copied());
    }

    /// Every incoming edge may continue on every outgoing edge except its own
    /// reverse.
    pub fn allow_straight_through(&mut self) {
        self.fill_successors(false);
    }

    /// Every incoming edge may continue on every outgoing edge.
    pub fn allow_everything(&mut self) {
        self.fill_successors(true);
    }

    fn fill_successors(&mut self, include_reverse: bool) {
        let n = self.vertices.len();
        let mut outs = vec![Vec::new(); n];
        for (i, e) in self.edges.iter().enumerate() {
            outs[e.source.idx()].push(EdgeId(i as u32));
        }
        for (i, e) in self.edges.iter().enumerate() {
            let id = EdgeId(i as u32);
            let v = e.target;
            let allowed: Vec<EdgeId> = outs[v.idx()]
                .iter()
                .copied()
                .filter(|&o| include_reverse || e.reverse != Some(o))
                .collect();
            self.successors[v.idx()].entry(id).or_default().extend(allowed);
        }
    }

    pub fn mark_unbreakable(&mut self, e: EdgeId) {
        self.unbreakable.insert(e);
    }

    pub fn build(self) -> RailwayNetwork {
        RailwayNetwork::from_parts(self.vertices, self.edges, self.successors, self.unbreakable)
    }
}
