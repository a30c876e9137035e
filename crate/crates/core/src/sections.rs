//! TTD and VSS sections as connected components of the edge adjacency
//! induced by the border function.

use crate::network::{EdgeId, RailwayNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Vss = 1,
    Ttd = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SectionId(pub u32);

impl SectionId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionPartition {
    pub level: Level,
    /// Sorted edge lists, ordered by their smallest edge.
    pub sections: Vec<Vec<EdgeId>>,
    pub edge_to_section: Vec<SectionId>,
}

impl SectionPartition {
    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    pub fn section_of(&self, e: EdgeId) -> SectionId {
        self.edge_to_section[e.idx()]
    }

    pub fn edges(&self, s: SectionId) -> &[EdgeId] {
        &self.sections[s.idx()]
    }

    /// Every section of `self` lies inside one section of `coarser`.
    pub fn refines(&self, coarser: &SectionPartition) -> bool {
        self.sections.iter().all(|sec| {
            let first = coarser.section_of(sec[0]);
            sec.iter().all(|&e| coarser.section_of(e) == first)
        })
    }
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller index as root so roots are canonical
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Edges are joined when they are reverses of each other or share an
/// endpoint whose border value is below `level`.
pub fn derive_sections(net: &RailwayNetwork, level: Level) -> SectionPartition {
    let n = net.edge_count();
    let mut dsu = Dsu::new(n);
    for (id, e) in net.edges() {
        if let Some(r) = e.reverse {
            dsu.union(id.idx(), r.idx());
        }
    }
    for (vid, v) in net.vertices() {
        if v.border.level() >= level as u8 {
            continue;
        }
        let incident: Vec<EdgeId> = net
            .in_edges(vid)
            .iter()
            .chain(net.out_edges(vid).iter())
            .copied()
            .collect();
        if let Some(&first) = incident.first() {
            for &e in &incident[1..] {
                dsu.union(first.idx(), e.idx());
            }
        }
    }
    let mut root_to_section = vec![u32::MAX; n];
    let mut sections: Vec<Vec<EdgeId>> = Vec::new();
    let mut edge_to_section = vec![SectionId(0); n];
    for i in 0..n {
        let r = dsu.find(i);
        if root_to_section[r] == u32::MAX {
            root_to_section[r] = sections.len() as u32;
            sections.push(Vec::new());
        }
        let s = root_to_section[r];
        sections[s as usize].push(EdgeId(i as u32));
        edge_to_section[i] = SectionId(s);
    }
    SectionPartition { level, sections, edge_to_section }
}
