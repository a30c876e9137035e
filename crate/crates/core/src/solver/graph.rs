//! Time-expanded state graph of a single train, restricted to states that
//! are reachable from an entry and can still reach a valid exit.

use std::collections::HashMap;

use super::model::{Next, Phase, RunState, TrainModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum NodeKind {
    Run(RunState),
    Exit { route: u16, k: u16 },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Node {
    pub t: u32,
    pub kind: NodeKind,
}

#[derive(Debug, Default)]
pub(crate) struct TrainGraph {
    pub nodes: Vec<Node>,
    /// CSR successor lists.
    pub succ_start: Vec<u32>,
    pub succ: Vec<u32>,
    pub entries: Vec<u32>,
}

impl TrainGraph {
    pub fn successors(&self, n: u32) -> &[u32] {
        &self.succ[self.succ_start[n as usize] as usize..self.succ_start[n as usize + 1] as usize]
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Predecessor lists in CSR form.
    pub fn predecessors(&self) -> (Vec<u32>, Vec<u32>) {
        let n = self.nodes.len();
        let mut deg = vec![0u32; n + 1];
        for &b in &self.succ {
            deg[b as usize + 1] += 1;
        }
        for i in 0..n {
            deg[i + 1] += deg[i];
        }
        let mut fill = deg.clone();
        let mut pred = vec![0u32; self.succ.len()];
        for a in 0..n as u32 {
            for &b in self.successors(a) {
                pred[fill[b as usize] as usize] = a;
                fill[b as usize] += 1;
            }
        }
        (deg, pred)
    }

    /// Smallest number of steps from an entry to an exit.
    pub fn min_travel_steps(&self) -> Option<i64> {
        let n = self.nodes.len();
        let mut earliest = vec![u32::MAX; n];
        for i in (0..n).rev() {
            earliest[i] = match self.nodes[i].kind {
                NodeKind::Exit { .. } => self.nodes[i].t,
                NodeKind::Run(_) => self.successors(i as u32).iter().map(|&b| earliest[b as usize]).min().unwrap_or(u32::MAX),
            };
        }
        self.entries
            .iter()
            .filter(|&&e| earliest[e as usize] != u32::MAX)
            .map(|&e| earliest[e as usize] as i64 - self.nodes[e as usize].t as i64)
            .min()
    }

    /// Distinct (route, position, speed, phase) states, ignoring time.
    pub fn distinct_states(&self) -> usize {
        let mut keys: Vec<(bool, RunState)> = self
            .nodes
            .iter()
            .map(|n| match n.kind {
                NodeKind::Run(s) => (false, s),
                NodeKind::Exit { route, k } => (true, RunState { route, x: 0, k, phase: Phase::Wait(0) }),
            })
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct NodeLimit;

pub(crate) fn build(model: &TrainModel, horizon: i64, node_limit: usize) -> Result<TrainGraph, NodeLimit> {
    let mut nodes: Vec<Node> = Vec::new();
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut entries = Vec::new();
    // entries are kept apart from reached states so that a node marks the
    // entry time unambiguously
    let mut layer: HashMap<(RunState, bool), u32> = HashMap::new();
    let mut buf = Vec::new();
    let mut nexts = Vec::new();
    let first = model.entry.0.max(0);
    let last = model.exit.1.min(horizon);
    if first > last {
        return Ok(TrainGraph { succ_start: vec![0], ..Default::default() });
    }
    let mut t = first;
    loop {
        // new entries at this step
        buf.clear();
        model.entries(t, &mut buf);
        for s in &buf {
            let id = *layer.entry((*s, true)).or_insert_with(|| {
                nodes.push(Node { t: t as u32, kind: NodeKind::Run(*s) });
                nodes.len() as u32 - 1
            });
            entries.push(id);
        }
        if t >= last {
            break;
        }
        let mut next_layer: HashMap<(RunState, bool), u32> = HashMap::with_capacity(layer.len() * 2);
        let mut exit_ids: HashMap<(u16, u16), u32> = HashMap::new();
        let mut current: Vec<(RunState, u32)> = layer.iter().map(|(s, &i)| (s.0, i)).collect();
        current.sort_unstable_by_key(|&(_, i)| i);
        for (s, id) in current {
            nexts.clear();
            model.successors(t, &s, &mut nexts);
            for n in &nexts {
                let to = match *n {
                    Next::Run(s2) => *next_layer.entry((s2, false)).or_insert_with(|| {
                        nodes.push(Node { t: t as u32 + 1, kind: NodeKind::Run(s2) });
                        nodes.len() as u32 - 1
                    }),
                    Next::Exit { route, k } => *exit_ids.entry((route, k)).or_insert_with(|| {
                        nodes.push(Node { t: t as u32 + 1, kind: NodeKind::Exit { route, k } });
                        nodes.len() as u32 - 1
                    }),
                };
                edges.push((id, to));
            }
        }
        if nodes.len() > node_limit {
            return Err(NodeLimit);
        }
        layer = next_layer;
        t += 1;
    }
    entries.sort_unstable();
    entries.dedup();

    // backward liveness; node ids grow with time, so one reverse pass suffices
    let n = nodes.len();
    let mut out_deg = vec![0u32; n + 1];
    for &(a, _) in &edges {
        out_deg[a as usize] += 1;
    }
    let mut start = vec![0u32; n + 1];
    for i in 0..n {
        start[i + 1] = start[i] + out_deg[i];
    }
    let mut fill = start.clone();
    let mut adj = vec![0u32; edges.len()];
    for &(a, b) in &edges {
        adj[fill[a as usize] as usize] = b;
        fill[a as usize] += 1;
    }
    let mut alive = vec![false; n];
    for i in (0..n).rev() {
        alive[i] = match nodes[i].kind {
            NodeKind::Exit { .. } => true,
            NodeKind::Run(_) => adj[start[i] as usize..start[i + 1] as usize]
                .iter()
                .any(|&b| alive[b as usize]),
        };
    }
    let mut remap = vec![u32::MAX; n];
    let mut kept = Vec::new();
    for i in 0..n {
        if alive[i] {
            remap[i] = kept.len() as u32;
            kept.push(nodes[i]);
        }
    }
    let mut succ_start = Vec::with_capacity(kept.len() + 1);
    let mut succ = Vec::new();
    succ_start.push(0);
    for i in 0..n {
        if !alive[i] {
            continue;
        }
        let mut list: Vec<u32> = adj[start[i] as usize..start[i + 1] as usize]
            .iter()
            .filter(|&&b| alive[b as usize])
            .map(|&b| remap[b as usize])
            .collect();
        list.sort_unstable();
        list.dedup();
        succ.extend(list);
        succ_start.push(succ.len() as u32);
    }
    let entries = entries.into_iter().filter(|&e| alive[e as usize]).map(|e| remap[e as usize]).collect();
    Ok(TrainGraph { nodes: kept, succ_start, succ, entries })
}
