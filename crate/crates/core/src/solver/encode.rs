//! SAT encoding of the joint schedule over the per-train state graphs.
//!
//! Variables: one per graph node, occupation o(i,t,V) of VSS sections,
//! TTD presence a(i,t,T) and release history for trains without integrity
//! monitoring, entry/exit markers for headways, and auxiliary literals for
//! objectives and cardinalities.

use std::collections::{BTreeMap, HashMap};

use cadical::Solver;

use crate::kinematics::RouteTimeline;
use crate::kinematics::Sample;
use crate::sections::{derive_sections, Level, SectionPartition};

use super::graph::{NodeKind, TrainGraph};
use super::model::TrainModel;
use super::{Prepared, ProblemInstance};

pub(crate) struct Encoder<'a> {
    models: &'a [TrainModel],
    graphs: &'a [TrainGraph],
    sat: Solver,
    next: i32,
    base: Vec<i32>,
    /// Selector per model; `None` for mandatory trains.
    selectors: Vec<Option<i32>>,
    /// Entered-by and exited-by chains over [entry.0, exit.1], built on
    /// demand for objectives.
    chains: Option<Vec<(Vec<i32>, Vec<i32>)>>,
    /// Weighted sum objective: constant part and totalizer outputs.
    sum: Option<(i64, Vec<i32>)>,
    cardinality: Option<Vec<i32>>,
    conflict_limit: Option<i32>,
    weights: Vec<i64>,
}

impl<'a> Encoder<'a> {
    /// `single_path` forces the true nodes of each train onto one chain,
    /// which objective bounds rely on.
    pub fn new(inst: &ProblemInstance, p: &'a Prepared, single_path: bool) -> Self {
        let mut sat = Solver::new();
        if let Some(t) = inst.config.time_limit_s {
            sat.set_callbacks(Some(cadical::Timeout::new(t)));
        }
        let mut base = Vec::with_capacity(p.graphs.len());
        let mut next = 1;
        for g in &p.graphs {
            base.push(next);
            next += g.nodes.len() as i32;
        }
        let mut enc = Encoder {
            models: &p.models,
            graphs: &p.graphs,
            sat,
            next,
            base,
            selectors: Vec::new(),
            chains: None,
            sum: None,
            cardinality: None,
            conflict_limit: inst.config.conflict_limit,
            weights: p.models.iter().map(|m| inst.requests[m.train].weight).collect(),
        };
        enc.encode_runs(inst);
        if single_path {
            enc.encode_single_path();
        }
        enc.encode_sections(inst);
        enc.encode_headways(inst);
        enc
    }

    fn fresh(&mut self) -> i32 {
        self.next += 1;
        self.next - 1
    }

    fn node(&self, m: usize, n: u32) -> i32 {
        self.base[m] + n as i32
    }

    fn encode_runs(&mut self, inst: &ProblemInstance) {
        for m in 0..self.graphs.len() {
            let g: &'a TrainGraph = &self.graphs[m];
            let sel = if inst.requests[self.models[m].train].optional { Some(self.fresh()) } else { None };
            self.selectors.push(sel);
            let mut clause: Vec<i32> = sel.map(|s| -s).into_iter().collect();
            clause.extend(g.entries.iter().map(|&e| self.node(m, e)));
            self.sat.add_clause(clause);
            for n in 0..g.nodes.len() as u32 {
                if let NodeKind::Run(_) = g.nodes[n as usize].kind {
                    let mut c = vec![-self.node(m, n)];
                    c.extend(g.successors(n).iter().map(|&b| self.node(m, b)));
                    self.sat.add_clause(c);
                }
            }
        }
    }

    /// At most one true node per train and step; every true node other
    /// than an entry has a true predecessor.
    fn encode_single_path(&mut self) {
        for m in 0..self.graphs.len() {
            let g: &'a TrainGraph = &self.graphs[m];
            let (start, pred) = g.predecessors();
            let mut is_entry = vec![false; g.nodes.len()];
            for &e in &g.entries {
                is_entry[e as usize] = true;
            }
            for n in 0..g.nodes.len() {
                if is_entry[n] {
                    continue;
                }
                let mut c = vec![-self.node(m, n as u32)];
                c.extend(pred[start[n] as usize..start[n + 1] as usize].iter().map(|&a| self.node(m, a)));
                self.sat.add_clause(c);
            }
            let mut i = 0;
            while i < g.nodes.len() {
                let t = g.nodes[i].t;
                let mut j = i;
                while j < g.nodes.len() && g.nodes[j].t == t {
                    j += 1;
                }
                let lits: Vec<i32> = (i..j).map(|n| self.node(m, n as u32)).collect();
                self.at_most_one(&lits);
                i = j;
            }
        }
    }

    fn at_most_one(&mut self, lits: &[i32]) {
        if lits.len() < 2 {
            return;
        }
        if lits.len() <= 5 {
            for a in 0..lits.len() {
                for b in a + 1..lits.len() {
                    self.sat.add_clause([-lits[a], -lits[b]]);
                }
            }
            return;
        }
        // sequential counter
        let mut prev = self.fresh();
        self.sat.add_clause([-lits[0], prev]);
        for &x in &lits[1..lits.len() - 1] {
            let s = self.fresh();
            self.sat.add_clause([-x, s]);
            self.sat.add_clause([-prev, s]);
            self.sat.add_clause([-x, -prev]);
            prev = s;
        }
        self.sat.add_clause([-lits[lits.len() - 1], -prev]);
    }

    fn encode_sections(&mut self, inst: &ProblemInstance) {
        let net = &inst.network;
        let vss = derive_sections(net, Level::Vss);
        let ttd = derive_sections(net, Level::Ttd);
        // (t, V) -> [(model, o var)]
        let mut occ: BTreeMap<(u32, u32), Vec<(usize, i32)>> = BTreeMap::new();
        // per non-TIM model: t -> (V -> o var, T -> a var)
        let mut nontim: Vec<(usize, BTreeMap<u32, (BTreeMap<u32, i32>, BTreeMap<u32, i32>)>)> = Vec::new();
        for m in 0..self.graphs.len() {
            let g: &'a TrainGraph = &self.graphs[m];
            let model: &'a TrainModel = &self.models[m];
            let tim = inst.trains[model.train].tim;
            let mut cache: HashMap<(u16, u16, u16), (Vec<u32>, Vec<u32>)> = HashMap::new();
            let mut ovar: HashMap<(u32, u32), i32> = HashMap::new();
            let mut avar: HashMap<(u32, u32), i32> = HashMap::new();
            let mut per_t: BTreeMap<u32, (BTreeMap<u32, i32>, BTreeMap<u32, i32>)> = BTreeMap::new();
            for n in 0..g.nodes.len() {
                let node = g.nodes[n];
                let (route, span) = match node.kind {
                    NodeKind::Run(s) => (s.route, model.span(s.route, s.x, s.k)),
                    NodeKind::Exit { route, .. } => (route, model.exit_span(route)),
                };
                let (vs, ts) = cache
                    .entry((route, span.0, span.1))
                    .or_insert_with(|| sections_of(model.edges_of(route, span), &vss, &ttd))
                    .clone();
                let lit = self.node(m, n as u32);
                for v in vs {
                    let o = match ovar.get(&(node.t, v)) {
                        Some(&o) => o,
                        None => {
                            let o = self.fresh();
                            ovar.insert((node.t, v), o);
                            occ.entry((node.t, v)).or_default().push((m, o));
                            if !tim {
                                per_t.entry(node.t).or_default().0.insert(v, o);
                            }
                            o
                        }
                    };
                    self.sat.add_clause([-lit, o]);
                }
                if !tim {
                    for h in ts {
                        let a = match avar.get(&(node.t, h)) {
                            Some(&a) => a,
                            None => {
                                let a = self.fresh();
                                avar.insert((node.t, h), a);
                                per_t.entry(node.t).or_default().1.insert(h, a);
                                a
                            }
                        };
                        self.sat.add_clause([-lit, a]);
                    }
                }
            }
            if !tim {
                nontim.push((m, per_t));
            }
        }
        for holders in occ.values() {
            for a in 0..holders.len() {
                for b in a + 1..holders.len() {
                    if holders[a].0 != holders[b].0 {
                        self.sat.add_clause([-holders[a].1, -holders[b].1]);
                    }
                }
            }
        }
        for (m, per_t) in nontim {
            let mut prev: BTreeMap<u32, i32> = BTreeMap::new();
            let mut prev_t = None;
            for (&t, (os, as_)) in &per_t {
                let mut hist: BTreeMap<u32, i32> = BTreeMap::new();
                for (&v, &o) in os {
                    let hv = self.fresh();
                    self.sat.add_clause([-o, hv]);
                    hist.insert(v, hv);
                }
                if prev_t == Some(t.wrapping_sub(1)) {
                    for (&v, &hp) in &prev {
                        let h = ttd.section_of(vss.edges(crate::sections::SectionId(v))[0]).0;
                        if let Some(&a) = as_.get(&h) {
                            let hv = match hist.get(&v) {
                                Some(&hv) => hv,
                                None => {
                                    let hv = self.fresh();
                                    hist.insert(v, hv);
                                    hv
                                }
                            };
                            self.sat.add_clause([-a, -hp, hv]);
                        }
                    }
                }
                for (&v, &hv) in &hist {
                    if let Some(holders) = occ.get(&(t, v)) {
                        for &(other, o) in holders {
                            if other != m {
                                self.sat.add_clause([-hv, -o]);
                            }
                        }
                    }
                }
                prev = hist;
                prev_t = Some(t);
            }
        }
    }

    fn encode_headways(&mut self, inst: &ProblemInstance) {
        let net = &inst.network;
        let dt = inst.config.dt_ms;
        let mut en: Vec<BTreeMap<u32, i32>> = Vec::new();
        let mut ex: Vec<BTreeMap<u32, i32>> = Vec::new();
        for m in 0..self.graphs.len() {
            let g: &'a TrainGraph = &self.graphs[m];
            let mut e_map: BTreeMap<u32, i32> = BTreeMap::new();
            for &n in &g.entries {
                let t = g.nodes[n as usize].t;
                let lit = match e_map.get(&t) {
                    Some(&l) => l,
                    None => {
                        let l = self.fresh();
                        e_map.insert(t, l);
                        l
                    }
                };
                self.sat.add_clause([-self.node(m, n), lit]);
            }
            let mut x_map: BTreeMap<u32, i32> = BTreeMap::new();
            for n in 0..g.nodes.len() {
                if let NodeKind::Exit { .. } = g.nodes[n].kind {
                    let t = g.nodes[n].t;
                    let lit = match x_map.get(&t) {
                        Some(&l) => l,
                        None => {
                            let l = self.fresh();
                            x_map.insert(t, l);
                            l
                        }
                    };
                    self.sat.add_clause([-self.node(m, n as u32), lit]);
                }
            }
            en.push(e_map);
            ex.push(x_map);
        }
        for a in 0..self.models.len() {
            for b in a + 1..self.models.len() {
                let (ra, rb) = (&inst.requests[self.models[a].train], &inst.requests[self.models[b].train]);
                for (va, vb, ma, mb) in [(ra.entry, rb.entry, &en[a], &en[b]), (ra.exit, rb.exit, &ex[a], &ex[b])] {
                    if va != vb {
                        continue;
                    }
                    let h = net.headway_ms(va);
                    if h <= 0 {
                        continue;
                    }
                    let mut clauses = Vec::new();
                    for (&t1, &l1) in ma {
                        for (&t2, &l2) in mb {
                            if super::headway_conflict(h, t1 as i64 * dt, t2 as i64 * dt) {
                                clauses.push([-l1, -l2]);
                            }
                        }
                    }
                    for c in clauses {
                        self.sat.add_clause(c);
                    }
                }
            }
        }
    }

    pub fn solve(&mut self, assumptions: &[i32]) -> Option<bool> {
        if let Some(c) = self.conflict_limit {
            self.sat.set_limit("conflicts", c).expect("conflict limit is a known CaDiCaL limit");
        }
        self.sat.solve_with(assumptions.iter().copied())
    }

    fn value(&self, lit: i32) -> bool {
        self.sat.value(lit).unwrap_or(false)
    }

    /// Timelines of the selected trains in the last model.
    pub fn decode(&self) -> Vec<RouteTimeline> {
        let mut out = Vec::new();
        for m in 0..self.graphs.len() {
            if let Some(s) = self.selectors[m] {
                if !self.value(s) {
                    continue;
                }
            }
            let g: &'a TrainGraph = &self.graphs[m];
            let model: &'a TrainModel = &self.models[m];
            let Some(&start) = g.entries.iter().find(|&&e| self.value(self.node(m, e))) else {
                continue;
            };
            let mut samples = Vec::new();
            let mut n = start;
            loop {
                let node = g.nodes[n as usize];
                let state = match node.kind {
                    NodeKind::Run(s) => model.state(&s),
                    NodeKind::Exit { route, k } => model.exit_state(route, k),
                };
                samples.push(Sample { t_ms: node.t as i64 * model.dt_ms, state });
                if let NodeKind::Exit { .. } = node.kind {
                    break;
                }
                match g.successors(n).iter().find(|&&b| self.value(self.node(m, b))) {
                    Some(&b) => n = b,
                    None => break,
                }
            }
            out.push(RouteTimeline { train: model.train, samples });
        }
        out
    }

    pub fn optional_count(&self) -> usize {
        self.selectors.iter().flatten().count()
    }

    pub fn selector_literals(&self) -> Vec<i32> {
        self.selectors.iter().flatten().copied().collect()
    }

    pub fn selected_count(&self) -> usize {
        self.selectors.iter().flatten().filter(|&&s| self.value(s)).count()
    }

    /// Assumptions requiring at least `r` selected optional trains.
    pub fn at_least(&mut self, r: usize) -> Vec<i32> {
        if r == 0 {
            return vec![];
        }
        if self.cardinality.is_none() {
            let inputs = self.selector_literals();
            let cap = inputs.len();
            let outs = self.totalizer(&inputs, cap);
            self.cardinality = Some(outs);
        }
        let outs = self.cardinality.as_ref().unwrap();
        vec![outs[r - 1]]
    }

    /// Output `k` is true whenever at least k+1 inputs are true (outputs
    /// beyond `cap` are merged into the last one).
    fn totalizer(&mut self, inputs: &[i32], cap: usize) -> Vec<i32> {
        if inputs.len() <= 1 {
            return inputs.to_vec();
        }
        let mid = inputs.len() / 2;
        let left = self.totalizer(&inputs[..mid], cap);
        let right = self.totalizer(&inputs[mid..], cap);
        let size = (left.len() + right.len()).min(cap);
        let outs: Vec<i32> = (0..size).map(|_| self.fresh()).collect();
        for i in 0..=left.len() {
            for j in 0..=right.len() {
                if i + j == 0 {
                    continue;
                }
                let k = (i + j).min(size);
                let mut c = vec![outs[k - 1]];
                if i > 0 {
                    c.push(-left[i - 1]);
                }
                if j > 0 {
                    c.push(-right[j - 1]);
                }
                self.sat.add_clause(c);
            }
        }
        outs
    }

    fn ensure_chains(&mut self) {
        if self.chains.is_some() {
            return;
        }
        let mut chains = Vec::new();
        for m in 0..self.graphs.len() {
            let g: &'a TrainGraph = &self.graphs[m];
            let (t0, t1) = (self.models[m].entry.0.max(0), self.models[m].exit.1);
            let len = (t1 - t0 + 1).max(0) as usize;
            let eb: Vec<i32> = (0..len).map(|_| self.fresh()).collect();
            let xb: Vec<i32> = (0..len).map(|_| self.fresh()).collect();
            let mut exits_at: Vec<Vec<i32>> = vec![Vec::new(); len];
            for &e in &g.entries {
                let i = (g.nodes[e as usize].t as i64 - t0) as usize;
                self.sat.add_clause([-self.node(m, e), eb[i]]);
            }
            for n in 0..g.nodes.len() {
                if let NodeKind::Exit { .. } = g.nodes[n].kind {
                    let i = (g.nodes[n].t as i64 - t0) as usize;
                    exits_at[i].push(self.node(m, n as u32));
                }
            }
            for i in 0..len {
                if i > 0 {
                    self.sat.add_clause([-eb[i - 1], eb[i]]);
                }
                let mut c = vec![-xb[i]];
                if i > 0 {
                    c.push(xb[i - 1]);
                }
                c.extend(exits_at[i].iter().copied());
                self.sat.add_clause(c);
            }
            chains.push((eb, xb));
        }
        self.chains = Some(chains);
    }

    /// Assumption bounding every travel time by `b` steps.
    pub fn max_bound(&mut self, b: i64) -> Vec<i32> {
        self.ensure_chains();
        let guard = self.fresh();
        let chains = self.chains.take().unwrap();
        for (m, (eb, xb)) in chains.iter().enumerate() {
            if self.selectors[m].is_some() {
                continue;
            }
            let len = eb.len() as i64;
            for i in 0..len {
                let j = i + b;
                if j >= len - 1 {
                    break;
                }
                self.sat.add_clause([-guard, -eb[i as usize], xb[j as usize]]);
            }
        }
        self.chains = Some(chains);
        vec![guard]
    }

    /// Assumption bounding the weighted travel-time sum by `b` steps; `cap`
    /// is an upper bound on the values that will be asked for.
    pub fn sum_bound(&mut self, b: i64, cap: i64) -> Vec<i32> {
        self.ensure_chains();
        if self.sum.is_none() {
            let chains = self.chains.take().unwrap();
            let mut constant = 0;
            let mut inputs = Vec::new();
            for (m, (eb, xb)) in chains.iter().enumerate() {
                if self.selectors[m].is_some() {
                    continue;
                }
                let model: &'a TrainModel = &self.models[m];
                let w = self.weight_of(m);
                let t0 = model.entry.0.max(0);
                for i in 0..eb.len() {
                    let t = t0 + i as i64;
                    if t >= model.exit.1 {
                        break;
                    }
                    if t >= model.entry.1 && t < model.exit.0 {
                        constant += w;
                        continue;
                    }
                    let act = self.fresh();
                    self.sat.add_clause([-eb[i], xb[i], act]);
                    for _ in 0..w {
                        inputs.push(act);
                    }
                }
            }
            self.chains = Some(chains);
            let cap_var = (cap - constant + 1).clamp(1, inputs.len().max(1) as i64) as usize;
            let outs = self.totalizer(&inputs, cap_var);
            self.sum = Some((constant, outs));
        }
        let (constant, outs) = self.sum.as_ref().unwrap();
        let allowed = b - constant;
        if allowed < 0 {
            // unreachable bound: a contradiction under a fresh guard
            let g = self.fresh();
            self.sat.add_clause([-g]);
            return vec![g];
        }
        match outs.get(allowed as usize) {
            Some(&o) => vec![-o],
            None => vec![],
        }
    }

    fn weight_of(&self, m: usize) -> i64 {
        self.weights[m]
    }
}

fn sections_of(edges: &[crate::network::EdgeId], vss: &SectionPartition, ttd: &SectionPartition) -> (Vec<u32>, Vec<u32>) {
    let mut v: Vec<u32> = edges.iter().map(|&e| vss.section_of(e).0).collect();
    let mut t: Vec<u32> = edges.iter().map(|&e| ttd.section_of(e).0).collect();
    v.sort_unstable();
    v.dedup();
    t.sort_unstable();
    t.dedup();
    (v, t)
}
