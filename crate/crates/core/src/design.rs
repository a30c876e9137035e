//! Layout design: minimal VSS generation, travel-time optimization and
//! capacity maximization under an operator budget.
//!
//! The search space is a finite set of candidate cuts on breakable edges.
//! Layouts are explored in a fixed order (by size, then lexicographically
//! over candidate indices) and evaluated in parallel chunks; the first
//! qualifying layout in that order wins, so results do not depend on the
//! number of worker threads.

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::EdgeId;
use crate::operator::{is_unbreakable, normalize_cut, Cut, VssOperator};
use crate::solver::{capacity, optimize, verify, Certificate, Objective, ProblemInstance, Verdict};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignConfig {
    /// Spacing of candidate cuts; defaults to the position grid.
    pub stride_mm: Option<i64>,
    /// Stop at the first feasible layout found by greedy thinning instead
    /// of searching for a minimum.
    pub slack: bool,
    /// Largest operator count tried by generation; defaults to the number
    /// of candidates.
    pub max_operators: Option<usize>,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig { stride_mm: None, slack: false, max_operators: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignSolution {
    /// Cuts on edges of the input network.
    pub cuts: Vec<Cut>,
    /// The same cuts as operators on the evolving network.
    pub operators: Vec<VssOperator>,
    /// Certificate whose operators are `operators`; timelines refer to the
    /// transformed network.
    pub certificate: Certificate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DesignVerdict {
    Solution(DesignSolution),
    Infeasible,
    /// Generation gave up at the operator cap without deciding.
    CapReached { cap: usize },
    ResourceLimit(String),
}

impl DesignVerdict {
    pub fn solution(&self) -> Option<&DesignSolution> {
        match self {
            DesignVerdict::Solution(s) => Some(s),
            _ => None,
        }
    }
}

/// Candidate cuts: every `stride` mm along breakable edges, plus cuts at
/// one train length from either end. Each reverse pair is listed once (on
/// its lower edge id). Station edges come first, then ascending edge id
/// and offset.
pub fn candidate_cuts(inst: &ProblemInstance, stride_mm: i64) -> Vec<Cut> {
    let net = &inst.network;
    let station_edges: BTreeSet<EdgeId> = inst.stations.iter().flat_map(|s| s.edges.iter().copied()).collect();
    let lengths: BTreeSet<i64> = inst.trains.iter().map(|t| t.length_mm).collect();
    let mut cuts: BTreeSet<(bool, Cut)> = BTreeSet::new();
    for e in net.edge_ids() {
        if net.reverse(e).is_some_and(|r| r < e) || is_unbreakable(net, e) {
            continue;
        }
        let len = net.length(e);
        let in_station = station_edges.contains(&e) || net.reverse(e).is_some_and(|r| station_edges.contains(&r));
        let mut offsets: BTreeSet<i64> = (1..).map(|i| i * stride_mm).take_while(|&o| o < len).collect();
        for &l in &lengths {
            offsets.insert(l);
            offsets.insert(len - l);
        }
        for o in offsets {
            if o > 0 && o < len {
                cuts.insert((!in_station, normalize_cut(net, Cut { edge: e, offset_mm: o })));
            }
        }
    }
    cuts.into_iter().map(|(_, c)| c).collect()
}

/// Lexicographic k-subsets of 0..n.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations { n, idx: (0..k).collect(), done: k > n }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Layouts of size 0..=kmax in search order.
fn layouts(n: usize, kmax: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..=kmax.min(n)).flat_map(move |k| Combinations::new(n, k))
}

fn chunk_size() -> usize {
    rayon::current_num_threads().max(1) * 2
}

/// Verdicts of `verify` keyed by the sorted cut set.
#[derive(Default)]
struct Memo {
    seen: Mutex<HashMap<Vec<Cut>, Verdict>>,
}

impl Memo {
    fn verify(&self, inst: &ProblemInstance, cuts: &[Cut]) -> Result<(Verdict, Vec<VssOperator>)> {
        let mut key = cuts.to_vec();
        key.sort();
        let (applied, ops) = inst.apply_cuts(&key)?;
        if let Some(v) = self.seen.lock().unwrap().get(&key) {
            return Ok((v.clone(), ops));
        }
        let v = verify(&applied)?;
        self.seen.lock().unwrap().insert(key, v.clone());
        Ok((v, ops))
    }
}

fn solution(mut cuts: Vec<Cut>, ops: Vec<VssOperator>, mut cert: Certificate) -> DesignSolution {
    cuts.sort();
    cert.objective.operator_count = ops.len();
    cert.operators = ops.clone();
    DesignSolution { cuts, operators: ops, certificate: cert }
}

/// Smallest set of candidate cuts that makes the instance feasible.
pub fn generate_vss(inst: &ProblemInstance, cfg: &DesignConfig) -> Result<DesignVerdict> {
    let memo = Memo::default();
    match memo.verify(inst, &[])? {
        (Verdict::Feasible(c), ops) => return Ok(DesignVerdict::Solution(solution(vec![], ops, c))),
        (Verdict::ResourceLimit(m), _) => return Ok(DesignVerdict::ResourceLimit(m)),
        (Verdict::Infeasible, _) => {}
    }
    let cands = candidate_cuts(inst, cfg.stride_mm.unwrap_or(inst.config.grid_mm));
    if cands.is_empty() {
        return Ok(DesignVerdict::Infeasible);
    }
    let cap = cfg.max_operators.unwrap_or(cands.len()).min(cands.len());
    if !cfg.slack {
        if let Some(v) = search_size(inst, &memo, &cands, 1.min(cap))? {
            return Ok(v);
        }
    }
    // adding borders never hurts, so full refinement decides feasibility
    match memo.verify(inst, &cands)? {
        (Verdict::Infeasible, _) => return Ok(DesignVerdict::Infeasible),
        (Verdict::ResourceLimit(m), _) => return Ok(DesignVerdict::ResourceLimit(m)),
        (Verdict::Feasible(c), ops) => {
            if cfg.slack {
                return thin_out(inst, &memo, cands, ops, c);
            }
        }
    }
    for k in 2..=cap {
        if let Some(v) = search_size(inst, &memo, &cands, k)? {
            return Ok(v);
        }
    }
    Ok(DesignVerdict::CapReached { cap })
}

/// First feasible layout of exactly `k` candidate cuts, in lexicographic
/// order.
fn search_size(inst: &ProblemInstance, memo: &Memo, cands: &[Cut], k: usize) -> Result<Option<DesignVerdict>> {
    if k == 0 {
        return Ok(None);
    }
    let mut combos = Combinations::new(cands.len(), k).peekable();
    while combos.peek().is_some() {
        let chunk: Vec<Vec<usize>> = combos.by_ref().take(chunk_size()).collect();
        let results: Vec<Result<(Verdict, Vec<VssOperator>)>> = chunk
            .par_iter()
            .map(|c| {
                let cuts: Vec<Cut> = c.iter().map(|&i| cands[i]).collect();
                memo.verify(inst, &cuts)
            })
            .collect();
        for (c, r) in chunk.iter().zip(results) {
            match r? {
                (Verdict::Feasible(cert), ops) => {
                    let cuts = c.iter().map(|&i| cands[i]).collect();
                    return Ok(Some(DesignVerdict::Solution(solution(cuts, ops, cert))));
                }
                (Verdict::ResourceLimit(m), _) => return Ok(Some(DesignVerdict::ResourceLimit(m))),
                (Verdict::Infeasible, _) => {}
            }
        }
    }
    Ok(None)
}

/// Greedily drops cuts from a feasible set, last candidate first.
fn thin_out(
    inst: &ProblemInstance,
    memo: &Memo,
    mut keep: Vec<Cut>,
    mut ops: Vec<VssOperator>,
    mut cert: Certificate,
) -> Result<DesignVerdict> {
    let mut i = keep.len();
    while i > 0 {
        i -= 1;
        let mut trial = keep.clone();
        trial.remove(i);
        match memo.verify(inst, &trial)? {
            (Verdict::Feasible(c), o) => {
                keep = trial;
                ops = o;
                cert = c;
            }
            (Verdict::ResourceLimit(m), _) => return Ok(DesignVerdict::ResourceLimit(m)),
            (Verdict::Infeasible, _) => {}
        }
    }
    Ok(DesignVerdict::Solution(solution(keep, ops, cert)))
}

fn budget(inst: &ProblemInstance) -> Result<usize> {
    inst.k_max.ok_or_else(|| Error::InvalidInstance(vec!["operator budget k_max is not set".into()]))
}

fn objective_value(c: &Certificate, objective: Objective) -> i64 {
    match objective {
        Objective::WeightedSum => c.objective.travel_sum_ms,
        Objective::MaxTravel => c.objective.travel_max_ms,
    }
}

/// Best travel-time objective over all layouts with at most `k_max`
/// candidate cuts. Ties go to fewer cuts, then to the earlier layout.
pub fn optimize_schedule(inst: &ProblemInstance, objective: Objective, cfg: &DesignConfig) -> Result<DesignVerdict> {
    let kmax = budget(inst)?;
    let cands = if kmax == 0 { vec![] } else { candidate_cuts(inst, cfg.stride_mm.unwrap_or(inst.config.grid_mm)) };
    // every layout is a coarsening of full refinement, which therefore
    // bounds the reachable objective
    let (full, _) = inst.apply_cuts(&cands)?;
    let lower = match optimize(&full, objective)? {
        Verdict::Feasible(c) => objective_value(&c, objective),
        Verdict::Infeasible => return Ok(DesignVerdict::Infeasible),
        Verdict::ResourceLimit(m) => return Ok(DesignVerdict::ResourceLimit(m)),
    };
    let mut best: Option<(i64, DesignSolution)> = None;
    let mut all = layouts(cands.len(), kmax).peekable();
    while all.peek().is_some() {
        let chunk: Vec<Vec<usize>> = all.by_ref().take(chunk_size()).collect();
        let results: Vec<Result<(Verdict, Vec<VssOperator>)>> = chunk
            .par_iter()
            .map(|c| {
                let cuts: Vec<Cut> = c.iter().map(|&i| cands[i]).collect();
                let (applied, ops) = inst.apply_cuts(&cuts)?;
                Ok((optimize(&applied, objective)?, ops))
            })
            .collect();
        for (c, r) in chunk.iter().zip(results) {
            match r? {
                (Verdict::Feasible(cert), ops) => {
                    let v = objective_value(&cert, objective);
                    if best.as_ref().map_or(true, |(b, _)| v < *b) {
                        let cuts = c.iter().map(|&i| cands[i]).collect();
                        best = Some((v, solution(cuts, ops, cert)));
                    }
                }
                (Verdict::ResourceLimit(m), _) => return Ok(DesignVerdict::ResourceLimit(m)),
                (Verdict::Infeasible, _) => {}
            }
        }
        if best.as_ref().is_some_and(|(b, _)| *b == lower) {
            break;
        }
    }
    Ok(best.map_or(DesignVerdict::Infeasible, |(_, s)| DesignVerdict::Solution(s)))
}

/// Largest set of optional trains that can be added to the mandatory ones
/// with at most `k_max` candidate cuts. Ties go to the lexicographically
/// smallest set, then to fewer cuts, then to the earlier layout.
pub fn maximize_capacity(inst: &ProblemInstance, cfg: &DesignConfig) -> Result<DesignVerdict> {
    let kmax = budget(inst)?;
    let cands = if kmax == 0 { vec![] } else { candidate_cuts(inst, cfg.stride_mm.unwrap_or(inst.config.grid_mm)) };
    // no layout routes a set that full refinement cannot route, and the
    // full refinement's answer is the smallest of its largest sets
    let (full, _) = inst.apply_cuts(&cands)?;
    let target = match capacity(&full)? {
        Verdict::Feasible(c) => c.objective.routed_optional,
        Verdict::Infeasible => return Ok(DesignVerdict::Infeasible),
        Verdict::ResourceLimit(m) => return Ok(DesignVerdict::ResourceLimit(m)),
    };
    let mut best: Option<DesignSolution> = None;
    let better = |a: &DesignSolution, b: &DesignSolution| {
        let (ra, rb) = (&a.certificate.objective.routed_optional, &b.certificate.objective.routed_optional);
        (rb.len(), ra, a.cuts.len()) < (ra.len(), rb, b.cuts.len())
    };
    let mut all = layouts(cands.len(), kmax).peekable();
    while all.peek().is_some() {
        let chunk: Vec<Vec<usize>> = all.by_ref().take(chunk_size()).collect();
        let results: Vec<Result<(Verdict, Vec<VssOperator>)>> = chunk
            .par_iter()
            .map(|c| {
                let cuts: Vec<Cut> = c.iter().map(|&i| cands[i]).collect();
                let (applied, ops) = inst.apply_cuts(&cuts)?;
                Ok((capacity(&applied)?, ops))
            })
            .collect();
        for (c, r) in chunk.iter().zip(results) {
            match r? {
                (Verdict::Feasible(cert), ops) => {
                    let s = solution(c.iter().map(|&i| cands[i]).collect(), ops, cert);
                    if best.as_ref().map_or(true, |b| better(&s, b)) {
                        best = Some(s);
                    }
                }
                (Verdict::ResourceLimit(m), _) => return Ok(DesignVerdict::ResourceLimit(m)),
                (Verdict::Infeasible, _) => {}
            }
        }
        if best.as_ref().is_some_and(|b| b.certificate.objective.routed_optional == target) {
            break;
        }
    }
    Ok(best.map_or(DesignVerdict::Infeasible, DesignVerdict::Solution))
}
