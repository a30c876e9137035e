//! Construction of verification instances from monotone 3-SAT formulas
//! in which each variable occurs at most twice per polarity, plus the way
//! back from a schedule to a satisfying assignment.
//!
//! Every variable gets a five-vertex gadget with two parallel routes per
//! direction: through the station (shared by both directions) or around it
//! (one direction only). Clause trains cross all gadgets, positive clauses
//! left to right and negative ones right to left, and must all stand in the
//! station at the same moment; a train standing in gadget j marks the
//! variable with its polarity, and opposite polarities collide.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kinematics::Train;
use crate::network::{Border, EdgeId, NetworkBuilder, VertexId};
use crate::solver::{Certificate, ProblemInstance, RouteMode, SolverConfig};
use crate::timetable::{Station, Stop, TimeWindow, TimetableRequest};

/// Clauses of three literals; literal `v` is variable v (1-based), `-v` its
/// negation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotoneCnf {
    pub num_vars: usize,
    pub clauses: Vec<[i32; 3]>,
}

impl fmt::Display for MonotoneCnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p cnf {} {}", self.num_vars, self.clauses.len())?;
        for c in &self.clauses {
            writeln!(f, "{} {} {} 0", c[0], c[1], c[2])?;
        }
        Ok(())
    }
}

impl MonotoneCnf {
    pub fn is_positive(clause: &[i32; 3]) -> bool {
        clause[0] > 0
    }

    pub fn evaluate(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter().any(|&l| {
                let v = assignment[l.unsigned_abs() as usize - 1];
                if l > 0 {
                    v
                } else {
                    !v
                }
            })
        })
    }
}

/// Structural problems: literal range and polarity per clause.
fn structure_issues(cnf: &MonotoneCnf) -> Vec<String> {
    let mut out = Vec::new();
    for (i, c) in cnf.clauses.iter().enumerate() {
        if c.iter().any(|&l| l == 0 || l.unsigned_abs() as usize > cnf.num_vars) {
            out.push(format!("clause {}: literal out of range", i + 1));
        } else if !(c.iter().all(|&l| l > 0) || c.iter().all(|&l| l < 0)) {
            out.push(format!("clause {}: mixed polarity", i + 1));
        }
    }
    out
}

/// Every violated restriction, with 1-based clause indices.
pub fn monotone_issues(cnf: &MonotoneCnf) -> Vec<String> {
    let mut out = structure_issues(cnf);
    for (i, c) in cnf.clauses.iter().enumerate() {
        let vars: BTreeSet<u32> = c.iter().map(|l| l.unsigned_abs()).collect();
        if vars.len() != 3 {
            out.push(format!("clause {}: repeated variable", i + 1));
        }
    }
    let mut pos = vec![0usize; cnf.num_vars + 1];
    let mut neg = vec![0usize; cnf.num_vars + 1];
    for (i, c) in cnf.clauses.iter().enumerate() {
        for &l in c {
            let v = l.unsigned_abs() as usize;
            if v == 0 || v > cnf.num_vars {
                continue;
            }
            let count = if l > 0 { &mut pos[v] } else { &mut neg[v] };
            *count += 1;
            if *count == 3 {
                let sign = if l > 0 { "" } else { "-" };
                out.push(format!("clause {}: third occurrence of literal {sign}{v}", i + 1));
            }
        }
    }
    out
}

pub fn validate_monotone(cnf: &MonotoneCnf) -> bool {
    monotone_issues(cnf).is_empty()
}

/// Parses DIMACS CNF. Every clause must have exactly three literals.
pub fn parse_dimacs(text: &str) -> Result<MonotoneCnf> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut cur: Vec<i32> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if header.is_some() || parts.len() != 4 || parts[1] != "cnf" {
                return Err(Error::Format(format!("line {}: bad header", ln + 1)));
            }
            let n = parts[2].parse().map_err(|_| Error::Format(format!("line {}: bad variable count", ln + 1)))?;
            let m = parts[3].parse().map_err(|_| Error::Format(format!("line {}: bad clause count", ln + 1)))?;
            header = Some((n, m));
            continue;
        }
        if header.is_none() {
            return Err(Error::Format(format!("line {}: clause before header", ln + 1)));
        }
        for tok in line.split_whitespace() {
            let l: i32 = tok.parse().map_err(|_| Error::Format(format!("line {}: bad literal {tok}", ln + 1)))?;
            if l == 0 {
                let idx = clauses.len() + 1;
                let c: [i32; 3] = cur
                    .as_slice()
                    .try_into()
                    .map_err(|_| Error::InvalidFormula(format!("clause {idx}: {} literals, expected 3", cur.len())))?;
                clauses.push(c);
                cur.clear();
            } else {
                cur.push(l);
            }
        }
    }
    let (n, m) = header.ok_or_else(|| Error::Format("missing header".into()))?;
    if !cur.is_empty() {
        return Err(Error::Format(format!("clause {}: missing terminating 0", clauses.len() + 1)));
    }
    if clauses.len() != m {
        return Err(Error::Format(format!("header announces {m} clauses, found {}", clauses.len())));
    }
    let cnf = MonotoneCnf { num_vars: n, clauses };
    let issues = structure_issues(&cnf);
    if !issues.is_empty() {
        return Err(Error::InvalidFormula(issues.join("; ")));
    }
    Ok(cnf)
}

/// The constructed instance plus the gadget edges used to read back an
/// assignment.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub instance: ProblemInstance,
    /// Route length T_n = 4(n+1) edges.
    pub route_len: usize,
    /// Per variable: the two station edges a positive clause train uses.
    pub true_edges: Vec<[EdgeId; 2]>,
    /// Per variable: the two station edges a negative clause train uses.
    pub false_edges: Vec<[EdgeId; 2]>,
    /// Step at which positions are read.
    pub read_step: i64,
}

/// Builds the instance for any formula with three same-polarity literals
/// per clause; occurrence bounds are not checked (see [`reduce_sat`]).
pub fn build_reduction(cnf: &MonotoneCnf) -> Result<Reduction> {
    let issues = structure_issues(cnf);
    if !issues.is_empty() {
        return Err(Error::InvalidFormula(issues.join("; ")));
    }
    let n = cnf.num_vars;
    let m = cnf.clauses.len();
    let mut b = NetworkBuilder::new();
    let mut c_in = Vec::new();
    let mut c_out = Vec::new();
    for i in 1..=m {
        c_in.push(b.boundary(&format!("c{i}_in"), 0));
        c_out.push(b.boundary(&format!("c{i}_out"), 0));
    }
    let x0 = b.vertex("x0", Border::Ttd);
    let xn1 = b.vertex(&format!("x{}", n + 1), Border::Ttd);
    // gadget vertices [1, 2l, 2, 2r, 3] per variable
    let mut g: Vec<[VertexId; 5]> = Vec::new();
    for j in 1..=n {
        let names = ["1", "2l", "2", "2r", "3"];
        let vs: Vec<VertexId> = names.iter().map(|s| b.vertex(&format!("x{j}_{s}"), Border::Ttd)).collect();
        g.push(vs.try_into().unwrap());
    }
    let mut conn_l = Vec::new();
    let mut conn_r = Vec::new();
    for j in 0..=n {
        conn_l.push(b.vertex(&format!("x{j},{}_l", j + 1), Border::Ttd));
        conn_r.push(b.vertex(&format!("x{j},{}_r", j + 1), Border::Ttd));
    }
    let unit = 1000;
    let link = |b: &mut NetworkBuilder, s: VertexId, t: VertexId| {
        let name = format!("{}-{}", b.vertex_name(s), b.vertex_name(t));
        b.edge(&name, s, t, unit)
    };
    let mut clause_edges = Vec::new();
    for (i, c) in cnf.clauses.iter().enumerate() {
        let (first, last) = if MonotoneCnf::is_positive(c) { (x0, xn1) } else { (xn1, x0) };
        clause_edges.push((link(&mut b, c_in[i], first), link(&mut b, last, c_out[i])));
    }
    let x3 = |j: usize| if j == 0 { x0 } else { g[j - 1][4] };
    let x1 = |j: usize| if j == n + 1 { xn1 } else { g[j - 1][0] };
    let mut gadget = Vec::new();
    for &[v1, v2l, v2, v2r, v3] in &g {
        let e_1_2r = link(&mut b, v1, v2r);
        let e_2r_3 = link(&mut b, v2r, v3);
        let e_3_2l = link(&mut b, v3, v2l);
        let e_2l_1 = link(&mut b, v2l, v1);
        let e_1_2 = link(&mut b, v1, v2);
        let e_2_3 = link(&mut b, v2, v3);
        let e_3_2 = link(&mut b, v3, v2);
        let e_2_1 = link(&mut b, v2, v1);
        b.pair(e_1_2, e_2_1);
        b.pair(e_2_3, e_3_2);
        gadget.push([e_1_2r, e_2r_3, e_3_2l, e_2l_1, e_1_2, e_2_3, e_3_2, e_2_1]);
    }
    let mut right = Vec::new();
    let mut left = Vec::new();
    for j in 0..=n {
        let e1 = link(&mut b, x3(j), conn_r[j]);
        let e2 = link(&mut b, conn_r[j], x1(j + 1));
        let e3 = link(&mut b, x1(j + 1), conn_l[j]);
        let e4 = link(&mut b, conn_l[j], x3(j));
        right.push((e1, e2));
        left.push((e3, e4));
    }
    b.allow_everything();
    let network = b.build();

    let t_n = 4 * (n + 1);
    let mut station = BTreeSet::new();
    for ge in &gadget {
        station.extend(ge[4..8].iter().copied());
    }
    let true_edges = gadget.iter().map(|ge| [ge[4], ge[5]]).collect();
    let false_edges = gadget.iter().map(|ge| [ge[6], ge[7]]).collect();
    let mt = (m * t_n) as i64;
    let sec = 1000;
    let mut trains = Vec::new();
    let mut requests = Vec::new();
    for (i, c) in cnf.clauses.iter().enumerate() {
        let vars: BTreeSet<usize> = c.iter().map(|l| l.unsigned_abs() as usize).collect();
        let mut route = vec![clause_edges[i].0];
        if MonotoneCnf::is_positive(c) {
            route.push(right[0].0);
            for j in 1..=n {
                route.push(right[j - 1].1);
                let ge = &gadget[j - 1];
                if vars.contains(&j) {
                    route.extend([ge[4], ge[5]]);
                } else {
                    route.extend([ge[0], ge[1]]);
                }
                route.push(right[j].0);
            }
            route.push(right[n].1);
        } else {
            route.push(left[n].0);
            for j in (1..=n).rev() {
                route.push(left[j].1);
                let ge = &gadget[j - 1];
                if vars.contains(&j) {
                    route.extend([ge[6], ge[7]]);
                } else {
                    route.extend([ge[2], ge[3]]);
                }
                route.push(left[j - 1].0);
            }
            route.push(left[0].1);
        }
        route.push(clause_edges[i].1);
        debug_assert_eq!(route.len(), t_n);
        trains.push(Train {
            name: format!("tr{}", i + 1),
            length_mm: unit,
            v_max_mm_s: unit,
            accel_mm_s2: unit,
            decel_mm_s2: unit,
            tim: true,
        });
        requests.push(TimetableRequest {
            train: i,
            entry: c_in[i],
            entry_window: TimeWindow::at(0),
            exit: c_out[i],
            exit_window: TimeWindow::at((2 * mt + 6) * sec),
            stops: vec![Stop {
                station: 0,
                arrival: TimeWindow::new(0, (mt + 4) * sec),
                departure: TimeWindow::new((mt + 6) * sec, (2 * mt + 6) * sec),
                min_dwell_ms: 2 * sec,
            }],
            route: Some(route),
            weight: 1,
            optional: false,
        });
    }
    let instance = ProblemInstance {
        network,
        stations: vec![Station { name: "S".into(), edges: station }],
        trains,
        requests,
        k_max: None,
        config: SolverConfig { dt_ms: sec, grid_mm: unit, route_mode: RouteMode::Fixed, ..SolverConfig::default() },
    };
    Ok(Reduction { instance, route_len: t_n, true_edges, false_edges, read_step: mt + 5 })
}

/// Validates the formula and builds the verification instance.
pub fn reduce_sat(cnf: &MonotoneCnf) -> Result<ProblemInstance> {
    let issues = monotone_issues(cnf);
    if !issues.is_empty() {
        return Err(Error::InvalidFormula(issues.join("; ")));
    }
    Ok(build_reduction(cnf)?.instance)
}

/// Reads an assignment off a schedule of the reduced instance: a variable
/// is true if a train occupies one of its positive station edges at the
/// read step and false if one occupies a negative one; untouched variables
/// are false. The result is checked against the formula.
pub fn extract_assignment(cert: &Certificate, cnf: &MonotoneCnf) -> Result<Vec<bool>> {
    let red = build_reduction(cnf)?;
    if !cert.operators.is_empty() {
        return Err(Error::NotApplicable("certificate changes the layout".into()));
    }
    let t = red.read_step * red.instance.config.dt_ms;
    let mut value: Vec<Option<bool>> = vec![None; cnf.num_vars];
    for tl in &cert.timelines {
        let Some(state) = tl.at(t) else { continue };
        for e in state.range.edges() {
            for j in 0..cnf.num_vars {
                let v = if red.true_edges[j].contains(&e) {
                    true
                } else if red.false_edges[j].contains(&e) {
                    false
                } else {
                    continue;
                };
                match value[j] {
                    Some(w) if w != v => {
                        return Err(Error::NotApplicable(format!("variable {} read with both polarities", j + 1)))
                    }
                    _ => value[j] = Some(v),
                }
            }
        }
    }
    let assignment: Vec<bool> = value.into_iter().map(|v| v.unwrap_or(false)).collect();
    if !cnf.evaluate(&assignment) {
        return Err(Error::Internal("extracted assignment does not satisfy the formula".into()));
    }
    Ok(assignment)
}

pub const BRUTE_FORCE_MAX_VARS: usize = 24;

/// Lowest satisfying assignment in binary order (x1 is the lowest bit).
pub fn brute_force_assignment(cnf: &MonotoneCnf) -> Result<Option<Vec<bool>>> {
    let n = cnf.num_vars;
    if n > BRUTE_FORCE_MAX_VARS {
        return Err(Error::CapsExceeded(format!("{n} variables, at most {BRUTE_FORCE_MAX_VARS}")));
    }
    let decode = |bits: u32| (0..n).map(|i| bits >> i & 1 == 1).collect::<Vec<bool>>();
    let found = (0..1u32 << n).into_par_iter().find_first(|&bits| cnf.evaluate(&decode(bits)));
    Ok(found.map(decode))
}

pub fn brute_force_sat(cnf: &MonotoneCnf) -> Result<bool> {
    Ok(brute_force_assignment(cnf)?.is_some())
}
