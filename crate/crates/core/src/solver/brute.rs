//! Exhaustive breadth-first search over joint discrete states. Meant as an
//! oracle for tiny instances; shares the motion model with the SAT search
//! but none of the encoding.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kinematics::{RouteTimeline, Sample};
use crate::sections::{derive_sections, Level, SectionPartition};

use super::graph;
use super::model::{Next, RunState, TrainModel};
use super::{finish, headway_conflict, ProblemInstance, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BruteCaps {
    pub max_trains: usize,
    /// Distinct discrete states per train, ignoring time.
    pub max_states: usize,
    pub max_horizon_steps: i64,
}

impl Default for BruteCaps {
    fn default() -> Self {
        BruteCaps { max_trains: 3, max_states: 30, max_horizon_steps: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Local {
    Pending,
    Run(RunState),
    Exit { route: u16, k: u16 },
    Gone,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Joint {
    locals: Vec<Local>,
    entered: Vec<Option<i64>>,
    exited: Vec<Option<i64>>,
    /// Touched VSS sections of the current TTD episodes (non-TIM only).
    hist: Vec<Vec<u32>>,
}

struct Ctx<'a> {
    inst: &'a ProblemInstance,
    models: Vec<TrainModel>,
    vss: SectionPartition,
    ttd: SectionPartition,
}

impl Ctx<'_> {
    fn sections(&self, i: usize, l: &Local) -> Option<(Vec<u32>, Vec<u32>)> {
        let m = &self.models[i];
        let (route, span) = match *l {
            Local::Run(s) => (s.route, m.span(s.route, s.x, s.k)),
            Local::Exit { route, .. } => (route, m.exit_span(route)),
            _ => return None,
        };
        let mut v: Vec<u32> = m.edges_of(route, span).iter().map(|&e| self.vss.section_of(e).0).collect();
        let mut t: Vec<u32> = m.edges_of(route, span).iter().map(|&e| self.ttd.section_of(e).0).collect();
        v.sort_unstable();
        v.dedup();
        t.sort_unstable();
        t.dedup();
        Some((v, t))
    }

    fn options(&self, i: usize, t: i64, l: &Local) -> Vec<Local> {
        let m = &self.models[i];
        match *l {
            Local::Pending => {
                let mut out = Vec::new();
                if t + 1 <= m.entry.1 {
                    out.push(Local::Pending);
                }
                let mut es = Vec::new();
                m.entries(t + 1, &mut es);
                out.extend(es.into_iter().map(Local::Run));
                out
            }
            Local::Run(s) => {
                let mut nx = Vec::new();
                m.successors(t, &s, &mut nx);
                nx.into_iter()
                    .map(|n| match n {
                        Next::Run(s2) => Local::Run(s2),
                        Next::Exit { route, k } => Local::Exit { route, k },
                    })
                    .collect()
            }
            Local::Exit { .. } | Local::Gone => vec![Local::Gone],
        }
    }

    /// Builds the joint state at `t` from the chosen locals, or `None` if
    /// it breaks the VSS condition or a headway.
    fn combine(&self, prev: &Joint, locals: Vec<Local>, t: i64) -> Option<Joint> {
        let n = locals.len();
        let occ: Vec<Option<(Vec<u32>, Vec<u32>)>> = (0..n).map(|i| self.sections(i, &locals[i])).collect();
        for a in 0..n {
            for b in a + 1..n {
                if let (Some((va, _)), Some((vb, _))) = (&occ[a], &occ[b]) {
                    if va.iter().any(|v| vb.contains(v)) {
                        return None;
                    }
                }
            }
        }
        let mut entered = prev.entered.clone();
        let mut exited = prev.exited.clone();
        let net = &self.inst.network;
        let dt = self.inst.config.dt_ms;
        for i in 0..n {
            let req = &self.inst.requests[self.models[i].train];
            if prev.locals[i] == Local::Pending && matches!(locals[i], Local::Run(_)) {
                for j in 0..n {
                    if let Some(tj) = entered[j] {
                        let rj = &self.inst.requests[self.models[j].train];
                        if rj.entry == req.entry && headway_conflict(net.headway_ms(req.entry), tj * dt, t * dt) {
                            return None;
                        }
                    }
                }
                entered[i] = Some(t);
            }
            if matches!(locals[i], Local::Exit { .. }) {
                for j in 0..n {
                    if let Some(tj) = exited[j] {
                        let rj = &self.inst.requests[self.models[j].train];
                        if rj.exit == req.exit && headway_conflict(net.headway_ms(req.exit), tj * dt, t * dt) {
                            return None;
                        }
                    }
                }
                exited[i] = Some(t);
            }
        }
        let mut hist = prev.hist.clone();
        for i in 0..n {
            if self.inst.trains[self.models[i].train].tim {
                continue;
            }
            let present_before = matches!(prev.locals[i], Local::Run(_) | Local::Exit { .. });
            match &occ[i] {
                None => hist[i].clear(),
                Some((vs, ts)) => {
                    if present_before {
                        hist[i].retain(|&v| ts.contains(&self.ttd_of(v)));
                    } else {
                        hist[i].clear();
                    }
                    for &v in vs {
                        if !hist[i].contains(&v) {
                            hist[i].push(v);
                        }
                    }
                    hist[i].sort_unstable();
                }
            }
        }
        for i in 0..n {
            let Some((mine, _)) = &occ[i] else { continue };
            for &v in &hist[i] {
                if mine.contains(&v) {
                    continue;
                }
                for (j, o) in occ.iter().enumerate() {
                    if j != i && o.as_ref().is_some_and(|(vs, _)| vs.contains(&v)) {
                        return None;
                    }
                }
            }
        }
        Some(Joint { locals, entered, exited, hist })
    }

    fn ttd_of(&self, v: u32) -> u32 {
        self.ttd.section_of(self.vss.edges(crate::sections::SectionId(v))[0]).0
    }
}

/// Decides verification by enumerating joint states step by step. Only
/// mandatory trains are considered.
pub fn brute_force_verify(inst: &ProblemInstance, caps: BruteCaps) -> Result<Verdict> {
    inst.validate()?;
    let ids = inst.mandatory();
    if ids.is_empty() {
        return Ok(Verdict::Feasible(finish(inst, vec![])?));
    }
    if ids.len() > caps.max_trains {
        return Err(Error::CapsExceeded(format!("{} trains, at most {}", ids.len(), caps.max_trains)));
    }
    let horizon = ids.iter().map(|&i| inst.requests[i].exit_window.hi_ms.div_euclid(inst.config.dt_ms)).max().unwrap();
    if horizon > caps.max_horizon_steps {
        return Err(Error::CapsExceeded(format!("horizon of {horizon} steps, at most {}", caps.max_horizon_steps)));
    }
    let mut models = Vec::new();
    for &i in &ids {
        let m = TrainModel::new(i, &inst.trains[i], &inst.requests[i], inst.routes_for(i)?, &inst.network, &inst.stations, &inst.config);
        let g = graph::build(&m, horizon, usize::MAX).expect("no node limit");
        if g.distinct_states() > caps.max_states {
            return Err(Error::CapsExceeded(format!(
                "train {} has {} discrete states, at most {}",
                inst.trains[i].name,
                g.distinct_states(),
                caps.max_states
            )));
        }
        models.push(m);
    }
    let n = models.len();
    let ctx = Ctx {
        inst,
        models,
        vss: derive_sections(&inst.network, Level::Vss),
        ttd: derive_sections(&inst.network, Level::Ttd),
    };
    let start = Joint { locals: vec![Local::Pending; n], entered: vec![None; n], exited: vec![None; n], hist: vec![vec![]; n] };
    // layers[k] holds states at time k - 1 with parent indices into layers[k - 1]
    let mut layers: Vec<Vec<(Joint, usize)>> = vec![vec![(start, 0)]];
    let mut t = -1i64;
    while t < horizon {
        let cur = layers.last().unwrap();
        let mut next: BTreeMap<Joint, usize> = BTreeMap::new();
        for (pi, (j, _)) in cur.iter().enumerate() {
            let opts: Vec<Vec<Local>> = (0..n).map(|i| ctx.options(i, t, &j.locals[i])).collect();
            if opts.iter().any(|o| o.is_empty()) {
                continue;
            }
            let mut idx = vec![0usize; n];
            loop {
                let locals: Vec<Local> = (0..n).map(|i| opts[i][idx[i]]).collect();
                if let Some(j2) = ctx.combine(j, locals, t + 1) {
                    next.entry(j2).or_insert(pi);
                }
                let mut d = 0;
                while d < n {
                    idx[d] += 1;
                    if idx[d] < opts[d].len() {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
                if d == n {
                    break;
                }
            }
        }
        t += 1;
        let layer: Vec<(Joint, usize)> = next.into_iter().collect();
        if layer.is_empty() {
            return Ok(Verdict::Infeasible);
        }
        let goal = layer.iter().position(|(j, _)| j.locals.iter().all(|l| matches!(l, Local::Exit { .. } | Local::Gone)));
        layers.push(layer);
        if let Some(g) = goal {
            return Ok(Verdict::Feasible(finish(inst, reconstruct(&ctx, &layers, g))?));
        }
    }
    Ok(Verdict::Infeasible)
}

fn reconstruct(ctx: &Ctx, layers: &[Vec<(Joint, usize)>], goal: usize) -> Vec<RouteTimeline> {
    let n = ctx.models.len();
    let mut samples: Vec<Vec<Sample>> = vec![Vec::new(); n];
    let mut at = goal;
    for k in (1..layers.len()).rev() {
        let (j, parent) = &layers[k][at];
        let t = k as i64 - 1;
        for i in 0..n {
            let m = &ctx.models[i];
            let state = match j.locals[i] {
                Local::Run(s) => m.state(&s),
                Local::Exit { route, k } => m.exit_state(route, k),
                _ => continue,
            };
            samples[i].push(Sample { t_ms: t * m.dt_ms, state });
        }
        at = *parent;
    }
    samples
        .into_iter()
        .enumerate()
        .map(|(i, mut s)| {
            s.reverse();
            RouteTimeline { train: ctx.models[i].train, samples: s }
        })
        .collect()
}
