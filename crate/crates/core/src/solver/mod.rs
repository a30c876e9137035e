//! Timetable verification on a fixed layout.
//!
//! Every train is modelled on a time-expanded graph of discrete states
//! (see [`model`]); the joint problem is encoded into SAT and handed to
//! CaDiCaL. Feasible answers are decoded into timelines and re-checked by
//! the independent checkers before they leave this module.

mod brute;
mod encode;
mod graph;
pub(crate) mod model;
mod routes;

use std::fmt;

use rayon::prelude::*;

use crate::control::{check_vss_condition, ConflictRecord};
use crate::error::{Error, Result};
use crate::kinematics::{check_kinematics, BrakingModel, RouteTimeline, Train};
use crate::network::{EdgeId, RailwayNetwork};
use crate::operator::{apply_cuts, apply_operators, Cut, EdgeRefinement, VssOperator};
use crate::sections::{derive_sections, Level};
use crate::timetable::{check_timetable, Station, TimetableRequest, TimetableViolation};
use crate::kinematics::KinematicsViolation;

pub use brute::{brute_force_verify, BruteCaps};
pub use routes::{enumerate_routes, RouteEnumeration};

use encode::Encoder;
use graph::TrainGraph;
use model::TrainModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum RouteMode {
    /// Use the request's route, or the only route between its vertices.
    #[default]
    Fixed,
    /// Any enumerated simple route.
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt_ms: i64,
    pub grid_mm: i64,
    pub route_mode: RouteMode,
    pub max_routes: usize,
    /// Upper bound on graph nodes per train.
    pub node_limit: usize,
    pub conflict_limit: Option<i32>,
    /// Per SAT call.
    pub time_limit_s: Option<f32>,
    pub braking: BrakingModel,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt_ms: 1000,
            grid_mm: 1000,
            route_mode: RouteMode::Fixed,
            max_routes: 64,
            node_limit: 4_000_000,
            conflict_limit: None,
            time_limit_s: None,
            braking: BrakingModel::Quadratic,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub network: RailwayNetwork,
    pub stations: Vec<Station>,
    pub trains: Vec<Train>,
    /// `requests[i]` belongs to `trains[i]`.
    pub requests: Vec<TimetableRequest>,
    pub k_max: Option<usize>,
    pub config: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Objectives {
    /// Weighted sum of travel times of routed trains.
    pub travel_sum_ms: i64,
    pub travel_max_ms: i64,
    /// Optional trains with a timeline.
    pub routed_optional: Vec<usize>,
    pub operator_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub operators: Vec<VssOperator>,
    /// Sorted by train index.
    pub timelines: Vec<RouteTimeline>,
    pub objective: Objectives,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Feasible(Certificate),
    /// No solution at the configured discretization and route set.
    Infeasible,
    ResourceLimit(String),
}

impl Verdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Verdict::Feasible(_))
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            Verdict::Feasible(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    WeightedSum,
    MaxTravel,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CertificateReport {
    pub kinematics: Vec<KinematicsViolation>,
    pub timetable: Vec<TimetableViolation>,
    pub control: Vec<ConflictRecord>,
    /// Missing or duplicate trains, headway breaches.
    pub schedule: Vec<String>,
}

impl CertificateReport {
    pub fn is_ok(&self) -> bool {
        self.kinematics.is_empty() && self.timetable.is_empty() && self.control.is_empty() && self.schedule.is_empty()
    }

    pub fn violation_count(&self) -> usize {
        self.kinematics.len() + self.timetable.len() + self.control.len() + self.schedule.len()
    }
}

impl fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.kinematics {
            writeln!(f, "kinematics: {v}")?;
        }
        for v in &self.timetable {
            writeln!(f, "timetable: {v}")?;
        }
        for v in &self.control {
            writeln!(f, "vss: {v}")?;
        }
        for v in &self.schedule {
            writeln!(f, "schedule: {v}")?;
        }
        Ok(())
    }
}

/// Entries (or exits) at the same border vertex closer than the headway.
pub fn headway_conflict(headway_ms: i64, t1_ms: i64, t2_ms: i64) -> bool {
    (t1_ms - t2_ms).abs() < headway_ms
}

impl ProblemInstance {
    pub fn validate(&self) -> Result<()> {
        let mut issues: Vec<String> = Vec::new();
        let net = &self.network;
        issues.extend(net.validate().violations.iter().map(|v| v.to_string()));
        let cfg = &self.config;
        if cfg.dt_ms <= 0 || cfg.grid_mm <= 0 {
            issues.push("time step and position grid must be positive".into());
        } else if (cfg.grid_mm * 1000) % cfg.dt_ms != 0 {
            issues.push(format!("grid {} mm per step {} ms is not a whole speed in mm/s", cfg.grid_mm, cfg.dt_ms));
        }
        if self.requests.len() != self.trains.len() {
            issues.push(format!("{} trains but {} requests", self.trains.len(), self.requests.len()));
        }
        for s in &self.stations {
            if s.edges.iter().any(|&e| !net.has_edge(e)) {
                issues.push(format!("station {} references an unknown edge", s.name));
            }
        }
        for t in &self.trains {
            if !t.is_valid() {
                issues.push(format!("train {} needs positive length, speed, acceleration and deceleration", t.name));
            } else if cfg.dt_ms > 0 && cfg.grid_mm > 0 {
                let dt = cfg.dt_ms as i128;
                let g = cfg.grid_mm as i128;
                // one speed level is g/dt; below it the train never moves
                if (t.v_max_mm_s as i128) * dt < g * 1000 || (t.accel_mm_s2 as i128) * dt * dt < g * 1_000_000 {
                    issues.push(format!(
                        "train {} cannot reach one grid cell per step at dt {} ms and grid {} mm",
                        t.name, cfg.dt_ms, cfg.grid_mm
                    ));
                }
            }
        }
        for (i, r) in self.requests.iter().enumerate() {
            let name = self.trains.get(i).map_or_else(|| format!("#{i}"), |t| t.name.clone());
            if r.train != i {
                issues.push(format!("request {i} refers to train #{}", r.train));
            }
            for (what, v) in [("entry", r.entry), ("exit", r.exit)] {
                if v.idx() >= net.vertex_count() {
                    issues.push(format!("train {name}: unknown {what} vertex"));
                } else if !net.is_entry_exit(v) {
                    issues.push(format!("train {name}: {what} vertex {} is not a border vertex", net.vertex(v).name));
                }
            }
            if !r.entry_window.is_ordered() || !r.exit_window.is_ordered() {
                issues.push(format!("train {name}: empty entry or exit window"));
            }
            if r.weight < 0 {
                issues.push(format!("train {name}: negative weight"));
            }
            if r.stops.len() > 60 {
                issues.push(format!("train {name}: too many stops"));
            }
            for s in &r.stops {
                if s.station >= self.stations.len() {
                    issues.push(format!("train {name}: unknown station #{}", s.station));
                }
                if s.min_dwell_ms < 0 || !s.arrival.is_ordered() || !s.departure.is_ordered() {
                    issues.push(format!("train {name}: malformed stop"));
                }
            }
            if let Some(route) = &r.route {
                match net.is_valid_track_sequence(route) {
                    Ok(true) => {
                        if route.is_empty()
                            || net.source(route[0]) != r.entry
                            || net.target(*route.last().unwrap()) != r.exit
                        {
                            issues.push(format!("train {name}: route does not connect entry and exit"));
                        }
                    }
                    Ok(false) => issues.push(format!("train {name}: route is not a valid track sequence")),
                    Err(e) => issues.push(format!("train {name}: {e}")),
                }
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInstance(issues))
        }
    }

    pub fn mandatory(&self) -> Vec<usize> {
        (0..self.requests.len()).filter(|&i| !self.requests[i].optional).collect()
    }

    pub fn optional(&self) -> Vec<usize> {
        (0..self.requests.len()).filter(|&i| self.requests[i].optional).collect()
    }

    /// The instance on the network obtained by applying `ops` in order;
    /// explicit routes are refined accordingly.
    pub fn apply_operators(&self, ops: &[VssOperator]) -> Result<(ProblemInstance, EdgeRefinement)> {
        let applied = apply_operators(&self.network, &self.stations, ops)?;
        Ok((self.rebuilt(applied.network, applied.stations, &applied.refinement), applied.refinement))
    }

    /// Like [`apply_operators`](Self::apply_operators) with cut positions
    /// given on the original edges.
    pub fn apply_cuts(&self, cuts: &[Cut]) -> Result<(ProblemInstance, Vec<VssOperator>)> {
        let (applied, ops) = apply_cuts(&self.network, &self.stations, cuts)?;
        Ok((self.rebuilt(applied.network, applied.stations, &applied.refinement), ops))
    }

    fn rebuilt(&self, network: RailwayNetwork, stations: Vec<Station>, refinement: &EdgeRefinement) -> ProblemInstance {
        let mut requests = self.requests.clone();
        for r in &mut requests {
            if let Some(route) = &r.route {
                r.route = Some(refinement.refine_sequence(route));
            }
        }
        ProblemInstance {
            network,
            stations,
            trains: self.trains.clone(),
            requests,
            k_max: self.k_max,
            config: self.config.clone(),
        }
    }

    /// Candidate routes of train `i` under the configured route mode.
    pub fn routes_for(&self, i: usize) -> Result<Vec<Vec<EdgeId>>> {
        let req = &self.requests[i];
        if let Some(r) = &req.route {
            return Ok(vec![r.clone()]);
        }
        match self.config.route_mode {
            RouteMode::Free => Ok(enumerate_routes(&self.network, req, &self.stations, self.config.max_routes).routes),
            RouteMode::Fixed => {
                let en = enumerate_routes(&self.network, req, &self.stations, 2);
                match en.routes.len() {
                    0 => Ok(vec![]),
                    1 => Ok(en.routes),
                    _ => Err(Error::InvalidInstance(vec![format!(
                        "train {} has no fixed route and several candidates",
                        self.trains[i].name
                    )])),
                }
            }
        }
    }
}

/// Per-train models and graphs for a chosen set of trains.
pub(crate) struct Prepared {
    pub ids: Vec<usize>,
    pub models: Vec<TrainModel>,
    pub graphs: Vec<TrainGraph>,
}

pub(crate) enum Preparation {
    Ready(Prepared),
    /// A mandatory train has no discrete run at all.
    Infeasible,
    Limit(String),
}

pub(crate) fn prepare(inst: &ProblemInstance, ids: &[usize]) -> Result<Preparation> {
    inst.validate()?;
    let routes: Vec<Vec<Vec<EdgeId>>> = ids.iter().map(|&i| inst.routes_for(i)).collect::<Result<_>>()?;
    let horizon = ids.iter().map(|&i| inst.requests[i].exit_window.hi_ms.div_euclid(inst.config.dt_ms)).max().unwrap_or(0);
    let built: Vec<(TrainModel, std::result::Result<TrainGraph, graph::NodeLimit>)> = ids
        .par_iter()
        .zip(routes.into_par_iter())
        .map(|(&i, r)| {
            let m = TrainModel::new(i, &inst.trains[i], &inst.requests[i], r, &inst.network, &inst.stations, &inst.config);
            let g = graph::build(&m, horizon, inst.config.node_limit);
            (m, g)
        })
        .collect();
    let mut models = Vec::new();
    let mut graphs = Vec::new();
    for (m, g) in built {
        let name = &inst.trains[m.train].name;
        match g {
            Err(_) => return Ok(Preparation::Limit(format!("state graph of train {name} exceeds the node limit"))),
            Ok(g) => {
                if g.is_empty() && !inst.requests[m.train].optional {
                    return Ok(Preparation::Infeasible);
                }
                models.push(m);
                graphs.push(g);
            }
        }
    }
    Ok(Preparation::Ready(Prepared { ids: ids.to_vec(), models, graphs }))
}

fn objectives(inst: &ProblemInstance, timelines: &[RouteTimeline], operators: usize) -> Objectives {
    let mut o = Objectives { operator_count: operators, ..Default::default() };
    for tl in timelines {
        let travel = tl.exit_ms().unwrap_or(0) - tl.entry_ms().unwrap_or(0);
        o.travel_sum_ms += inst.requests[tl.train].weight * travel;
        o.travel_max_ms = o.travel_max_ms.max(travel);
        if inst.requests[tl.train].optional {
            o.routed_optional.push(tl.train);
        }
    }
    o
}

/// Builds the certificate from decoded timelines and re-checks it.
pub(crate) fn finish(inst: &ProblemInstance, mut timelines: Vec<RouteTimeline>) -> Result<Certificate> {
    timelines.sort_by_key(|t| t.train);
    let cert = Certificate { operators: vec![], objective: objectives(inst, &timelines, 0), timelines };
    let report = check_certificate_on(inst, &cert, &cert.timelines.iter().map(|t| t.train).collect::<Vec<_>>())?;
    if !report.is_ok() {
        return Err(Error::Internal(format!("solver produced an invalid certificate:\n{report}")));
    }
    Ok(cert)
}

fn limit_message(cfg: &SolverConfig) -> String {
    match (cfg.conflict_limit, cfg.time_limit_s) {
        (Some(c), Some(t)) => format!("SAT search stopped (conflict limit {c}, time limit {t} s)"),
        (Some(c), None) => format!("SAT search stopped (conflict limit {c})"),
        (None, Some(t)) => format!("SAT search stopped (time limit {t} s)"),
        (None, None) => "SAT search stopped".into(),
    }
}

/// Decides whether the mandatory trains can all be scheduled. Optional
/// trains are ignored.
pub fn verify(inst: &ProblemInstance) -> Result<Verdict> {
    let ids = inst.mandatory();
    let p = match prepare(inst, &ids)? {
        Preparation::Ready(p) => p,
        Preparation::Infeasible => return Ok(Verdict::Infeasible),
        Preparation::Limit(m) => return Ok(Verdict::ResourceLimit(m)),
    };
    let mut enc = Encoder::new(inst, &p, false);
    match enc.solve(&[]) {
        None => Ok(Verdict::ResourceLimit(limit_message(&inst.config))),
        Some(false) => Ok(Verdict::Infeasible),
        Some(true) => Ok(Verdict::Feasible(finish(inst, enc.decode())?)),
    }
}

/// Minimizes the objective over the discrete solutions of the mandatory
/// trains.
pub fn optimize(inst: &ProblemInstance, objective: Objective) -> Result<Verdict> {
    let ids = inst.mandatory();
    let p = match prepare(inst, &ids)? {
        Preparation::Ready(p) => p,
        Preparation::Infeasible => return Ok(Verdict::Infeasible),
        Preparation::Limit(m) => return Ok(Verdict::ResourceLimit(m)),
    };
    let mut enc = Encoder::new(inst, &p, true);
    let mut best = match enc.solve(&[]) {
        None => return Ok(Verdict::ResourceLimit(limit_message(&inst.config))),
        Some(false) => return Ok(Verdict::Infeasible),
        Some(true) => finish(inst, enc.decode())?,
    };
    let dt = inst.config.dt_ms;
    let value = |c: &Certificate| match objective {
        Objective::WeightedSum => c.objective.travel_sum_ms / dt,
        Objective::MaxTravel => c.objective.travel_max_ms / dt,
    };
    let lows: Vec<i64> = p.graphs.iter().map(|g| g.min_travel_steps().unwrap_or(0)).collect();
    let mut lo = match objective {
        Objective::WeightedSum => p.ids.iter().zip(&lows).map(|(&i, l)| inst.requests[i].weight * l).sum(),
        Objective::MaxTravel => lows.iter().copied().max().unwrap_or(0),
    };
    let mut hi = value(&best);
    let cap = hi;
    let bound = |enc: &mut Encoder, b: i64| match objective {
        Objective::WeightedSum => enc.sum_bound(b, cap),
        Objective::MaxTravel => enc.max_bound(b),
    };
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let a = bound(&mut enc, mid);
        match enc.solve(&a) {
            None => return Ok(Verdict::ResourceLimit(limit_message(&inst.config))),
            Some(false) => lo = mid + 1,
            Some(true) => {
                let c = finish(inst, enc.decode())?;
                let v = value(&c);
                if v > mid {
                    return Err(Error::Internal(format!("objective {v} above bound {mid}")));
                }
                hi = v;
                best = c;
            }
        }
    }
    Ok(Verdict::Feasible(best))
}

/// Schedules all mandatory trains and as many optional trains as possible;
/// among maximum sets the lexicographically smallest one is chosen.
pub fn capacity(inst: &ProblemInstance) -> Result<Verdict> {
    let ids: Vec<usize> = (0..inst.requests.len()).collect();
    let p = match prepare(inst, &ids)? {
        Preparation::Ready(p) => p,
        Preparation::Infeasible => return Ok(Verdict::Infeasible),
        Preparation::Limit(m) => return Ok(Verdict::ResourceLimit(m)),
    };
    let mut enc = Encoder::new(inst, &p, false);
    let limit = || Ok(Verdict::ResourceLimit(limit_message(&inst.config)));
    let mut count = match enc.solve(&[]) {
        None => return limit(),
        Some(false) => return Ok(Verdict::Infeasible),
        Some(true) => enc.selected_count(),
    };
    let n_opt = enc.optional_count();
    loop {
        if count == n_opt {
            break;
        }
        let a = enc.at_least(count + 1);
        match enc.solve(&a) {
            None => return limit(),
            Some(false) => break,
            Some(true) => count = enc.selected_count().max(count + 1),
        }
    }
    let mut fixed = enc.at_least(count);
    for sel in enc.selector_literals() {
        let mut trial = fixed.clone();
        trial.push(sel);
        match enc.solve(&trial) {
            None => return limit(),
            Some(true) => fixed.push(sel),
            Some(false) => fixed.push(-sel),
        }
    }
    match enc.solve(&fixed) {
        None => limit(),
        Some(false) => Err(Error::Internal("capacity model lost its solution".into())),
        Some(true) => Ok(Verdict::Feasible(finish(inst, enc.decode())?)),
    }
}

/// Re-checks a certificate against the instance: operators are applied
/// first, then every timeline is run through the kinematics, timetable and
/// VSS-condition checkers, and headways are compared.
pub fn check_certificate(inst: &ProblemInstance, cert: &Certificate) -> Result<CertificateReport> {
    let (applied, _) = inst.apply_operators(&cert.operators)?;
    let trains: Vec<usize> = cert.timelines.iter().map(|t| t.train).collect();
    check_certificate_on(&applied, cert, &trains)
}

fn check_certificate_on(inst: &ProblemInstance, cert: &Certificate, trains: &[usize]) -> Result<CertificateReport> {
    let mut rep = CertificateReport::default();
    let net = &inst.network;
    let dt = inst.config.dt_ms;
    let mut seen = vec![false; inst.trains.len()];
    for &i in trains {
        if i >= inst.trains.len() {
            rep.schedule.push(format!("timeline for unknown train #{i}"));
            return Ok(rep);
        }
        if seen[i] {
            rep.schedule.push(format!("train {} has two timelines", inst.trains[i].name));
        }
        seen[i] = true;
    }
    for i in inst.mandatory() {
        if !seen[i] {
            rep.schedule.push(format!("mandatory train {} has no timeline", inst.trains[i].name));
        }
    }
    for tl in &cert.timelines {
        if tl.samples.is_empty() {
            rep.schedule.push(format!("train {} has an empty timeline", inst.trains[tl.train].name));
            continue;
        }
        let train = &inst.trains[tl.train];
        rep.kinematics.extend(check_kinematics(tl, train, net, dt, inst.config.braking)?.violations);
        rep.timetable.extend(check_timetable(tl, &inst.requests[tl.train], train, &inst.stations, net)?.violations);
    }
    if !rep.schedule.is_empty() {
        return Ok(rep);
    }
    let vss = derive_sections(net, Level::Vss);
    let ttd = derive_sections(net, Level::Ttd);
    rep.control = check_vss_condition(&cert.timelines, &inst.trains, &vss, &ttd, dt)?.violations;
    for (a, ta) in cert.timelines.iter().enumerate() {
        for tb in &cert.timelines[a + 1..] {
            let (ra, rb) = (&inst.requests[ta.train], &inst.requests[tb.train]);
            let pairs = [
                (ra.entry, rb.entry, ta.entry_ms(), tb.entry_ms(), "entries"),
                (ra.exit, rb.exit, ta.exit_ms(), tb.exit_ms(), "exits"),
            ];
            for (va, vb, t1, t2, what) in pairs {
                if va != vb {
                    continue;
                }
                let h = net.headway_ms(va);
                if let (Some(t1), Some(t2)) = (t1, t2) {
                    if headway_conflict(h, t1, t2) {
                        rep.schedule.push(format!(
                            "{what} of {} and {} at {} are {} ms apart, headway {h} ms",
                            inst.trains[ta.train].name,
                            inst.trains[tb.train].name,
                            net.vertex(va).name,
                            (t1 - t2).abs()
                        ));
                    }
                }
            }
        }
    }
    Ok(rep)
}
