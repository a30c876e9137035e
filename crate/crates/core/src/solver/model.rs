//! Discrete motion model shared by the SAT-backed search and the
//! brute-force oracle.
//!
//! A train on a fixed route is described by the grid position `x` of its
//! front (in units of `grid_mm`, 0 = front at the entry vertex), a speed
//! level `k` (k grid units per step, held during the step) and a stop phase.

use crate::kinematics::{braking_distance, TrackInterval, TrackRange, Train, TrainState};
use crate::network::{EdgeId, RailwayNetwork};
use crate::timetable::{Station, TimeWindow, TimetableRequest};

use super::SolverConfig;

#[derive(Debug, Clone)]
pub(crate) struct RouteGeometry {
    pub edges: Vec<EdgeId>,
    pub lengths: Vec<i64>,
    pub starts: Vec<i64>,
    pub total: i64,
}

impl RouteGeometry {
    pub fn new(net: &RailwayNetwork, edges: Vec<EdgeId>) -> Self {
        let lengths: Vec<i64> = edges.iter().map(|&e| net.length(e)).collect();
        let mut starts = Vec::with_capacity(edges.len());
        let mut acc = 0;
        for l in &lengths {
            starts.push(acc);
            acc += l;
        }
        RouteGeometry { edges, lengths, starts, total: acc }
    }

    /// Indices of the first and last listed edge of the range covering route
    /// coordinates [a, b].
    pub fn span(&self, a: i64, b: i64) -> (usize, usize) {
        let n = self.edges.len();
        let mut first = None;
        let mut last = None;
        for i in 0..n {
            let lo = a.max(self.starts[i]);
            let hi = b.min(self.starts[i] + self.lengths[i]);
            if lo < hi {
                first.get_or_insert(i);
                last = Some(i);
            }
        }
        match (first, last) {
            (Some(f), Some(l)) => (f, l),
            _ => {
                let i = self.point_edge(a, b);
                (i, i)
            }
        }
    }

    fn point_edge(&self, a: i64, b: i64) -> usize {
        let n = self.edges.len();
        if b <= 0 {
            0
        } else if a >= self.total {
            n - 1
        } else {
            (0..n).find(|&i| a < self.starts[i] + self.lengths[i]).unwrap_or(n - 1)
        }
    }

    /// Track range covering route coordinates [a, b] (rear to moving
    /// authority), with overhang outside the route in s_in / s_out.
    pub fn range(&self, a: i64, b: i64) -> TrackRange {
        let s_in = (b.min(0) - a).max(0);
        let s_out = (b - a.max(self.total)).max(0);
        let mut intervals = Vec::new();
        for i in 0..self.edges.len() {
            let lo = a.max(self.starts[i]);
            let hi = b.min(self.starts[i] + self.lengths[i]);
            if lo < hi {
                intervals.push(TrackInterval::new(self.edges[i], lo - self.starts[i], hi - self.starts[i]));
            }
        }
        if intervals.is_empty() {
            let i = self.point_edge(a, b);
            let p = (a.max(0) - self.starts[i]).clamp(0, self.lengths[i]);
            intervals.push(TrackInterval::new(self.edges[i], p, p));
        }
        TrackRange { s_in_mm: s_in, intervals, s_out_mm: s_out }
    }
}

/// Stop phase of a train: waiting for stop `j` (j == number of stops means
/// all stops done) or dwelling for stop `j` with earliest completion step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum Phase {
    Wait(u16),
    Dwell(u16, u32),
}

#[derive(Debug, Clone)]
pub(crate) struct StopSpec {
    pub edges: Vec<bool>,
    pub arr: (i64, i64),
    pub dep: (i64, i64),
    pub dwell: i64,
}

/// Inclusive step range covered by a millisecond window.
pub(crate) fn window_steps(w: TimeWindow, dt_ms: i64) -> (i64, i64) {
    (w.lo_ms.div_euclid(dt_ms) + i64::from(w.lo_ms.rem_euclid(dt_ms) != 0), w.hi_ms.div_euclid(dt_ms))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct RunState {
    pub route: u16,
    pub x: u32,
    pub k: u16,
    pub phase: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum Next {
    Run(RunState),
    Exit { route: u16, k: u16 },
}

pub(crate) struct TrainModel {
    pub train: usize,
    pub routes: Vec<RouteGeometry>,
    pub length_mm: i64,
    pub grid_mm: i64,
    pub dt_ms: i64,
    pub kmax: u16,
    pub acc: u16,
    pub dec: u16,
    pub bd: Vec<i64>,
    pub stops: Vec<StopSpec>,
    pub entry: (i64, i64),
    pub exit: (i64, i64),
    /// Per route: smallest front position with the rear beyond the route end.
    pub x_exit: Vec<u32>,
    /// Per route, per (x, k): first and last route edge index of the range.
    spans: Vec<Vec<(u16, u16)>>,
    /// Per route, per x: bit j set if the standing train is inside stop j's station.
    station_mask: Vec<Vec<u64>>,
}

impl TrainModel {
    pub fn new(
        train_idx: usize,
        train: &Train,
        req: &TimetableRequest,
        routes: Vec<Vec<EdgeId>>,
        net: &RailwayNetwork,
        stations: &[Station],
        cfg: &SolverConfig,
    ) -> Self {
        let g = cfg.grid_mm;
        let dt = cfg.dt_ms as i128;
        let kmax = ((train.v_max_mm_s as i128 * dt) / (g as i128 * 1000)) as u16;
        let acc = ((train.accel_mm_s2 as i128 * dt * dt) / (g as i128 * 1_000_000)) as u16;
        let dec = ((train.decel_mm_s2 as i128 * dt * dt) / (g as i128 * 1_000_000)) as u16;
        let speed = |k: u16| k as i64 * g * 1000 / cfg.dt_ms;
        let bd: Vec<i64> = (0..=kmax)
            .map(|k| braking_distance(speed(k), train.decel_mm_s2, cfg.braking))
            .collect();
        let stops: Vec<StopSpec> = req
            .stops
            .iter()
            .map(|s| {
                let mut edges = vec![false; net.edge_count()];
                for e in &stations[s.station].edges {
                    edges[e.idx()] = true;
                }
                StopSpec {
                    edges,
                    arr: window_steps(s.arrival, cfg.dt_ms),
                    dep: window_steps(s.departure, cfg.dt_ms),
                    dwell: (s.min_dwell_ms + cfg.dt_ms - 1).div_euclid(cfg.dt_ms),
                }
            })
            .collect();
        let geoms: Vec<RouteGeometry> = routes.into_iter().map(|r| RouteGeometry::new(net, r)).collect();
        let l = train.length_mm;
        let mut x_exit = Vec::new();
        let mut spans = Vec::new();
        let mut station_mask = Vec::new();
        for geo in &geoms {
            let xe = ((geo.total + l + g - 1) / g) as u32;
            x_exit.push(xe);
            let mut sp = Vec::with_capacity(xe as usize * (kmax as usize + 1));
            let mut masks = Vec::with_capacity(xe as usize);
            for x in 0..xe {
                let front = x as i64 * g;
                for k in 0..=kmax {
                    let (f, la) = geo.span(front - l, front + bd[k as usize]);
                    sp.push((f as u16, la as u16));
                }
                let (f, la) = geo.span(front - l, front + bd[0]);
                let mut m = 0u64;
                for (j, st) in stops.iter().enumerate() {
                    if geo.edges[f..=la].iter().all(|e| st.edges[e.idx()]) {
                        m |= 1 << j;
                    }
                }
                masks.push(m);
            }
            spans.push(sp);
            station_mask.push(masks);
        }
        TrainModel {
            train: train_idx,
            routes: geoms,
            length_mm: l,
            grid_mm: g,
            dt_ms: cfg.dt_ms,
            kmax,
            acc,
            dec,
            bd,
            stops,
            entry: window_steps(req.entry_window, cfg.dt_ms),
            exit: window_steps(req.exit_window, cfg.dt_ms),
            x_exit,
            spans,
            station_mask,
        }
    }

    pub fn done(&self) -> Phase {
        Phase::Wait(self.stops.len() as u16)
    }

    pub fn speed_mm_s(&self, k: u16) -> i64 {
        k as i64 * self.grid_mm * 1000 / self.dt_ms
    }

    pub fn span(&self, route: u16, x: u32, k: u16) -> (u16, u16) {
        self.spans[route as usize][x as usize * (self.kmax as usize + 1) + k as usize]
    }

    pub fn exit_span(&self, route: u16) -> (u16, u16) {
        let n = self.routes[route as usize].edges.len() as u16 - 1;
        (n, n)
    }

    fn mask(&self, route: u16, x: u32, k: u16) -> u64 {
        if k == 0 {
            self.station_mask[route as usize][x as usize]
        } else {
            0
        }
    }

    /// Phase closure at one sample: starting and completing stops that the
    /// sample allows.
    fn settle(&self, p: Phase, t: i64, mask: u64, out: &mut Vec<Phase>) {
        let n = self.stops.len() as u16;
        match p {
            Phase::Wait(j) if j == n => out.push(p),
            Phase::Wait(j) => {
                let st = &self.stops[j as usize];
                if t <= st.arr.1 {
                    out.push(p);
                }
                if mask & (1 << j) != 0 && st.arr.0 <= t && t <= st.arr.1 {
                    let c = (t + st.dwell).max(st.dep.0);
                    if c <= st.dep.1 {
                        self.settle(Phase::Dwell(j, c as u32), t, mask, out);
                    }
                }
            }
            Phase::Dwell(j, c) => {
                let st = &self.stops[j as usize];
                if t >= c as i64 {
                    if t <= st.dep.1 {
                        self.settle(Phase::Wait(j + 1), t, mask, out);
                    }
                } else {
                    out.push(p);
                }
            }
        }
    }

    fn advance(&self, p: Phase, t: i64, mask: u64, out: &mut Vec<Phase>) {
        match p {
            Phase::Wait(_) => self.settle(p, t, mask, out),
            Phase::Dwell(j, _) => {
                if mask & (1 << j) != 0 {
                    self.settle(p, t, mask, out)
                }
            }
        }
    }

    /// States in which the train can appear at step `t`.
    pub fn entries(&self, t: i64, out: &mut Vec<RunState>) {
        if t < self.entry.0 || t > self.entry.1 {
            return;
        }
        let mut phases = Vec::new();
        for r in 0..self.routes.len() as u16 {
            for k in 0..=self.kmax {
                phases.clear();
                self.settle(Phase::Wait(0), t, self.mask(r, 0, k), &mut phases);
                phases.sort();
                phases.dedup();
                for &phase in &phases {
                    out.push(RunState { route: r, x: 0, k, phase });
                }
            }
        }
    }

    /// Successor states at step `t + 1` of `s` at step `t`.
    pub fn successors(&self, t: i64, s: &RunState, out: &mut Vec<Next>) {
        let (_, last) = self.span(s.route, s.x, s.k);
        let x2 = s.x + s.k as u32;
        if x2 >= self.x_exit[s.route as usize] {
            let t2 = t + 1;
            let (first2, _) = self.exit_span(s.route);
            if s.phase == self.done() && self.exit.0 <= t2 && t2 <= self.exit.1 && first2 <= last {
                out.push(Next::Exit { route: s.route, k: s.k });
            }
            return;
        }
        let lo = s.k.saturating_sub(self.dec);
        let hi = (s.k + self.acc).min(self.kmax);
        let mut phases = Vec::new();
        for k2 in lo..=hi {
            let (first2, _) = self.span(s.route, x2, k2);
            if first2 > last {
                continue;
            }
            phases.clear();
            self.advance(s.phase, t + 1, self.mask(s.route, x2, k2), &mut phases);
            phases.sort();
            phases.dedup();
            for &phase in &phases {
                out.push(Next::Run(RunState { route: s.route, x: x2, k: k2, phase }));
            }
        }
    }

    pub fn state(&self, s: &RunState) -> TrainState {
        let geo = &self.routes[s.route as usize];
        let front = s.x as i64 * self.grid_mm;
        TrainState {
            range: geo.range(front - self.length_mm, front + self.bd[s.k as usize]),
            v_mm_s: self.speed_mm_s(s.k),
        }
    }

    pub fn exit_state(&self, route: u16, k: u16) -> TrainState {
        let geo = &self.routes[route as usize];
        let rear = geo.total;
        TrainState {
            range: geo.range(rear, rear + self.length_mm + self.bd[k as usize]),
            v_mm_s: self.speed_mm_s(k),
        }
    }

    /// Route edges covered by a run state or the exit marker.
    pub fn edges_of(&self, route: u16, span: (u16, u16)) -> &[EdgeId] {
        &self.routes[route as usize].edges[span.0 as usize..=span.1 as usize]
    }
}
