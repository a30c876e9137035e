//! Trains, track ranges and the motion constraints between samples.
//!
//! Units: millimetres, mm/s, mm/s² and milliseconds throughout.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::network::{EdgeId, RailwayNetwork};
use crate::report::ValidationReport;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Train {
    pub name: String,
    pub length_mm: i64,
    pub v_max_mm_s: i64,
    pub accel_mm_s2: i64,
    pub decel_mm_s2: i64,
    pub tim: bool,
}

impl Train {
    pub fn is_valid(&self) -> bool {
        self.length_mm > 0 && self.v_max_mm_s > 0 && self.accel_mm_s2 > 0 && self.decel_mm_s2 > 0
    }
}

/// How the braking distance is derived from speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum BrakingModel {
    /// v² / (2d)
    #[default]
    Quadratic,
    /// v / (2d), evaluated numerically in metres
    Linear,
}

/// Braking distance in mm, rounded up.
pub fn braking_distance(v_mm_s: i64, decel_mm_s2: i64, model: BrakingModel) -> i64 {
    assert!(v_mm_s >= 0 && decel_mm_s2 > 0);
    let (num, den) = match model {
        BrakingModel::Quadratic => (v_mm_s as i128 * v_mm_s as i128, 2 * decel_mm_s2 as i128),
        BrakingModel::Linear => (1000 * v_mm_s as i128, 2 * decel_mm_s2 as i128),
    };
    ((num + den - 1) / den) as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrackInterval {
    pub edge: EdgeId,
    pub from_mm: i64,
    pub to_mm: i64,
}

impl TrackInterval {
    pub fn new(edge: EdgeId, from_mm: i64, to_mm: i64) -> Self {
        TrackInterval { edge, from_mm, to_mm }
    }

    pub fn extent(&self) -> i64 {
        self.to_mm - self.from_mm
    }

    pub fn lambda(&self, net: &RailwayNetwork) -> Ratio<i64> {
        Ratio::new(self.from_mm, net.length(self.edge))
    }

    pub fn mu(&self, net: &RailwayNetwork) -> Ratio<i64> {
        Ratio::new(self.to_mm, net.length(self.edge))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrackRange {
    pub s_in_mm: i64,
    pub intervals: Vec<TrackInterval>,
    pub s_out_mm: i64,
}

impl TrackRange {
    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.intervals.iter().map(|iv| iv.edge)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrainState {
    pub range: TrackRange,
    pub v_mm_s: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub t_ms: i64,
    pub state: TrainState,
}

/// Timed positions of one train from its entry sample to its exit sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteTimeline {
    pub train: usize,
    pub samples: Vec<Sample>,
}

impl RouteTimeline {
    pub fn entry_ms(&self) -> Option<i64> {
        self.samples.first().map(|s| s.t_ms)
    }

    pub fn exit_ms(&self) -> Option<i64> {
        self.samples.last().map(|s| s.t_ms)
    }

    pub fn at(&self, t_ms: i64) -> Option<&TrainState> {
        self.samples
            .binary_search_by_key(&t_ms, |s| s.t_ms)
            .ok()
            .map(|i| &self.samples[i].state)
    }

    /// Sampling step, or an error when the samples are not evenly spaced.
    pub fn uniform_step(&self) -> Result<Option<i64>> {
        if self.samples.len() < 2 {
            return Ok(None);
        }
        let dt = self.samples[1].t_ms - self.samples[0].t_ms;
        for w in self.samples.windows(2) {
            if w[1].t_ms - w[0].t_ms != dt || dt <= 0 {
                return Err(Error::Sampling(format!(
                    "train #{}: step {} at t={} ms differs from {}",
                    self.train,
                    w[1].t_ms - w[0].t_ms,
                    w[0].t_ms,
                    dt
                )));
            }
        }
        Ok(Some(dt))
    }
}

fn check_bounds(rg: &TrackRange, net: &RailwayNetwork) -> Result<()> {
    if rg.intervals.is_empty() {
        return Err(Error::MalformedRange("no intervals".into()));
    }
    if rg.s_in_mm < 0 || rg.s_out_mm < 0 {
        return Err(Error::MalformedRange("negative overhang".into()));
    }
    for iv in &rg.intervals {
        if !net.has_edge(iv.edge) {
            return Err(Error::UnknownEdge(format!("#{}", iv.edge.0)));
        }
        if iv.from_mm < 0 || iv.from_mm > iv.to_mm || iv.to_mm > net.length(iv.edge) {
            return Err(Error::MalformedRange(format!(
                "interval [{}, {}] on {}",
                iv.from_mm,
                iv.to_mm,
                net.edge(iv.edge).name
            )));
        }
    }
    Ok(())
}

/// Checks the structural conditions of a track range; returns a
/// description of the first failed condition.
pub fn check_range(rg: &TrackRange, net: &RailwayNetwork) -> Result<()> {
    check_bounds(rg, net)?;
    let edges: Vec<EdgeId> = rg.edges().collect();
    if !net.is_valid_track_sequence(&edges)? {
        return Err(Error::MalformedRange("edges are not a valid track sequence".into()));
    }
    let k = rg.intervals.len();
    for (i, iv) in rg.intervals.iter().enumerate() {
        if i > 0 && iv.from_mm != 0 {
            return Err(Error::MalformedRange(format!("interval {i} does not start at its edge start")));
        }
        if i + 1 < k && iv.to_mm != net.length(iv.edge) {
            return Err(Error::MalformedRange(format!("interval {i} does not reach its edge end")));
        }
    }
    let first = rg.intervals[0];
    if rg.s_in_mm > 0 && (first.from_mm != 0 || !net.is_entry_exit(net.source(first.edge))) {
        return Err(Error::MalformedRange("entry overhang without entry vertex".into()));
    }
    let last = rg.intervals[k - 1];
    if rg.s_out_mm > 0
        && (last.to_mm != net.length(last.edge) || !net.is_entry_exit(net.target(last.edge)))
    {
        return Err(Error::MalformedRange("exit overhang without exit vertex".into()));
    }
    Ok(())
}

pub fn range_length(rg: &TrackRange, net: &RailwayNetwork) -> Result<i64> {
    check_bounds(rg, net)?;
    Ok(rg.s_in_mm + rg.s_out_mm + rg.intervals.iter().map(TrackInterval::extent).sum::<i64>())
}

/// Largest `s` such that the last `s` edges of `r1` equal the first `s`
/// edges of `r2`.
pub fn ranges_intersect_in_order(r1: &TrackRange, r2: &TrackRange) -> Option<usize> {
    let a: Vec<EdgeId> = r1.edges().collect();
    let b: Vec<EdgeId> = r2.edges().collect();
    (1..=a.len().min(b.len()))
        .rev()
        .find(|&s| a[a.len() - s..] == b[..s])
}

/// Distance travelled from `r1` to `r2` (rear to rear).
pub fn range_distance(r1: &TrackRange, r2: &TrackRange, net: &RailwayNetwork) -> Result<i64> {
    check_bounds(r1, net)?;
    check_bounds(r2, net)?;
    let s = ranges_intersect_in_order(r1, r2).ok_or(Error::NoIntersection)?;
    let l = r1.intervals.len();
    let passed: i64 = r1.intervals[..l - s].iter().map(TrackInterval::extent).sum();
    let pivot = r1.intervals[l - s];
    Ok(r1.s_in_mm - r2.s_in_mm + passed + r2.intervals[0].from_mm - pivot.from_mm)
}

pub fn occupied_edges(rg: &TrackRange) -> BTreeSet<EdgeId> {
    rg.edges().collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KinematicsIssue {
    MalformedRange(String),
    Teleport,
    Backward { dist_mm: i64 },
    OverSpeed { dist_mm: i64, max_mm: i64 },
    SpeedMismatch { dist_mm: i64, v_mm_s: i64 },
    Acceleration { dv_mm_s: i64, max_mm_s: i64 },
    Deceleration { dv_mm_s: i64, max_mm_s: i64 },
    SpeedLimit { v_mm_s: i64 },
    NegativeSpeed { v_mm_s: i64 },
    ShortRange { length_mm: i64 },
    BrakingDistance { have_mm: i64, need_mm: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KinematicsViolation {
    pub train: usize,
    pub t_ms: i64,
    pub issue: KinematicsIssue,
}

impl fmt::Display for KinematicsViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} ms train #{}: {:?}", self.t_ms, self.train, self.issue)
    }
}

/// Per-sample and per-step motion checks. Speed is taken as constant
/// during each step, so the displacement over a step must equal v·dt
/// (at most v·dt for the step that leaves the network).
pub fn check_kinematics(
    timeline: &RouteTimeline,
    train: &Train,
    net: &RailwayNetwork,
    dt_ms: i64,
    braking: BrakingModel,
) -> Result<ValidationReport<KinematicsViolation>> {
    if let Some(step) = timeline.uniform_step()? {
        if step != dt_ms {
            return Err(Error::Sampling(format!("timeline step {step} ms, expected {dt_ms} ms")));
        }
    }
    let mut report = ValidationReport::new();
    let mut push = |t_ms, issue| {
        report.push(KinematicsViolation { train: timeline.train, t_ms, issue })
    };
    for s in &timeline.samples {
        let st = &s.state;
        if let Err(e) = check_range(&st.range, net) {
            push(s.t_ms, KinematicsIssue::MalformedRange(e.to_string()));
            continue;
        }
        if st.v_mm_s < 0 {
            push(s.t_ms, KinematicsIssue::NegativeSpeed { v_mm_s: st.v_mm_s });
            continue;
        }
        if st.v_mm_s > train.v_max_mm_s {
            push(s.t_ms, KinematicsIssue::SpeedLimit { v_mm_s: st.v_mm_s });
        }
        let len = range_length(&st.range, net)?;
        if len < train.length_mm {
            push(s.t_ms, KinematicsIssue::ShortRange { length_mm: len });
            continue;
        }
        let need = braking_distance(st.v_mm_s, train.decel_mm_s2, braking);
        if len - train.length_mm < need {
            push(
                s.t_ms,
                KinematicsIssue::BrakingDistance { have_mm: len - train.length_mm, need_mm: need },
            );
        }
    }
    let max_dv_up = train.accel_mm_s2 as i128 * dt_ms as i128;
    let max_dv_down = train.decel_mm_s2 as i128 * dt_ms as i128;
    for w in timeline.samples.windows(2) {
        let (a, b) = (&w[0].state, &w[1].state);
        let t = w[0].t_ms;
        if check_bounds(&a.range, net).is_err() || check_bounds(&b.range, net).is_err() {
            continue;
        }
        match range_distance(&a.range, &b.range, net) {
            Err(_) => push(t, KinematicsIssue::Teleport),
            Ok(d) => {
                if d < 0 {
                    push(t, KinematicsIssue::Backward { dist_mm: d });
                }
                let max = train.v_max_mm_s as i128 * dt_ms as i128;
                if d as i128 * 1000 > max {
                    push(t, KinematicsIssue::OverSpeed { dist_mm: d, max_mm: (max / 1000) as i64 });
                }
                // once the range has left through the exit, further motion is not observable
                let beyond = b.range.s_in_mm == 0 && b.range.intervals.iter().all(|iv| iv.extent() == 0);
                let travelled = a.v_mm_s as i128 * dt_ms as i128;
                let consistent = if beyond && b.range.s_out_mm > 0 {
                    d as i128 * 1000 <= travelled
                } else {
                    d as i128 * 1000 == travelled
                };
                if !consistent {
                    push(t, KinematicsIssue::SpeedMismatch { dist_mm: d, v_mm_s: a.v_mm_s });
                }
            }
        }
        // dv [mm/s] * 1000 compared against a [mm/s²] * dt [ms]
        let dv = (b.v_mm_s - a.v_mm_s) as i128 * 1000;
        if dv > max_dv_up {
            push(
                t,
                KinematicsIssue::Acceleration {
                    dv_mm_s: b.v_mm_s - a.v_mm_s,
                    max_mm_s: (max_dv_up / 1000) as i64,
                },
            );
        }
        if -dv > max_dv_down {
            push(
                t,
                KinematicsIssue::Deceleration {
                    dv_mm_s: b.v_mm_s - a.v_mm_s,
                    max_mm_s: (max_dv_down / 1000) as i64,
                },
            );
        }
    }
    Ok(report)
}
