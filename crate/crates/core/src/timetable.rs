//! Stations, timetable requests and compliance of a timeline with its
//! request.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::kinematics::{RouteTimeline, Train, TrainState};
use crate::network::{EdgeId, RailwayNetwork, VertexId};
use crate::report::ValidationReport;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Station {
    pub name: String,
    pub edges: BTreeSet<EdgeId>,
}

/// Closed interval of milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimeWindow {
    pub lo_ms: i64,
    pub hi_ms: i64,
}

impl TimeWindow {
    pub fn new(lo_ms: i64, hi_ms: i64) -> Self {
        TimeWindow { lo_ms, hi_ms }
    }

    pub fn at(t_ms: i64) -> Self {
        TimeWindow { lo_ms: t_ms, hi_ms: t_ms }
    }

    pub fn contains(&self, t_ms: i64) -> bool {
        self.lo_ms <= t_ms && t_ms <= self.hi_ms
    }

    pub fn is_ordered(&self) -> bool {
        self.lo_ms <= self.hi_ms
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stop {
    pub station: usize,
    pub arrival: TimeWindow,
    pub departure: TimeWindow,
    pub min_dwell_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimetableRequest {
    pub train: usize,
    pub entry: VertexId,
    pub entry_window: TimeWindow,
    pub exit: VertexId,
    pub exit_window: TimeWindow,
    pub stops: Vec<Stop>,
    /// Fixed route, if given.
    pub route: Option<Vec<EdgeId>>,
    /// Weight in the travel-time sum objective.
    pub weight: i64,
    /// Optional trains only matter for capacity maximization.
    pub optional: bool,
}

pub fn is_in_station(state: &TrainState, s: &Station) -> bool {
    state.range.edges().all(|e| s.edges.contains(&e))
}

pub fn stops_in_station(state: &TrainState, s: &Station) -> bool {
    state.v_mm_s == 0 && is_in_station(state, s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimetableIssue {
    EntryTime { t_ms: i64 },
    EntryPlacement,
    ExitTime { t_ms: i64 },
    ExitPlacement,
    MissingStop { index: usize, station: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimetableViolation {
    pub train: usize,
    pub issue: TimetableIssue,
}

impl fmt::Display for TimetableViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "train #{}: {:?}", self.train, self.issue)
    }
}

/// Stop interval found for a stop: first and last stopped sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopInterval {
    pub from_ms: i64,
    pub to_ms: i64,
}

/// Earliest-completing stop intervals for the stops of `req`, in order.
/// `None` entries mark stops that cannot be matched.
pub fn match_stops(
    timeline: &RouteTimeline,
    req: &TimetableRequest,
    stations: &[Station],
) -> Vec<Option<StopInterval>> {
    let mut out = Vec::with_capacity(req.stops.len());
    let mut earliest = i64::MIN;
    for stop in &req.stops {
        let station = &stations[stop.station];
        let found = earliest_stop(timeline, station, stop, earliest);
        if let Some(iv) = found {
            earliest = iv.to_ms;
        } else {
            earliest = i64::MAX;
        }
        out.push(found);
    }
    out
}

fn earliest_stop(
    timeline: &RouteTimeline,
    station: &Station,
    stop: &Stop,
    not_before: i64,
) -> Option<StopInterval> {
    let samples = &timeline.samples;
    let mut i = 0;
    while i < samples.len() {
        if !stops_in_station(&samples[i].state, station) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < samples.len() && stops_in_station(&samples[j + 1].state, station) {
            j += 1;
        }
        // run of stopped samples i..=j
        let lo = (i..=j).find(|&a| {
            let t = samples[a].t_ms;
            t >= not_before && stop.arrival.contains(t)
        });
        if let Some(a) = lo {
            let t_lo = samples[a].t_ms;
            let hi = (a..=j).find(|&b| {
                let t = samples[b].t_ms;
                t - t_lo >= stop.min_dwell_ms && t >= stop.departure.lo_ms
            });
            if let Some(b) = hi {
                if stop.departure.contains(samples[b].t_ms) {
                    return Some(StopInterval { from_ms: t_lo, to_ms: samples[b].t_ms });
                }
            }
        }
        i = j + 1;
    }
    None
}

pub fn check_timetable(
    timeline: &RouteTimeline,
    req: &TimetableRequest,
    train: &Train,
    stations: &[Station],
    net: &RailwayNetwork,
) -> Result<ValidationReport<TimetableViolation>> {
    let (first, last) = match (timeline.samples.first(), timeline.samples.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::NotApplicable("timeline has no samples".into())),
    };
    let mut report = ValidationReport::new();
    let mut push = |issue| report.push(TimetableViolation { train: req.train, issue });
    if !req.entry_window.contains(first.t_ms) {
        push(TimetableIssue::EntryTime { t_ms: first.t_ms });
    }
    let r = &first.state.range;
    let head = r.intervals.first();
    let entry_ok = r.s_in_mm == train.length_mm
        && head.is_some_and(|iv| iv.from_mm == 0 && net.source(iv.edge) == req.entry);
    if !entry_ok {
        push(TimetableIssue::EntryPlacement);
    }
    if !req.exit_window.contains(last.t_ms) {
        push(TimetableIssue::ExitTime { t_ms: last.t_ms });
    }
    let r = &last.state.range;
    let tail = r.intervals.last();
    let exit_ok = r.s_in_mm == 0
        && r.s_out_mm >= train.length_mm
        && r.intervals.iter().all(|iv| iv.from_mm == iv.to_mm)
        && tail.is_some_and(|iv| iv.to_mm == net.length(iv.edge) && net.target(iv.edge) == req.exit);
    if !exit_ok {
        push(TimetableIssue::ExitPlacement);
    }
    for (index, m) in match_stops(timeline, req, stations).into_iter().enumerate() {
        if m.is_none() {
            let station = stations[req.stops[index].station].name.clone();
            push(TimetableIssue::MissingStop { index, station });
        }
    }
    Ok(report)
}
