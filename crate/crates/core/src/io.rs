//! JSON files: network, timetable, certificate (also used for design
//! solutions) and a bundle of network plus timetable. Every document
//! carries `"format_version": 1`; all quantities are integers in mm, mm/s,
//! mm/s² and ms. Objects refer to each other by name.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use num_rational::Ratio;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::design::DesignSolution;
use crate::error::{Error, Result};
use crate::kinematics::{BrakingModel, RouteTimeline, Sample, Train, TrackInterval, TrackRange, TrainState};
use crate::network::{Border, Edge, EdgeId, RailwayNetwork, Vertex, VertexId};
use crate::operator::{apply_vss_operator, Cut, VssOperator};
use crate::solver::{Certificate, Objectives, ProblemInstance, RouteMode, SolverConfig};
use crate::timetable::{Station, Stop, TimeWindow, TimetableRequest};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexRec {
    id: String,
    border: u8,
    #[serde(default)]
    entry_exit: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    headway_ms: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pos: Option<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRec {
    id: String,
    source: String,
    target: String,
    length_mm: i64,
    reverse: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuccessorRec {
    vertex: String,
    in_edge: String,
    out_edges: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    format_version: u32,
    vertices: Vec<VertexRec>,
    edges: Vec<EdgeRec>,
    successors: Vec<SuccessorRec>,
    #[serde(default)]
    unbreakable: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StationRec {
    id: String,
    edges: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainRec {
    id: String,
    length_mm: i64,
    v_max_mm_s: i64,
    accel_mm_s2: i64,
    decel_mm_s2: i64,
    tim: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StopRec {
    station: String,
    arrival_ms: [i64; 2],
    departure_ms: [i64; 2],
    min_dwell_ms: i64,
}

fn one() -> i64 {
    1
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestRec {
    train: String,
    entry: String,
    entry_window_ms: [i64; 2],
    exit: String,
    exit_window_ms: [i64; 2],
    #[serde(default)]
    stops: Vec<StopRec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    route: Option<Vec<String>>,
    #[serde(default = "one")]
    weight: i64,
    #[serde(default)]
    optional: bool,
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum RouteModeRec {
    Fixed,
    Free,
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum BrakingRec {
    Quadratic,
    Linear,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SolverRec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dt_ms: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid_mm: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    route_mode: Option<RouteModeRec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_routes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    conflict_limit: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time_limit_s: Option<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    braking: Option<BrakingRec>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimetableDoc {
    format_version: u32,
    stations: Vec<StationRec>,
    trains: Vec<TrainRec>,
    requests: Vec<RequestRec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k_max: Option<usize>,
    #[serde(default)]
    solver: SolverRec,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleDoc {
    format_version: u32,
    network: NetworkDoc,
    timetable: TimetableDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorRec {
    edge: String,
    rho: [i64; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CutRec {
    edge: String,
    offset_mm: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntervalRec {
    edge: String,
    from_mm: i64,
    to_mm: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRec {
    t_ms: i64,
    s_in_mm: i64,
    intervals: Vec<IntervalRec>,
    s_out_mm: i64,
    v_mm_s: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimelineRec {
    train: String,
    samples: Vec<SampleRec>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectiveRec {
    travel_sum_ms: i64,
    travel_max_ms: i64,
    routed_optional: Vec<String>,
    operator_count: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertificateDoc {
    format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cuts: Option<Vec<CutRec>>,
    operators: Vec<OperatorRec>,
    timelines: Vec<TimelineRec>,
    objective: ObjectiveRec,
}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Format(if path == "." { e.inner().to_string() } else { format!("{path}: {}", e.inner()) })
    })
}

fn render<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("serializable");
    s.push('\n');
    s
}

fn check_version(v: u32, what: &str) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::Format(format!("{what}: unsupported format_version {v}, expected {FORMAT_VERSION}")));
    }
    Ok(())
}

fn window(w: [i64; 2]) -> TimeWindow {
    TimeWindow::new(w[0], w[1])
}

fn pair(w: TimeWindow) -> [i64; 2] {
    [w.lo_ms, w.hi_ms]
}

fn edge_ref(net: &RailwayNetwork, name: &str) -> Result<EdgeId> {
    net.edge_id(name)
}

fn vertex_ref(net: &RailwayNetwork, name: &str) -> Result<VertexId> {
    net.vertex_id(name)
}

fn network_doc(net: &RailwayNetwork) -> NetworkDoc {
    let vertices = net
        .vertices()
        .map(|(_, v)| VertexRec {
            id: v.name.clone(),
            border: v.border.level(),
            entry_exit: v.headway_ms.is_some(),
            headway_ms: v.headway_ms,
            pos: v.hint.map(|(x, y)| [x, y]),
        })
        .collect();
    let ename = |e: EdgeId| net.edge(e).name.clone();
    let edges = net
        .edges()
        .map(|(_, e)| EdgeRec {
            id: e.name.clone(),
            source: net.vertex(e.source).name.clone(),
            target: net.vertex(e.target).name.clone(),
            length_mm: e.length_mm,
            reverse: e.reverse.map(ename),
        })
        .collect();
    let mut successors = Vec::new();
    for (v, vert) in net.vertices() {
        for (inc, outs) in net.successor_map(v) {
            successors.push(SuccessorRec {
                vertex: vert.name.clone(),
                in_edge: ename(*inc),
                out_edges: outs.iter().map(|&o| ename(o)).collect(),
            });
        }
    }
    NetworkDoc {
        format_version: FORMAT_VERSION,
        vertices,
        edges,
        successors,
        unbreakable: net.unbreakable_marks().iter().map(|&e| ename(e)).collect(),
    }
}

fn network_from_doc(doc: NetworkDoc) -> Result<RailwayNetwork> {
    check_version(doc.format_version, "network")?;
    let mut vnames = BTreeMap::new();
    let mut vertices = Vec::new();
    for (i, v) in doc.vertices.into_iter().enumerate() {
        let border = Border::from_level(v.border)
            .ok_or_else(|| Error::Format(format!("vertices[{i}].border: expected 0, 1 or 2, got {}", v.border)))?;
        if vnames.insert(v.id.clone(), VertexId(i as u32)).is_some() {
            return Err(Error::Format(format!("vertices[{i}].id: duplicate id {}", v.id)));
        }
        let headway_ms = match (v.entry_exit, v.headway_ms) {
            (true, h) => Some(h.unwrap_or(0)),
            (false, None) => None,
            (false, Some(_)) => {
                return Err(Error::Format(format!("vertices[{i}].headway_ms: only entry/exit vertices have a headway")))
            }
        };
        vertices.push(Vertex { name: v.id, border, headway_ms, hint: v.pos.map(|[x, y]| (x, y)) });
    }
    let vid = |name: &str, field: String| {
        vnames.get(name).copied().ok_or_else(|| Error::Format(format!("{field}: unknown vertex {name}")))
    };
    let mut enames = BTreeMap::new();
    for (i, e) in doc.edges.iter().enumerate() {
        if enames.insert(e.id.clone(), EdgeId(i as u32)).is_some() {
            return Err(Error::Format(format!("edges[{i}].id: duplicate id {}", e.id)));
        }
    }
    let eid = |name: &str, field: String| {
        enames.get(name).copied().ok_or_else(|| Error::Format(format!("{field}: unknown edge {name}")))
    };
    let mut edges = Vec::new();
    for (i, e) in doc.edges.iter().enumerate() {
        edges.push(Edge {
            name: e.id.clone(),
            source: vid(&e.source, format!("edges[{i}].source"))?,
            target: vid(&e.target, format!("edges[{i}].target"))?,
            length_mm: e.length_mm,
            reverse: e.reverse.as_deref().map(|r| eid(r, format!("edges[{i}].reverse"))).transpose()?,
        });
    }
    let mut successors: Vec<BTreeMap<EdgeId, BTreeSet<EdgeId>>> = vec![BTreeMap::new(); vertices.len()];
    for (i, s) in doc.successors.iter().enumerate() {
        let v = vid(&s.vertex, format!("successors[{i}].vertex"))?;
        let inc = eid(&s.in_edge, format!("successors[{i}].in_edge"))?;
        let mut outs = BTreeSet::new();
        for (j, o) in s.out_edges.iter().enumerate() {
            outs.insert(eid(o, format!("successors[{i}].out_edges[{j}]"))?);
        }
        if successors[v.idx()].insert(inc, outs).is_some() {
            return Err(Error::Format(format!("successors[{i}]: duplicate entry for {} at {}", s.in_edge, s.vertex)));
        }
    }
    let mut unbreakable = BTreeSet::new();
    for (i, u) in doc.unbreakable.iter().enumerate() {
        unbreakable.insert(eid(u, format!("unbreakable[{i}]"))?);
    }
    Ok(RailwayNetwork::from_parts(vertices, edges, successors, unbreakable))
}

fn solver_doc(cfg: &SolverConfig) -> SolverRec {
    SolverRec {
        dt_ms: Some(cfg.dt_ms),
        grid_mm: Some(cfg.grid_mm),
        route_mode: Some(match cfg.route_mode {
            RouteMode::Fixed => RouteModeRec::Fixed,
            RouteMode::Free => RouteModeRec::Free,
        }),
        max_routes: Some(cfg.max_routes),
        node_limit: Some(cfg.node_limit),
        conflict_limit: cfg.conflict_limit,
        time_limit_s: cfg.time_limit_s,
        braking: Some(match cfg.braking {
            BrakingModel::Quadratic => BrakingRec::Quadratic,
            BrakingModel::Linear => BrakingRec::Linear,
        }),
    }
}

fn solver_from_doc(s: SolverRec) -> SolverConfig {
    let d = SolverConfig::default();
    SolverConfig {
        dt_ms: s.dt_ms.unwrap_or(d.dt_ms),
        grid_mm: s.grid_mm.unwrap_or(d.grid_mm),
        route_mode: match s.route_mode {
            None => d.route_mode,
            Some(RouteModeRec::Fixed) => RouteMode::Fixed,
            Some(RouteModeRec::Free) => RouteMode::Free,
        },
        max_routes: s.max_routes.unwrap_or(d.max_routes),
        node_limit: s.node_limit.unwrap_or(d.node_limit),
        conflict_limit: s.conflict_limit,
        time_limit_s: s.time_limit_s,
        braking: match s.braking {
            None => d.braking,
            Some(BrakingRec::Quadratic) => BrakingModel::Quadratic,
            Some(BrakingRec::Linear) => BrakingModel::Linear,
        },
    }
}

fn timetable_doc(inst: &ProblemInstance) -> TimetableDoc {
    let net = &inst.network;
    let ename = |e: &EdgeId| net.edge(*e).name.clone();
    let vname = |v: VertexId| net.vertex(v).name.clone();
    TimetableDoc {
        format_version: FORMAT_VERSION,
        stations: inst
            .stations
            .iter()
            .map(|s| StationRec { id: s.name.clone(), edges: s.edges.iter().map(ename).collect() })
            .collect(),
        trains: inst
            .trains
            .iter()
            .map(|t| TrainRec {
                id: t.name.clone(),
                length_mm: t.length_mm,
                v_max_mm_s: t.v_max_mm_s,
                accel_mm_s2: t.accel_mm_s2,
                decel_mm_s2: t.decel_mm_s2,
                tim: t.tim,
            })
            .collect(),
        requests: inst
            .requests
            .iter()
            .map(|r| RequestRec {
                train: inst.trains[r.train].name.clone(),
                entry: vname(r.entry),
                entry_window_ms: pair(r.entry_window),
                exit: vname(r.exit),
                exit_window_ms: pair(r.exit_window),
                stops: r
                    .stops
                    .iter()
                    .map(|s| StopRec {
                        station: inst.stations[s.station].name.clone(),
                        arrival_ms: pair(s.arrival),
                        departure_ms: pair(s.departure),
                        min_dwell_ms: s.min_dwell_ms,
                    })
                    .collect(),
                route: r.route.as_ref().map(|rt| rt.iter().map(ename).collect()),
                weight: r.weight,
                optional: r.optional,
            })
            .collect(),
        k_max: inst.k_max,
        solver: solver_doc(&inst.config),
    }
}

fn instance_from_docs(network: RailwayNetwork, doc: TimetableDoc) -> Result<ProblemInstance> {
    check_version(doc.format_version, "timetable")?;
    let net = &network;
    let mut stations = Vec::new();
    let mut station_ix = BTreeMap::new();
    for (i, s) in doc.stations.into_iter().enumerate() {
        if station_ix.insert(s.id.clone(), i).is_some() {
            return Err(Error::Format(format!("stations[{i}].id: duplicate id {}", s.id)));
        }
        let mut edges = BTreeSet::new();
        for (j, e) in s.edges.iter().enumerate() {
            edges.insert(edge_ref(net, e).map_err(|err| Error::Format(format!("stations[{i}].edges[{j}]: {err}")))?);
        }
        stations.push(Station { name: s.id, edges });
    }
    let mut train_ix = BTreeMap::new();
    let mut trains = Vec::new();
    for (i, t) in doc.trains.into_iter().enumerate() {
        if train_ix.insert(t.id.clone(), i).is_some() {
            return Err(Error::Format(format!("trains[{i}].id: duplicate id {}", t.id)));
        }
        trains.push(Train {
            name: t.id,
            length_mm: t.length_mm,
            v_max_mm_s: t.v_max_mm_s,
            accel_mm_s2: t.accel_mm_s2,
            decel_mm_s2: t.decel_mm_s2,
            tim: t.tim,
        });
    }
    let mut requests: Vec<Option<TimetableRequest>> = vec![None; trains.len()];
    for (i, r) in doc.requests.into_iter().enumerate() {
        let at = |field: &str, err: Error| Error::Format(format!("requests[{i}].{field}: {err}"));
        let train = *train_ix
            .get(&r.train)
            .ok_or_else(|| at("train", Error::UnknownTrain(r.train.clone())))?;
        let mut stops = Vec::new();
        for (j, s) in r.stops.iter().enumerate() {
            let station = *station_ix
                .get(&s.station)
                .ok_or_else(|| at(&format!("stops[{j}].station"), Error::UnknownStation(s.station.clone())))?;
            stops.push(Stop {
                station,
                arrival: window(s.arrival_ms),
                departure: window(s.departure_ms),
                min_dwell_ms: s.min_dwell_ms,
            });
        }
        let route = match &r.route {
            None => None,
            Some(names) => Some(
                names
                    .iter()
                    .enumerate()
                    .map(|(j, e)| edge_ref(net, e).map_err(|err| at(&format!("route[{j}]"), err)))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let req = TimetableRequest {
            train,
            entry: vertex_ref(net, &r.entry).map_err(|e| at("entry", e))?,
            entry_window: window(r.entry_window_ms),
            exit: vertex_ref(net, &r.exit).map_err(|e| at("exit", e))?,
            exit_window: window(r.exit_window_ms),
            stops,
            route,
            weight: r.weight,
            optional: r.optional,
        };
        if requests[train].replace(req).is_some() {
            return Err(Error::Format(format!("requests[{i}].train: second request for {}", r.train)));
        }
    }
    let requests = requests
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or_else(|| Error::Format(format!("requests: no request for train {}", trains[i].name))))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProblemInstance {
        network,
        stations,
        trains,
        requests,
        k_max: doc.k_max,
        config: solver_from_doc(doc.solver),
    })
}

pub fn network_to_json(net: &RailwayNetwork) -> String {
    render(&network_doc(net))
}

/// Parses a network; structural validation is left to the caller.
pub fn network_from_json(text: &str) -> Result<RailwayNetwork> {
    network_from_doc(parse(text)?)
}

/// The timetable part of an instance (stations, trains, requests, budget,
/// solver settings).
pub fn timetable_to_json(inst: &ProblemInstance) -> String {
    render(&timetable_doc(inst))
}

/// Combines a network with a timetable document and validates the result.
pub fn instance_from_json(network: RailwayNetwork, timetable: &str) -> Result<ProblemInstance> {
    let inst = instance_from_docs(network, parse(timetable)?)?;
    inst.validate()?;
    Ok(inst)
}

pub fn bundle_to_json(inst: &ProblemInstance) -> String {
    render(&BundleDoc {
        format_version: FORMAT_VERSION,
        network: network_doc(&inst.network),
        timetable: timetable_doc(inst),
    })
}

pub fn bundle_from_json(text: &str) -> Result<ProblemInstance> {
    let doc: BundleDoc = parse(text)?;
    check_version(doc.format_version, "bundle")?;
    let inst = instance_from_docs(network_from_doc(doc.network)?, doc.timetable)?;
    inst.validate()?;
    Ok(inst)
}

fn certificate_doc(inst: &ProblemInstance, cert: &Certificate, cuts: Option<&[Cut]>) -> Result<CertificateDoc> {
    let mut net = inst.network.clone();
    let mut stations = inst.stations.clone();
    let mut operators = Vec::new();
    for op in &cert.operators {
        if !net.has_edge(op.edge) {
            return Err(Error::UnknownEdge(format!("#{}", op.edge.0)));
        }
        operators.push(OperatorRec { edge: net.edge(op.edge).name.clone(), rho: [*op.rho.numer(), *op.rho.denom()] });
        let a = apply_vss_operator(&net, &stations, op)?;
        net = a.network;
        stations = a.stations;
    }
    let train_name = |i: usize| {
        inst.trains
            .get(i)
            .map(|t| t.name.clone())
            .ok_or_else(|| Error::UnknownTrain(format!("#{i}")))
    };
    let mut timelines = Vec::new();
    for tl in &cert.timelines {
        let mut samples = Vec::new();
        for s in &tl.samples {
            let mut intervals = Vec::new();
            for iv in &s.state.range.intervals {
                if !net.has_edge(iv.edge) {
                    return Err(Error::UnknownEdge(format!("#{}", iv.edge.0)));
                }
                intervals.push(IntervalRec { edge: net.edge(iv.edge).name.clone(), from_mm: iv.from_mm, to_mm: iv.to_mm });
            }
            samples.push(SampleRec {
                t_ms: s.t_ms,
                s_in_mm: s.state.range.s_in_mm,
                intervals,
                s_out_mm: s.state.range.s_out_mm,
                v_mm_s: s.state.v_mm_s,
            });
        }
        timelines.push(TimelineRec { train: train_name(tl.train)?, samples });
    }
    let o = &cert.objective;
    Ok(CertificateDoc {
        format_version: FORMAT_VERSION,
        cuts: cuts.map(|cs| {
            cs.iter()
                .map(|c| CutRec { edge: inst.network.edge(c.edge).name.clone(), offset_mm: c.offset_mm })
                .collect()
        }),
        operators,
        timelines,
        objective: ObjectiveRec {
            travel_sum_ms: o.travel_sum_ms,
            travel_max_ms: o.travel_max_ms,
            routed_optional: o.routed_optional.iter().map(|&i| train_name(i)).collect::<Result<_>>()?,
            operator_count: o.operator_count,
        },
    })
}

fn certificate_from_doc(inst: &ProblemInstance, doc: CertificateDoc) -> Result<(Certificate, Option<Vec<Cut>>)> {
    check_version(doc.format_version, "certificate")?;
    let mut net = inst.network.clone();
    let mut stations = inst.stations.clone();
    let mut operators = Vec::new();
    for (i, o) in doc.operators.iter().enumerate() {
        let at = |err: Error| Error::Format(format!("operators[{i}]: {err}"));
        if o.rho[1] == 0 {
            return Err(Error::Format(format!("operators[{i}].rho: zero denominator")));
        }
        let op = VssOperator { edge: net.edge_id(&o.edge).map_err(at)?, rho: Ratio::new(o.rho[0], o.rho[1]) };
        let a = apply_vss_operator(&net, &stations, &op).map_err(at)?;
        net = a.network;
        stations = a.stations;
        operators.push(op);
    }
    let train_ix = |name: &str| {
        inst.trains
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| Error::UnknownTrain(name.to_string()))
    };
    let mut timelines = Vec::new();
    let mut seen = HashSet::new();
    for (i, tl) in doc.timelines.iter().enumerate() {
        let train = train_ix(&tl.train).map_err(|e| Error::Format(format!("timelines[{i}].train: {e}")))?;
        if !seen.insert(train) {
            return Err(Error::Format(format!("timelines[{i}].train: duplicate timeline for {}", tl.train)));
        }
        let mut samples = Vec::new();
        for (j, s) in tl.samples.iter().enumerate() {
            let mut intervals = Vec::new();
            for (k, iv) in s.intervals.iter().enumerate() {
                let edge = net
                    .edge_id(&iv.edge)
                    .map_err(|e| Error::Format(format!("timelines[{i}].samples[{j}].intervals[{k}].edge: {e}")))?;
                intervals.push(TrackInterval::new(edge, iv.from_mm, iv.to_mm));
            }
            samples.push(Sample {
                t_ms: s.t_ms,
                state: TrainState {
                    range: TrackRange { s_in_mm: s.s_in_mm, intervals, s_out_mm: s.s_out_mm },
                    v_mm_s: s.v_mm_s,
                },
            });
        }
        timelines.push(RouteTimeline { train, samples });
    }
    let o = doc.objective;
    let objective = Objectives {
        travel_sum_ms: o.travel_sum_ms,
        travel_max_ms: o.travel_max_ms,
        routed_optional: o
            .routed_optional
            .iter()
            .map(|n| train_ix(n))
            .collect::<Result<_>>()
            .map_err(|e| Error::Format(format!("objective.routed_optional: {e}")))?,
        operator_count: o.operator_count,
    };
    let cuts = match doc.cuts {
        None => None,
        Some(cs) => Some(
            cs.iter()
                .enumerate()
                .map(|(i, c)| {
                    let edge = inst.network.edge_id(&c.edge).map_err(|e| Error::Format(format!("cuts[{i}].edge: {e}")))?;
                    Ok(Cut { edge, offset_mm: c.offset_mm })
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    Ok((Certificate { operators, timelines, objective }, cuts))
}

/// Operator edges name the network as changed by the preceding operators;
/// timeline edges name the network after all operators.
pub fn certificate_to_json(inst: &ProblemInstance, cert: &Certificate) -> Result<String> {
    Ok(render(&certificate_doc(inst, cert, None)?))
}

pub fn certificate_from_json(inst: &ProblemInstance, text: &str) -> Result<Certificate> {
    Ok(certificate_from_doc(inst, parse(text)?)?.0)
}

/// A certificate document with the chosen cuts (on the original network)
/// in an extra `cuts` field.
pub fn design_to_json(inst: &ProblemInstance, sol: &DesignSolution) -> Result<String> {
    Ok(render(&certificate_doc(inst, &sol.certificate, Some(&sol.cuts))?))
}

pub fn design_from_json(inst: &ProblemInstance, text: &str) -> Result<DesignSolution> {
    let (certificate, cuts) = certificate_from_doc(inst, parse(text)?)?;
    let cuts = cuts.ok_or_else(|| Error::Format("cuts: missing field".into()))?;
    Ok(DesignSolution { cuts, operators: certificate.operators.clone(), certificate })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn in_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Loads either a bundle (`timetable` absent) or a network plus timetable.
pub fn load_instance(network_or_bundle: &Path, timetable: Option<&Path>) -> Result<ProblemInstance> {
    let text = read(network_or_bundle)?;
    match timetable {
        None => in_file(network_or_bundle, bundle_from_json(&text)),
        Some(tt) => {
            let net = in_file(network_or_bundle, network_from_json(&text))?;
            in_file(tt, instance_from_json(net, &read(tt)?))
        }
    }
}

pub fn load_certificate(inst: &ProblemInstance, path: &Path) -> Result<Certificate> {
    in_file(path, certificate_from_json(inst, &read(path)?))
}

pub fn load_design(inst: &ProblemInstance, path: &Path) -> Result<DesignSolution> {
    in_file(path, design_from_json(inst, &read(path)?))
}
