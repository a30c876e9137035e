#![allow(dead_code)]

use std::collections::BTreeSet;

use htd_core::kinematics::Train;
use htd_core::network::{Border, EdgeId, NetworkBuilder, RailwayNetwork};
use htd_core::solver::{ProblemInstance, RouteMode, SolverConfig};
use htd_core::timetable::{Station, Stop, TimeWindow, TimetableRequest};

pub fn s(sec: i64) -> i64 {
    sec * 1000
}

/// Two-track station between two single-track lines joined by turnouts at
/// v3 and v8. Upper station track e5, lower e10.
pub fn example9_network() -> RailwayNetwork {
    example9_network_marking(&[2, 7])
}

/// Same layout with the TTDs of tracks `e{n}` marked unbreakable.
pub fn example9_network_marking(unbreakable: &[usize]) -> RailwayNetwork {
    let mut b = NetworkBuilder::new();
    let vl = b.boundary("vl", s(120));
    let mut v = vec![vl];
    for i in 2..=13 {
        let border = if i == 3 || i == 8 { Border::None } else { Border::Ttd };
        v.push(b.vertex(&format!("v{i}"), border));
    }
    let vr = b.boundary("vr", s(120));
    // drawing positions, x in metres / 4
    for (n, x, y) in [
        (1, 0.0, 0.0),
        (2, 10.0, 0.0),
        (3, 13.0, 0.0),
        (4, 16.0, 1.0),
        (5, 22.0, 1.0),
        (6, 32.0, 1.0),
        (7, 38.0, 1.0),
        (8, 41.0, 0.0),
        (9, 16.0, -1.0),
        (10, 22.0, -1.0),
        (11, 32.0, -1.0),
        (12, 38.0, -1.0),
        (13, 44.0, 0.0),
        (14, 54.0, 0.0),
    ] {
        let id = if n == 14 { vr } else { v[n - 1] };
        b.set_hint(id, x / 4.0, y);
    }
    let at = |n: usize| if n == 1 { v[0] } else if n == 14 { vr } else { v[n - 1] };
    let mut tracks = Vec::new();
    for (n, from, to, len) in [
        (1, 1, 2, 10),
        (2, 2, 3, 3),
        (3, 3, 4, 3),
        (4, 4, 5, 6),
        (5, 5, 6, 10),
        (6, 6, 7, 6),
        (7, 7, 8, 3),
        (8, 3, 9, 3),
        (9, 9, 10, 6),
        (10, 10, 11, 10),
        (11, 11, 12, 6),
        (12, 12, 8, 3),
        (13, 8, 13, 3),
        (14, 13, 14, 10),
    ] {
        let (f, r) = b.track(&format!("e{n}"), &format!("e{n}r"), at(from), at(to), len * 1000);
        tracks.push((f, r));
    }
    let e = |n: usize| tracks[n - 1];
    // plain line segments
    for (a, c) in [(1, 2), (3, 4), (4, 5), (5, 6), (6, 7), (8, 9), (9, 10), (10, 11), (11, 12), (13, 14)] {
        b.allow(e(a).0, &[e(c).0]);
        b.allow(e(c).1, &[e(a).1]);
    }
    // turnouts
    b.allow(e(2).0, &[e(3).0, e(8).0]);
    b.allow(e(3).1, &[e(2).1]);
    b.allow(e(8).1, &[e(2).1]);
    b.allow(e(7).0, &[e(13).0]);
    b.allow(e(12).0, &[e(13).0]);
    b.allow(e(13).1, &[e(7).1, e(12).1]);
    for &n in unbreakable {
        b.mark_unbreakable(e(n).0);
    }
    b.build()
}

pub fn example9_train(name: &str) -> Train {
    Train { name: name.into(), length_mm: 4000, v_max_mm_s: 2000, accel_mm_s2: 1000, decel_mm_s2: 1000, tim: true }
}

pub fn example9() -> ProblemInstance {
    let net = example9_network();
    let id = |n: &str| net.edge_id(n).unwrap();
    let station = Station {
        name: "S".into(),
        edges: ["e5", "e5r", "e10", "e10r"].iter().map(|n| id(n)).collect::<BTreeSet<EdgeId>>(),
    };
    let vl = net.vertex_id("vl").unwrap();
    let vr = net.vertex_id("vr").unwrap();
    let req = |train, entry, t_in: i64, exit, t_out: i64, arr: (i64, i64), dep: (i64, i64), dwell: i64| TimetableRequest {
        train,
        entry,
        entry_window: TimeWindow::at(s(t_in)),
        exit,
        exit_window: TimeWindow::at(s(t_out)),
        stops: vec![Stop {
            station: 0,
            arrival: TimeWindow::new(s(arr.0), s(arr.1)),
            departure: TimeWindow::new(s(dep.0), s(dep.1)),
            min_dwell_ms: s(dwell),
        }],
        route: None,
        weight: 1,
        optional: false,
    };
    let requests = vec![
        req(0, vl, 120, vr, 645, (120, 240), (300, 645), 60),
        req(1, vl, 0, vr, 420, (0, 120), (300, 420), 180),
        req(2, vr, 0, vl, 420, (0, 180), (300, 420), 120),
    ];
    ProblemInstance {
        network: net,
        stations: vec![station],
        trains: vec![example9_train("tr1"), example9_train("tr2"), example9_train("tr3")],
        requests,
        k_max: Some(1),
        config: SolverConfig { route_mode: RouteMode::Free, ..SolverConfig::default() },
    }
}

pub mod checks;
pub mod gen;

/// Line vl - e1 (20 m) - v1 - e2 (20 m) - vr, one TTD (v1 has no border),
/// station on e2. `tr0` enters at 0 and stops on e2 for 10 s; `tr1` enters
/// exactly at `t1` seconds.
pub fn follow(t1: i64, second_optional: bool) -> ProblemInstance {
    let mut b = NetworkBuilder::new();
    let vl = b.boundary("vl", 0);
    let v1 = b.vertex("v1", Border::None);
    let vr = b.boundary("vr", 0);
    b.track("e1", "e1r", vl, v1, 20_000);
    let (e2, e2r) = b.track("e2", "e2r", v1, vr, 20_000);
    b.allow_straight_through();
    let net = b.build();
    let train = |n: &str| Train { name: n.into(), length_mm: 4000, v_max_mm_s: 2000, accel_mm_s2: 1000, decel_mm_s2: 1000, tim: true };
    let stop = Stop { station: 0, arrival: TimeWindow::new(0, s(60)), departure: TimeWindow::new(0, s(90)), min_dwell_ms: s(10) };
    let req = |train, t0: i64, stops: Vec<Stop>, optional| TimetableRequest {
        train,
        entry: vl,
        entry_window: TimeWindow::at(s(t0)),
        exit: vr,
        exit_window: TimeWindow::new(0, s(120)),
        stops,
        route: None,
        weight: 1,
        optional,
    };
    ProblemInstance {
        network: net,
        stations: vec![Station { name: "S".into(), edges: [e2, e2r].into_iter().collect() }],
        trains: vec![train("tr0"), train("tr1")],
        requests: vec![req(0, 0, vec![stop], false), req(1, t1, vec![], second_optional)],
        k_max: Some(1),
        config: SolverConfig::default(),
    }
}
