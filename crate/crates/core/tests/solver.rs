mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use htd_core::kinematics::Train;
use htd_core::network::{Border, NetworkBuilder};
use htd_core::solver::{
    brute_force_verify, capacity, check_certificate, optimize, verify, BruteCaps, Objective, ProblemInstance,
    SolverConfig, Verdict,
};
use htd_core::timetable::{TimeWindow, TimetableRequest};
use htd_core::Error;

use common::s;

/// vl - e1 - v1 - e2 - v2 - e3 - vr, 30 m each, every vertex a TTD border.
fn line(headway_s: i64) -> ProblemInstance {
    let mut b = NetworkBuilder::new();
    let vl = b.boundary("vl", s(headway_s));
    let v1 = b.vertex("v1", Border::Ttd);
    let v2 = b.vertex("v2", Border::Ttd);
    let vr = b.boundary("vr", s(headway_s));
    b.track("e1", "e1r", vl, v1, 30_000);
    b.track("e2", "e2r", v1, v2, 30_000);
    b.track("e3", "e3r", v2, vr, 30_000);
    b.allow_straight_through();
    let network = b.build();
    ProblemInstance {
        network,
        stations: vec![],
        trains: vec![],
        requests: vec![],
        k_max: None,
        config: SolverConfig::default(),
    }
}

fn add_train(inst: &mut ProblemInstance, entry: TimeWindow, exit: TimeWindow, optional: bool) {
    let i = inst.trains.len();
    inst.trains.push(Train {
        name: format!("t{i}"),
        length_mm: 5000,
        v_max_mm_s: 5000,
        accel_mm_s2: 1000,
        decel_mm_s2: 1000,
        tim: true,
    });
    inst.requests.push(TimetableRequest {
        train: i,
        entry: inst.network.vertex_id("vl").unwrap(),
        entry_window: entry,
        exit: inst.network.vertex_id("vr").unwrap(),
        exit_window: exit,
        stops: vec![],
        route: None,
        weight: 1,
        optional,
    });
}

fn assert_checks(inst: &ProblemInstance, v: &Verdict) {
    let cert = v.certificate().expect("feasible");
    let rep = check_certificate(inst, cert).unwrap();
    assert!(rep.is_ok(), "{rep}");
}

#[test]
fn single_train_on_empty_line() {
    let mut inst = line(0);
    add_train(&mut inst, TimeWindow::at(0), TimeWindow::new(0, s(300)), false);
    let v = verify(&inst).unwrap();
    assert_checks(&inst, &v);
    let o = optimize(&inst, Objective::WeightedSum).unwrap();
    assert_checks(&inst, &o);
    let cert = o.certificate().unwrap();
    // reaches and holds top speed on the way
    assert!(cert.timelines[0].samples.iter().any(|s| s.state.v_mm_s == 5000));
    assert!(cert.objective.travel_sum_ms <= v.certificate().unwrap().objective.travel_sum_ms);
    assert_eq!(cert.objective.travel_sum_ms, cert.objective.travel_max_ms);
}

#[test]
fn exit_before_entry_is_infeasible() {
    let mut inst = line(0);
    add_train(&mut inst, TimeWindow::at(s(100)), TimeWindow::at(s(10)), false);
    assert_eq!(verify(&inst).unwrap(), Verdict::Infeasible);
    assert_eq!(brute_force_verify(&inst, BruteCaps { max_states: 10_000, ..BruteCaps::default() }).unwrap(), Verdict::Infeasible);
}

#[test]
fn no_trains_is_feasible() {
    let inst = line(0);
    assert!(verify(&inst).unwrap().is_feasible());
    assert!(brute_force_verify(&inst, BruteCaps::default()).unwrap().is_feasible());
}

#[test]
fn entry_headway_separates_trains() {
    let mut inst = line(60);
    add_train(&mut inst, TimeWindow::at(0), TimeWindow::new(0, s(600)), false);
    add_train(&mut inst, TimeWindow::at(s(30)), TimeWindow::new(0, s(600)), false);
    assert_eq!(verify(&inst).unwrap(), Verdict::Infeasible);
    inst.requests[1].entry_window = TimeWindow::at(s(60));
    let v = verify(&inst).unwrap();
    assert_checks(&inst, &v);
}

#[test]
fn optional_train_with_disjoint_window_is_routed() {
    let mut inst = line(0);
    add_train(&mut inst, TimeWindow::at(0), TimeWindow::new(0, s(100)), false);
    add_train(&mut inst, TimeWindow::at(s(200)), TimeWindow::new(s(200), s(300)), true);
    let v = capacity(&inst).unwrap();
    assert_checks(&inst, &v);
    assert_eq!(v.certificate().unwrap().objective.routed_optional, vec![1]);
    // plain verification ignores optional trains
    assert_eq!(verify(&inst).unwrap().certificate().unwrap().timelines.len(), 1);
}

#[test]
fn capacity_without_optional_trains_is_verify() {
    let mut inst = line(0);
    add_train(&mut inst, TimeWindow::at(0), TimeWindow::new(0, s(100)), false);
    let v = capacity(&inst).unwrap();
    assert_checks(&inst, &v);
    assert!(v.certificate().unwrap().objective.routed_optional.is_empty());
}

#[test]
fn caps_are_reported() {
    let mut inst = line(0);
    for _ in 0..4 {
        add_train(&mut inst, TimeWindow::at(0), TimeWindow::new(0, s(100)), false);
    }
    assert!(matches!(brute_force_verify(&inst, BruteCaps::default()), Err(Error::CapsExceeded(_))));
}

#[test]
fn node_limit_is_a_resource_limit() {
    let mut inst = line(0);
    add_train(&mut inst, TimeWindow::at(0), TimeWindow::new(0, s(300)), false);
    inst.config.node_limit = 10;
    assert!(matches!(verify(&inst).unwrap(), Verdict::ResourceLimit(_)));
}

#[test]
fn brute_force_agrees_with_verify() {
    let caps = BruteCaps::default();
    let mut compared = 0;
    let mut feasible = 0;
    for seed in 0..60 {
        let inst = common::gen::tiny_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let brute = match brute_force_verify(&inst, caps) {
            Ok(v) => v,
            Err(Error::CapsExceeded(_)) => continue,
            Err(e) => panic!("seed {seed}: {e}"),
        };
        let v = verify(&inst).unwrap();
        assert_eq!(brute.is_feasible(), v.is_feasible(), "seed {seed}");
        if v.is_feasible() {
            feasible += 1;
            assert_checks(&inst, &v);
            assert_checks(&inst, &brute);
        }
        compared += 1;
    }
    assert!(compared >= 30, "only {compared} instances within caps");
    assert!(feasible > 0 && feasible < compared, "{feasible} of {compared} feasible");
}

/// Speed levels are multiples of grid/dt and change by a*dt^2/grid levels
/// per step, so halving the step quarters the grid to keep both integral.
#[test]
fn halving_the_time_step_keeps_feasibility() {
    let mut single = line(0);
    add_train(&mut single, TimeWindow::at(0), TimeWindow::new(0, s(300)), false);
    let example9 = common::example9();
    let e10 = example9.network.edge_id("e10").unwrap();
    let (split, _) = example9.apply_cuts(&[htd_core::operator::Cut { edge: e10, offset_mm: 5000 }]).unwrap();
    let mut fixtures = vec![single, common::follow(40, false), split];
    fixtures.extend((0..20).map(|seed| common::gen::tiny_instance(&mut ChaCha8Rng::seed_from_u64(seed))));
    let mut checked = 0;
    for (i, inst) in fixtures.iter().enumerate() {
        if !verify(inst).unwrap().is_feasible() {
            continue;
        }
        let mut fine = inst.clone();
        fine.config.dt_ms /= 2;
        fine.config.grid_mm /= 4;
        let v = verify(&fine).unwrap();
        assert!(v.is_feasible(), "fixture {i} infeasible at dt {}", fine.config.dt_ms);
        assert_checks(&fine, &v);
        checked += 1;
    }
    assert!(checked >= 10);
}

#[test]
fn immobile_train_is_rejected() {
    let mut inst = line(0);
    add_train(&mut inst, TimeWindow::at(0), TimeWindow::new(0, s(300)), false);
    inst.config.dt_ms = 500;
    inst.config.grid_mm = 500;
    let err = verify(&inst).unwrap_err();
    assert!(matches!(err, Error::InvalidInstance(_)), "{err}");
    inst.config.grid_mm = 250;
    assert!(verify(&inst).unwrap().is_feasible());
}

#[test]
fn speed_quantum_must_be_whole() {
    let mut inst = line(0);
    add_train(&mut inst, TimeWindow::at(0), TimeWindow::new(0, s(300)), false);
    inst.config.dt_ms = 700;
    inst.config.grid_mm = 100;
    assert!(matches!(verify(&inst), Err(Error::InvalidInstance(_))));
}
