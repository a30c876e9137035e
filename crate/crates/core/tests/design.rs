mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use htd_core::design::{generate_vss, maximize_capacity, optimize_schedule, DesignConfig, DesignVerdict};
use htd_core::solver::{check_certificate, verify, Objective, Verdict};

fn replays(inst: &htd_core::solver::ProblemInstance, v: &DesignVerdict) {
    let sol = v.solution().expect("solution");
    assert_eq!(sol.certificate.operators, sol.operators);
    assert_eq!(sol.certificate.objective.operator_count, sol.operators.len());
    let rep = check_certificate(inst, &sol.certificate).unwrap();
    assert!(rep.is_ok(), "{rep}");
}

#[test]
fn gen_returns_empty_layout_when_already_feasible() {
    let inst = common::follow(40, false);
    assert!(verify(&inst).unwrap().is_feasible());
    let v = generate_vss(&inst, &DesignConfig::default()).unwrap();
    replays(&inst, &v);
    assert!(v.solution().unwrap().cuts.is_empty());
}

#[test]
fn gen_is_minimal_on_follow_instance() {
    let inst = common::follow(5, false);
    assert_eq!(verify(&inst).unwrap(), Verdict::Infeasible);
    let v = generate_vss(&inst, &DesignConfig::default()).unwrap();
    replays(&inst, &v);
    let k = v.solution().unwrap().cuts.len();
    assert!(k >= 1);
    // every layout with one cut fewer is infeasible
    let cands = htd_core::design::candidate_cuts(&inst, inst.config.grid_mm);
    if k == 2 {
        for c in &cands {
            let (a, _) = inst.apply_cuts(&[*c]).unwrap();
            assert!(!verify(&a).unwrap().is_feasible());
        }
    }
    let slack = generate_vss(&inst, &DesignConfig { slack: true, ..DesignConfig::default() }).unwrap();
    replays(&inst, &slack);
    assert!(slack.solution().unwrap().cuts.len() >= k);
}

#[test]
fn gen_on_unbreakable_station_is_infeasible() {
    let mut inst = common::example9();
    inst.network = common::example9_network_marking(&[2, 7, 5, 10]);
    assert_eq!(generate_vss(&inst, &DesignConfig::default()).unwrap(), DesignVerdict::Infeasible);
}

#[test]
fn gen_respects_operator_cap() {
    let inst = common::follow(5, false);
    let cfg = DesignConfig { max_operators: Some(0), ..DesignConfig::default() };
    assert!(matches!(generate_vss(&inst, &cfg).unwrap(), DesignVerdict::CapReached { cap: 0 }));
}

#[test]
fn opt_budget_helps_follow_instance() {
    let cfg = DesignConfig::default();
    let mut inst = common::follow(15, false);
    inst.k_max = Some(0);
    let k0 = optimize_schedule(&inst, Objective::WeightedSum, &cfg).unwrap();
    inst.k_max = Some(1);
    let k1 = optimize_schedule(&inst, Objective::WeightedSum, &cfg).unwrap();
    replays(&inst, &k1);
    let v1 = k1.solution().unwrap().certificate.objective.travel_sum_ms;
    match k0.solution() {
        Some(s) => assert!(v1 < s.certificate.objective.travel_sum_ms, "{v1} vs {}", s.certificate.objective.travel_sum_ms),
        None => assert_eq!(k0, DesignVerdict::Infeasible),
    }
    let m1 = optimize_schedule(&inst, Objective::MaxTravel, &cfg).unwrap();
    replays(&inst, &m1);
}

#[test]
fn cap_routes_optional_train_only_with_a_border() {
    let cfg = DesignConfig::default();
    let mut inst = common::follow(5, true);
    inst.k_max = Some(0);
    let k0 = maximize_capacity(&inst, &cfg).unwrap();
    replays(&inst, &k0);
    assert!(k0.solution().unwrap().certificate.objective.routed_optional.is_empty());
    inst.k_max = Some(1);
    let k1 = maximize_capacity(&inst, &cfg).unwrap();
    replays(&inst, &k1);
    assert_eq!(k1.solution().unwrap().certificate.objective.routed_optional, vec![1]);
}

#[test]
fn budget_is_required() {
    let mut inst = common::follow(5, false);
    inst.k_max = None;
    assert!(optimize_schedule(&inst, Objective::WeightedSum, &DesignConfig::default()).is_err());
}

#[test]
fn random_instances_are_monotone_in_budget() {
    let cfg = DesignConfig { stride_mm: Some(10_000), ..DesignConfig::default() };
    for seed in 0..8 {
        let inst = common::gen::random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut prev_obj: Option<i64> = None;
        let mut prev_cap: Option<usize> = None;
        for k in 0..=2 {
            let mut i = inst.clone();
            i.k_max = Some(k);
            let o = optimize_schedule(&i, Objective::WeightedSum, &cfg).unwrap();
            let obj = o.solution().map(|s| s.certificate.objective.travel_sum_ms);
            if let Some(p) = prev_obj {
                assert!(obj.is_some_and(|v| v <= p), "seed {seed} k {k}");
            }
            prev_obj = obj.or(prev_obj);
            let c = maximize_capacity(&i, &cfg).unwrap();
            let cap = c.solution().map(|s| s.certificate.objective.routed_optional.len());
            if let Some(p) = prev_cap {
                assert!(cap.is_some_and(|v| v >= p), "seed {seed} k {k}");
            }
            prev_cap = cap.or(prev_cap);
        }
    }
}
