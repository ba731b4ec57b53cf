mod common;

use common::*;
use rbsde::diagnostics::{sandwich_check, SupSampler};
use rbsde::engine::{NodeProblem, Reflection};
use rbsde::runner::{double_limit_study, monotone_limit_check, run_schedule, PenalizationSchedule};

#[test]
fn both_barriers_are_active_on_the_forced_toy() {
    let q = NodeProblem::from_spec(&forced_toy(100))
        .solve(Reflection::CLAMP)
        .unwrap();
    assert!(*q.mean_a.last().unwrap() > 0.1);
    assert!(*q.mean_k.last().unwrap() > 0.1);
}

#[test]
fn stated_toy_never_leaves_zero() {
    let p = NodeProblem::from_spec(&literal_toy(100));
    for r in [
        Reflection::CLAMP,
        Reflection::penalized(4.0, 4.0),
        Reflection::NONE,
    ] {
        let q = p.solve(r).unwrap();
        assert!(q.y.iter().all(|(_, v)| v == 0.0));
    }
}

#[test]
fn iterated_limit_on_forced_toy() {
    let spec = forced_toy(100);
    let schedule = PenalizationSchedule::diagonal(SWEEP.to_vec()).unwrap();
    let d = double_limit_study(&spec, &schedule).unwrap();
    assert_eq!(d.hybrid_monotone_violations, 0);
    assert!(d.intermediates.iter().all(|i| i.within_bound), "{d:#?}");
    assert!(d.m_limit_gap <= 1e-2);
}

#[test]
fn n_sweep_on_put_is_inert() {
    let spec = american_put(50);
    let s = PenalizationSchedule::new(vec![], vec![16.0], vec![4.0, 64.0, 1024.0], false).unwrap();
    let r = run_schedule(&spec, &s, SupSampler::default()).unwrap();
    assert!(r.records.windows(2).all(|w| w[0].y0 == w[1].y0));
}

#[test]
fn sandwich_across_sweep() {
    let p = NodeProblem::from_spec(&forced_toy(60));
    let oracle = p.solve(Reflection::CLAMP).unwrap();
    for &m in &SWEEP {
        for &n in &SWEEP {
            let s = sandwich_check(&p, &oracle, m, n).unwrap();
            assert!(s.passed(), "m = {m}, n = {n}: {s:?}");
        }
    }
}

#[test]
fn upper_reflected_family_meets_limit_conditions() {
    let p = NodeProblem::from_spec(&american_put(100));
    let runs: Vec<_> = SWEEP
        .iter()
        .map(|&m| p.solve(Reflection::upper_clamped(m)).unwrap())
        .collect();
    let rep = monotone_limit_check(&runs, SupSampler::default()).unwrap();
    assert!(rep.passed(), "{rep:?}");
}
