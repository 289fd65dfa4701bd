use mll_core::family::registry_entry;
use mll_core::optimizer::{run, Budget, OptimizerConfig, RunRecord, SignPolicy};

#[test]
fn evaluation_budgets_are_exact() {
    let f = registry_entry("demo").unwrap();
    let rec = run(&f, &OptimizerConfig::evaluations(4, 1_000, 10_500)).unwrap();
    assert_eq!(rec.evaluations, 10_500);
    assert_eq!(rec.restart_count, 11);
    assert!(rec.best_value.is_finite());
    assert!(rec.best_ladder.is_some());
}

#[test]
fn trace_is_strictly_decreasing() {
    let f = registry_entry("geo2").unwrap();
    let rec = run(&f, &OptimizerConfig::evaluations(5, 5_000, 50_000)).unwrap();
    assert!(rec
        .trace
        .windows(2)
        .all(|w| w[1].value < w[0].value && w[1].evaluation > w[0].evaluation));
    assert_eq!(rec.trace.last().unwrap().value, rec.best_value);
}

#[test]
fn thread_count_does_not_change_the_record() {
    let f = registry_entry("cross2").unwrap();
    let mut one = OptimizerConfig::evaluations(6, 4_000, 40_000);
    one.threads = Some(1);
    let mut many = one.clone();
    many.threads = Some(4);
    let (a, b) = (run(&f, &one).unwrap(), run(&f, &many).unwrap());
    assert_eq!(a.trace_digest, b.trace_digest);
    assert_eq!(a.best_point, b.best_point);
}

#[test]
fn different_seeds_differ() {
    let f = registry_entry("geo2").unwrap();
    let a = run(&f, &OptimizerConfig::evaluations(1, 5_000, 20_000)).unwrap();
    let b = run(&f, &OptimizerConfig::evaluations(2, 5_000, 20_000)).unwrap();
    assert_ne!(a.trace_digest, b.trace_digest);
}

#[test]
fn record_json_round_trip() {
    let f = registry_entry("demo").unwrap();
    let rec = run(&f, &OptimizerConfig::evaluations(7, 2_000, 6_000)).unwrap();
    let back = RunRecord::from_json(&rec.to_json().unwrap()).unwrap();
    assert_eq!(back.to_json().unwrap(), rec.to_json().unwrap());
}

#[test]
fn pinned_signs_hold() {
    let f = registry_entry("cross1").unwrap();
    let l = f.dimension().1;
    let mut cfg = OptimizerConfig::evaluations(8, 2_000, 8_000);
    let signs: Vec<i8> = (0..l).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    cfg.sign_policy = SignPolicy::Pinned(signs.clone());
    let rec = run(&f, &cfg).unwrap();
    assert_eq!(rec.best_point.signs, signs);
    assert_eq!(rec.per_sign_best.len(), 1);
}

#[test]
fn invalid_configs_are_rejected() {
    let f = registry_entry("geo2").unwrap();
    let mut cfg = OptimizerConfig::evaluations(1, 1_000, 1_000);
    cfg.step_max = 0.0;
    assert!(run(&f, &cfg).is_err());
    let mut cfg = OptimizerConfig::evaluations(1, 1_000, 1_000);
    cfg.mask_a = Some(1.5);
    assert!(run(&f, &cfg).is_err());
    let mut cfg = OptimizerConfig::evaluations(1, 1_000, 1_000);
    cfg.mask_a = Some(0.5);
    assert!(run(&registry_entry("cross1").unwrap(), &cfg).is_err());
    let mut cfg = OptimizerConfig::evaluations(1, 1_000, 1_000);
    cfg.total = Budget {
        evaluations: None,
        seconds: None,
    };
    assert!(run(&f, &cfg).is_err());
}

#[test]
fn coercion_keeps_the_reference_reachable() {
    let f = registry_entry("geo2").unwrap();
    let mut cfg = OptimizerConfig::evaluations(9, 5_000, 20_000);
    cfg.coercion = 16.0;
    let rec = run(&f, &cfg).unwrap();
    assert!(rec.best_value.is_finite());
    assert!(rec.best_point.r.iter().all(|x| (0.0..=1.0).contains(x)));
}
