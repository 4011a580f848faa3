#[path = "support/fuzz.rs"]
mod fuzz;

#[test]
fn schedule_rules_hold_over_fuzzed_runs() {
    let report = fuzz::fuzz(1000, 77);
    assert_eq!(report.runs, 1000);
    assert!(report.iterations > 5000, "only {} iterations checked", report.iterations);
    assert!(report.cost_violations.is_empty(), "{:?}", report.cost_violations.first());
    assert!(report.violations.is_empty(), "{} violations, first: {:?}", report.violations.len(), &report.violations[..report.violations.len().min(5)]);
}

#[test]
fn message_updates_follow_schedule_size() {
    for seed in [1, 2] {
        fuzz::cost_claim(seed).unwrap();
    }
}
