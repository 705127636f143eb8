mod common;

#[test]
fn classify_batch_matches_nested_loop_oracle() {
    common::algorithm_oracle(200).unwrap();
}

#[test]
fn metrics_match_independent_computation() {
    common::metrics_oracle(1000).unwrap();
}

#[test]
fn mann_whitney_oracle_on_known_cases() {
    assert_eq!(common::oracle_auc(&[0.9, 0.1], &[true, false]), Some(1.0));
    assert_eq!(common::oracle_auc(&[0.5, 0.5], &[true, false]), Some(0.5));
    assert_eq!(common::oracle_auc(&[0.5, 0.5], &[true, true]), None);
}

#[test]
fn binary_mcc_oracle_on_known_case() {
    // tp 2, tn 1, fp 1, fn 0
    let v = common::oracle_mcc_binary(&[1, 1, 0, 0], &[1, 1, 1, 0]);
    assert!((v - 2.0 / 12f64.sqrt()).abs() < 1e-15);
}
