use tcnlab::verify::{run_suite, Suite};

fn assert_all_pass(suite: Suite) {
    let checks = run_suite(suite).unwrap();
    assert!(!checks.is_empty());
    for c in &checks {
        println!("{c}");
    }
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
    assert!(failed.is_empty(), "failed checks: {failed:#?}");
}

#[test]
fn gradcheck_suite_passes() {
    assert_all_pass(Suite::Gradcheck);
}

#[test]
fn causality_suite_passes() {
    assert_all_pass(Suite::Causality);
}

#[test]
fn baseline_suite_passes() {
    assert_all_pass(Suite::Baselines);
}
