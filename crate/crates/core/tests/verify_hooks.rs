use rabi_lab::acceptance::{run_criterion, ForcedCutoff, VerifyOptions};

#[test]
fn cross_solver_passes_unmutated() {
    let r = run_criterion(4, &VerifyOptions::default()).unwrap();
    assert!(r.passed, "{r}");
}

#[test]
fn injected_kernel_sign_error_fails_cross_solver() {
    let opts = VerifyOptions { inject_d_sign_error: true, ..Default::default() };
    let r = run_criterion(4, &opts).unwrap();
    assert!(!r.passed, "{r}");
}

#[test]
fn forced_small_cutoff_fails_convergence() {
    let opts = VerifyOptions {
        forced_cutoff: Some(ForcedCutoff { q: 2.0, cutoff: 5 }),
        ..Default::default()
    };
    let r = run_criterion(4, &opts).unwrap();
    assert!(!r.passed, "{r}");
    assert!(r.detail.contains("lambda=2"), "{r}");
}
