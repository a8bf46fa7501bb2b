use glasslab::tap::{tap_consistency, TapOptions};
use glasslab::Mixture;

#[test]
fn three_spin_consistency() {
    let r = tap_consistency(&Mixture::pure(3), 2.0, &TapOptions::default()).unwrap();
    let p = r.profile.as_ref().unwrap();
    assert!(r.passed, "{:?}", r.checks);
    assert!(p.sup <= r.solver_value + r.tol);
    assert!(p.bookkeeping_error() < 1e-12);
}

#[test]
fn two_four_consistency() {
    let m = Mixture::new([(2, 0.5), (4, 0.5)]).unwrap();
    let r = tap_consistency(&m, 1.5, &TapOptions::default()).unwrap();
    assert!(r.checks[0].passed, "{:?}", r.checks);
}

#[test]
fn two_spin_rs_consistency() {
    let r = tap_consistency(&Mixture::pure(2), 0.5, &TapOptions::default()).unwrap();
    assert!(r.q_p < 1e-6);
    assert!(r.checks[2].passed);
    assert!(r.passed, "{:?}", r.checks);
}
