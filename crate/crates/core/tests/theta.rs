mod common;

use ellstab::qspecial::{phi, qpochhammer, theta, theta_three_term, MultPoint, QContext};
use ellstab::scalar::{cx, cx_to_f64};
use num_complex::Complex64;
use proptest::prelude::*;

fn ctx(log_q: (f64, f64)) -> QContext<f64> {
    QContext::from_log(cx(log_q.0, log_q.1), f64::EPSILON).unwrap()
}

fn log_q() -> impl Strategy<Value = (f64, f64)> {
    (0.02f64.ln()..0.5f64.ln(), -3.1f64..3.1)
}

fn log_x() -> impl Strategy<Value = (f64, f64)> {
    (-2.5f64..2.5, -3.1f64..3.1)
}

fn pt(u: (f64, f64)) -> MultPoint<f64> {
    MultPoint::new(cx(u.0, u.1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_bilateral_series(lq in log_q(), u in log_x()) {
        let c = ctx(lq);
        let got = theta(pt(u), &c).unwrap();
        let want = common::theta(Complex64::new(u.0, u.1), Complex64::new(lq.0, lq.1));
        // Relative to the size of the theta function near `u`, so zeros do not blow it up.
        let scale = want.norm().max(common::theta(Complex64::new(u.0 + 0.5, u.1), Complex64::new(lq.0, lq.1)).norm());
        prop_assert!((got - want).norm() / scale < 1e-11, "{got} vs {want}");
    }

    #[test]
    fn odd(lq in log_q(), u in log_x()) {
        let c = ctx(lq);
        let a = theta(pt(u), &c).unwrap();
        let b = theta(pt(u).inv(), &c).unwrap();
        prop_assert!((a + b).norm() <= 1e-12 * a.norm().max(1e-300));
    }

    #[test]
    fn quasi_periodic(lq in log_q(), u in log_x()) {
        let c = ctx(lq);
        let x = pt(u);
        let lhs = theta(x.qshift(1, &c), &c).unwrap();
        let factor = -(-(c.log_q() * 0.5 + x.u)).exp();
        let rhs = factor * theta(x, &c).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1e-300));
    }

    #[test]
    fn three_term_vanishes(lq in log_q(), a in log_x(), b in log_x(), d in log_x()) {
        let r = theta_three_term(pt(a), pt(b), pt(d), &ctx(lq)).unwrap();
        prop_assert!(r.relative() < 1e-10);
    }

    #[test]
    fn finite_pochhammer_matches_product(lq in log_q(), u in log_x(), d in 0usize..20) {
        let c = ctx(lq);
        let got = qpochhammer(pt(u), d, &c);
        let want = common::pochhammer(Complex64::new(u.0, u.1).exp(), Complex64::new(lq.0, lq.1).exp(), d);
        prop_assert!(common::rel(got, want) < 1e-12);
    }
}

#[test]
fn phi_at_q_is_euler_function() {
    let lq = Complex64::new(0.3f64.ln(), 0.7);
    let c = QContext::<f64>::from_log(lq, f64::EPSILON).unwrap();
    let got = phi(MultPoint::new(lq), &c).unwrap();
    assert!(common::rel(got, common::euler(lq)) < 1e-13);
}

#[test]
fn theta_of_one_vanishes() {
    let c = ctx((0.2f64.ln(), 0.4));
    assert_eq!(theta(MultPoint::one(), &c).unwrap().norm(), 0.0);
}

#[test]
fn single_precision_tracks_double() {
    let lq = (0.25f64.ln(), 1.0);
    let u = (0.4, -0.9);
    let c32 = QContext::<f32>::from_log(cx(lq.0, lq.1), f32::EPSILON).unwrap();
    let got = cx_to_f64(theta(MultPoint::<f32>::new(cx(u.0, u.1)), &c32).unwrap());
    let want = theta(pt(u), &ctx(lq)).unwrap();
    assert!(common::rel(got, want) < 1e-5, "{got} vs {want}");
}

#[test]
fn rejects_unit_modulus() {
    assert!(QContext::<f64>::new(cx(1.0, 0.0)).is_err());
    assert!(QContext::<f64>::new(cx(0.0, 1.2)).is_err());
}
