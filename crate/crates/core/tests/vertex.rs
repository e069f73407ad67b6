mod common;

use ellstab::draw::Drawer;
use ellstab::envelopes::EnvelopeParams;
use ellstab::suite::vertex_constraints;
use ellstab::vertex::{
    hankel_nodes, hankel_width, separating_log_radius, vertex_integral, vertex_series_value, vertex_tpn,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn vertex_draw(seed: u64, n: usize) -> EnvelopeParams<f64> {
    Drawer::new(seed)
        .draw_with::<f64>(&vertex_constraints(n), |p| {
            (0..n).all(|k| hankel_width(k, p).is_ok() && separating_log_radius(k, p).is_ok())
        })
        .unwrap()
        .1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn coefficients_are_pochhammer_ratios(seed in any::<u64>(), n in 2usize..=4, k in 0usize..4) {
        let k = k % n;
        let p = vertex_draw(seed, n);
        let series = vertex_tpn(k, 10, &p).unwrap();
        let q = p.ctx.q();
        let h = p.hbar().value();
        let step = -q / p.hbar_half.value();
        for (d, c) in series.coeffs.iter().enumerate() {
            let mut want = step.powi((d * n) as i32);
            for ai in &p.a {
                let r = (ai.u - p.a[k].u).exp();
                want *= common::pochhammer(h * r, q, d) / common::pochhammer(q * r, q, d);
            }
            prop_assert!(common::rel(*c, want) < 1e-11, "d = {}", d);
        }
    }
}

#[test]
fn series_matches_contour_integral() {
    for (seed, n) in [(1u64, 2usize), (2, 3)] {
        let p = vertex_draw(seed, n);
        for k in 0..n {
            let series = vertex_series_value(k, 12, &p).unwrap();
            let integral = vertex_integral(k, &p, hankel_nodes(k, &p).unwrap()).unwrap();
            let err = common::rel(Complex64::new(integral.re, integral.im), Complex64::new(series.re, series.im));
            assert!(err < 1e-8, "n = {n}, k = {k}: {err}");
        }
    }
}

#[test]
fn leading_coefficient_is_one() {
    let p = vertex_draw(4, 2);
    assert_eq!(vertex_tpn(0, 0, &p).unwrap().coeffs, vec![Complex64::new(1.0, 0.0)]);
}
