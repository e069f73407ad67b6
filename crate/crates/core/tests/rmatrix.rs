mod common;

use ellstab::draw::{DrawConstraints, Drawer};
use ellstab::envelopes::EnvelopeParams;
use ellstab::rmatrix::{check_dyb, check_unitarity, r_closed_form, DynWeight, RForm, RMatrix};
use ellstab::scalar::cx_to_f64;
use num_complex::Complex64;
use proptest::prelude::*;

fn draw(seed: u64) -> EnvelopeParams<f64> {
    let c = DrawConstraints { re_box: 1.5, hbar_re_box: 1.5, ..DrawConstraints::with_n(3) };
    Drawer::new(seed).draw::<f64>(&c).unwrap().1
}

/// The 2×2 block of the closed form, assembled from series thetas.
fn oracle_block(u: Complex64, z: Complex64, h: Complex64, lq: Complex64) -> [[Complex64; 2]; 2] {
    let th = |x: Complex64| common::theta(x, lq);
    let pre = 1.0 / th(u - h);
    [
        [pre * th(z + h) * th(z - h) * th(u) / (th(z) * th(z)), -pre * th(h) * th(z + u) / th(z)],
        [-pre * th(h) * th(z - u) / th(z), pre * th(u)],
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn closed_form_matches_oracle(seed in any::<u64>()) {
        let p = draw(seed);
        let u = p.a[0].div(&p.a[1]);
        let got = r_closed_form(u, p.z, p.hbar(), &p.ctx).unwrap();
        let want = oracle_block(u.u, p.z.u, p.hbar().u, p.ctx.log_q());
        let got: Vec<Vec<Complex64>> = got.to_rows().into_iter().map(|r| r.into_iter().map(cx_to_f64).collect()).collect();
        let want: Vec<Vec<Complex64>> = want.iter().map(|r| r.to_vec()).collect();
        prop_assert!(common::rel_mat(&got, &want) < 1e-10);
    }

    #[test]
    fn product_form_is_closed_form(seed in any::<u64>()) {
        let p = draw(seed);
        let u = p.a[0].div(&p.a[1]);
        let product = RMatrix::new(RForm::Product, p.hbar_half, p.ctx).block(u, p.z).unwrap();
        let closed = RMatrix::new(RForm::Closed, p.hbar_half, p.ctx).block(u, p.z).unwrap();
        prop_assert!(product.rel_diff(&closed) < 1e-10);
    }

    #[test]
    fn unitary(seed in any::<u64>(), form in prop_oneof![Just(RForm::Product), Just(RForm::Closed), Just(RForm::Felder)]) {
        let p = draw(seed);
        let r = RMatrix::new(form, p.hbar_half, p.ctx);
        prop_assert!(check_unitarity(&r, p.a[0].div(&p.a[1]), p.z).unwrap() < 1e-10);
    }

    #[test]
    fn dynamical_yang_baxter(seed in any::<u64>(), felder in any::<bool>()) {
        let p = draw(seed);
        let r = RMatrix::new(if felder { RForm::Felder } else { RForm::Closed }, p.hbar_half, p.ctx);
        let res = check_dyb(&r, &p.a, p.z, &DynWeight::sl2_defining()).unwrap();
        prop_assert!(res.relative() < 1e-9);
    }
}

#[test]
fn identity_form_is_trivially_unitary() {
    let p = draw(1);
    let r = RMatrix::new(RForm::Identity, p.hbar_half, p.ctx);
    assert_eq!(check_unitarity(&r, p.a[0].div(&p.a[1]), p.z).unwrap(), 0.0);
}
