mod common;

use ellstab::draw::{DrawConstraints, Drawer};
use ellstab::envelopes::{
    repelling_diagonal_tpn, restriction_matrix_hypertoric, restriction_matrix_tpn, triangle_factorization_check,
    Chamber, EnvelopeParams, HyperParams, HypertoricData,
};
use ellstab::scalar::cx_to_f64;
use num_complex::Complex64;
use proptest::prelude::*;

/// Entry `[j][k]` in the standard chamber, written out factor by factor:
/// `∏_{i<k} ϑ(a_i/a_j) · ϑ(z ħ^{k+1−n} a_k/a_j)/ϑ(z ħ^{k+1−n}) · ∏_{i>k} ϑ(ħ a_i/a_j)`.
fn oracle_matrix(p: &EnvelopeParams<f64>) -> Vec<Vec<Complex64>> {
    let n = p.n();
    let lq = p.ctx.log_q();
    let a: Vec<Complex64> = p.a.iter().map(|x| x.u).collect();
    let h = p.hbar().u;
    let th = |u: Complex64| common::theta(u, lq);
    (0..n)
        .map(|j| {
            (0..n)
                .map(|k| {
                    let zk = p.z.u + h * (k as f64 + 1.0 - n as f64);
                    let mut v = th(zk + a[k] - a[j]) / th(zk);
                    for i in 0..n {
                        if i < k {
                            v *= th(a[i] - a[j]);
                        } else if i > k {
                            v *= th(h + a[i] - a[j]);
                        }
                    }
                    v
                })
                .collect()
        })
        .collect()
}

fn draw(seed: u64, n: usize) -> EnvelopeParams<f64> {
    Drawer::new(seed).draw::<f64>(&DrawConstraints::with_n(n)).unwrap().1
}

/// Draws whose individual theta factors stay within `f64` range; the oracle
/// multiplies them directly.
fn moderate_draw(seed: u64, n: usize) -> EnvelopeParams<f64> {
    let c = DrawConstraints { re_box: 1.5, hbar_re_box: 1.0, ..DrawConstraints::with_n(n) };
    Drawer::new(seed).draw::<f64>(&c).unwrap().1
}

fn to_rows(m: &ellstab::linalg::CMat<f64>) -> Vec<Vec<Complex64>> {
    m.to_rows().into_iter().map(|r| r.into_iter().map(cx_to_f64).collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn standard_chamber_matches_oracle(seed in any::<u64>(), n in 2usize..=5) {
        let p = moderate_draw(seed, n);
        let m = to_rows(&restriction_matrix_tpn(&p, &Chamber::standard(n)).unwrap().entries);
        let o = oracle_matrix(&p);
        // Above the diagonal the oracle carries a factor ϑ(1) that the series only resolves to rounding.
        for j in 0..n {
            for k in 0..=j {
                prop_assert!(common::rel(m[j][k], o[j][k]) < 1e-10, "entry {},{}", j, k);
            }
        }
    }

    #[test]
    fn lower_triangular_with_repelling_diagonal(seed in any::<u64>(), n in 2usize..=6, opposite in any::<bool>()) {
        let p = draw(seed, n);
        let c = if opposite { Chamber::standard(n).opposite() } else { Chamber::standard(n) };
        let m = restriction_matrix_tpn(&p, &c).unwrap();
        let diag = repelling_diagonal_tpn(&p, &c).unwrap();
        for (j, d) in diag.iter().enumerate() {
            for k in j + 1..n {
                prop_assert_eq!(m.entries[(j, k)].norm(), 0.0);
            }
            prop_assert!(common::rel(m.entries[(j, j)], *d) < 1e-12);
        }
    }

    #[test]
    fn hypertoric_encoding_agrees(seed in any::<u64>(), n in 2usize..=4) {
        let p = draw(seed, n);
        let h = HypertoricData::tpn(n);
        let hp = HyperParams { a: p.a.clone(), hbar_half: p.hbar_half, kahler: vec![p.z], ctx: p.ctx };
        let got = restriction_matrix_hypertoric(&h, &hp).unwrap().entries;
        let want = restriction_matrix_tpn(&p, &Chamber::standard(n)).unwrap().in_index_order();
        prop_assert!(got.rel_diff(&want) < 1e-12);
    }
}

#[test]
fn z_shift_scales_entries_by_weight_ratio() {
    let p = draw(3, 3);
    let shifted = p.with_z(p.z.qshift(1, &p.ctx));
    let m0 = restriction_matrix_tpn(&p, &Chamber::standard(3)).unwrap().entries;
    let m1 = restriction_matrix_tpn(&shifted, &Chamber::standard(3)).unwrap().entries;
    for j in 0..3 {
        for k in 0..=j {
            let ratio = p.a[j].div(&p.a[k]).value();
            assert!(common::rel(m1[(j, k)], m0[(j, k)] * ratio) < 1e-12, "entry {j},{k}");
        }
    }
}

#[test]
fn triangle_lemma_holds() {
    for m in 1..=2 {
        let p = draw(10 + m as u64, 3);
        assert!(triangle_factorization_check(&p, m).unwrap().max() < 1e-10);
    }
}

#[test]
fn resonant_parameters_are_rejected() {
    let p = draw(5, 2);
    let a = vec![p.a[0], p.a[0].qshift(2, &p.ctx)];
    assert!(EnvelopeParams::new(a, p.hbar_half, p.z, p.ctx).is_err());
}
