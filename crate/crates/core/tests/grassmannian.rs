use ellstab::abelianization::{grass_residuals, permutations, restriction_matrix_grass, GrassParams, KSubset};
use ellstab::draw::{DrawConstraints, Drawer};
use ellstab::envelopes::{restriction_matrix_tpn, Chamber, EnvelopeParams};
use proptest::prelude::*;

fn draw(seed: u64, n: usize) -> EnvelopeParams<f64> {
    let c = DrawConstraints { re_box: 1.5, hbar_re_box: 1.5, ..DrawConstraints::with_n(n) };
    Drawer::new(seed).draw::<f64>(&c).unwrap().1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rank_one_is_projective_space(seed in any::<u64>(), n in 2usize..=5) {
        let p = draw(seed, n);
        let g = restriction_matrix_grass(&GrassParams::new(1, p.clone()).unwrap(), &Chamber::standard(n)).unwrap();
        let t = restriction_matrix_tpn(&p, &Chamber::standard(n)).unwrap();
        prop_assert!(g.entries.rel_diff(&t.entries) < 1e-12);
    }

    #[test]
    fn gr24_is_triangular_with_repelling_diagonal(seed in any::<u64>()) {
        let p = GrassParams::new(2, draw(seed, 4)).unwrap();
        let r = grass_residuals(&p, &Chamber::standard(4)).unwrap();
        prop_assert!(r.triangularity < 1e-10, "{:?}", r);
        prop_assert!(r.diagonal < 1e-9, "{:?}", r);
        prop_assert!(r.z_law < 1e-9, "{:?}", r);
    }
}

#[test]
fn subsets_and_permutations_are_complete() {
    assert_eq!(KSubset::all(2, 4).len(), 6);
    assert_eq!(KSubset::all(3, 6).len(), 20);
    assert_eq!(permutations(3).len(), 6);
    assert_eq!(permutations(4).len(), 24);
}

#[test]
fn dominance_is_reflexive_and_antisymmetric() {
    let all = KSubset::all(2, 4);
    for a in &all {
        assert!(a.dominated_by(a));
        for b in &all {
            if a != b && a.dominated_by(b) {
                assert!(!b.dominated_by(a));
            }
        }
    }
}

#[test]
fn rejects_bad_rank() {
    assert!(GrassParams::new(0, draw(1, 3)).is_err());
    assert!(GrassParams::new(4, draw(1, 3)).is_err());
    assert!(KSubset::new(vec![2, 1], 4).is_err());
}
