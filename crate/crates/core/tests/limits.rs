use ellstab::ktheory_limit::{default_q_sequence, growth_basis, stab_support_limit, theta_ratio_limit, SlopePath};
use ellstab::qspecial::MultPoint;
use ellstab::scalar::cx;
use proptest::prelude::*;

fn path(l: f64) -> SlopePath {
    SlopePath::new(l, 0.4, default_q_sequence()).unwrap()
}

#[test]
fn theta_ratio_converges_at_predicted_rate() {
    let a = MultPoint::<f64>::new(cx(0.3, 0.8));
    for k in 0..=2 {
        let r = theta_ratio_limit(a, &path(k as f64 + 0.5), k, 1e-6).unwrap();
        assert!(r.monotone);
        assert!((r.fitted_rate - r.predicted_rate).abs() < 0.05, "{r:?}");
    }
}

#[test]
fn theta_ratio_rejects_slope_outside_window() {
    let a = MultPoint::<f64>::new(cx(0.3, 0.8));
    assert!(theta_ratio_limit(a, &path(1.5), 0, 1e-6).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn growth_verdicts_match_window(n in 1u32..=4, alpha in -2.9f64..2.9) {
        prop_assume!((alpha - alpha.round()).abs() > 0.05);
        let r = growth_basis::<f64>(n, alpha, 0.3, &path(0.5)).unwrap();
        prop_assert_eq!(r.convergent, n as usize);
        for e in &r.entries {
            prop_assert_eq!(e.predicted, e.observed, "k = {}", e.k);
        }
    }
}

#[test]
fn supports_jump_across_walls_only() {
    let h = MultPoint::<f64>::new(cx(0.2, 1.0));
    let supports = |l: f64| {
        let r = stab_support_limit(h, &path(l), 32, 1e-6).unwrap();
        assert!(r.pass, "slope {l}: {r:?}");
        r.entries.into_iter().map(|e| e.support).collect::<Vec<_>>()
    };
    assert_eq!(supports(0.4), supports(0.6));
    assert_eq!(supports(1.4), supports(1.6));
    assert_ne!(supports(0.5), supports(1.5));
    assert_ne!(supports(-0.5), supports(0.5));
}
