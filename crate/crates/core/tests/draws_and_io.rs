use ellstab::draw::{DrawConstraints, Drawer};
use ellstab::io::{MatrixJson, ParamsFile};
use ellstab::report::{params_digest, CheckRecord, Verdict};
use ellstab::suite::{run_suite, Precision, SuiteConfig, WideScalar};
use ellstab::Error;
use proptest::prelude::*;

const TPN_PARAMS: &str = r#"{
  "a_log": [{"u_re": 0.1, "u_im": 0.7}, {"u_re": -0.3, "u_im": -1.9}],
  "hbar_half_log": {"u_re": 0.2, "u_im": 1.1},
  "z_log": {"u_re": -0.4, "u_im": 2.3},
  "q": {"re": 0.1, "im": 0.2}
}"#;

proptest! {
    #[test]
    fn draws_agree_across_precisions(seed in any::<u64>(), n in 2usize..=4) {
        let c = DrawConstraints::with_n(n);
        let (raw64, p64) = Drawer::new(seed).draw::<f64>(&c).unwrap();
        let (raw_wide, p_wide) = Drawer::new(seed).draw::<WideScalar>(&c).unwrap();
        prop_assert_eq!(params_digest(&raw64), params_digest(&raw_wide));
        for (x, y) in p64.a.iter().zip(&p_wide.a) {
            prop_assert_eq!(x.u.re, ellstab::scalar::to_f64(y.u.re));
        }
    }

    #[test]
    fn verdict_is_strict_less_than(residual in 0.0f64..2.0, tol in 1e-3f64..2.0) {
        let v = Verdict::judge(residual, tol);
        prop_assert_eq!(v == Verdict::Pass, residual < tol);
    }
}

#[test]
fn non_finite_residuals_fail() {
    assert_eq!(Verdict::judge(f64::NAN, 1.0), Verdict::Fail);
    let r = CheckRecord::new("x", String::new(), f64::INFINITY, 1.0);
    assert!(!r.passed());
    assert!(serde_json::to_string(&r).unwrap().contains("\"residual\":null"));
}

#[test]
fn parameter_file_round_trips_through_matrix_output() {
    let f = ParamsFile::parse(TPN_PARAMS).unwrap();
    let p = f.envelope::<f64>().unwrap();
    assert_eq!(p.n(), 2);
    let m = ellstab::envelopes::restriction_matrix_tpn(&p, &ellstab::envelopes::Chamber::standard(2)).unwrap();
    let json = MatrixJson::from_cmat(vec!["F1".into(), "F2".into()], &m.in_index_order());
    let csv = json.to_csv().unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("row,col,re,im"));
}

#[test]
fn parameter_file_rejects_unknown_fields_and_bad_q() {
    let extra = TPN_PARAMS.replacen('{', r#"{"colour": 1,"#, 1);
    assert!(matches!(ParamsFile::parse(&extra), Err(Error::ConfigInvalid(_))));
    let unit = TPN_PARAMS.replace(r#""re": 0.1, "im": 0.2"#, r#""re": 1.0, "im": 0.0"#);
    assert!(ParamsFile::parse(&unit).and_then(|f| f.validate()).is_err());
}

#[test]
fn resonant_file_is_reported() {
    let resonant = TPN_PARAMS.replace(r#"{"u_re": -0.3, "u_im": -1.9}"#, r#"{"u_re": 0.1, "u_im": 0.7}"#);
    let f = ParamsFile::parse(&resonant).unwrap();
    assert!(matches!(f.envelope::<f64>(), Err(Error::ParameterResonant(_))));
}

#[test]
fn theta_suite_is_deterministic_and_passes() {
    let cfg = SuiteConfig::new(3, vec!["theta".into()]);
    let a = run_suite(&cfg, Precision::Double).unwrap();
    let b = run_suite(&cfg, Precision::Double).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.records.len(), 300);
    assert!(a.all_pass());
}

#[test]
fn unknown_suite_is_a_config_error() {
    let cfg = SuiteConfig::new(1, vec!["nope".into()]);
    assert!(matches!(run_suite(&cfg, Precision::Double), Err(Error::ConfigInvalid(_))));
}
