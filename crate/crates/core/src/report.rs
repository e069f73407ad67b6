//! Verification reports.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Bumped whenever the serialized layout changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    /// `Pass` iff `residual < tolerance`; NaN fails.
    pub fn judge(residual: f64, tolerance: f64) -> Self {
        if residual < tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check_id: String,
    pub params_digest: String,
    /// `None` serializes as `null`; NaN cannot be represented in JSON.
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub runtime_ms: Option<u64>,
}

impl CheckRecord {
    pub fn new(check_id: impl Into<String>, params_digest: String, residual: f64, tolerance: f64) -> Self {
        Self {
            check_id: check_id.into(),
            params_digest,
            residual: residual.is_finite().then_some(residual),
            tolerance,
            verdict: Verdict::judge(residual, tolerance),
            runtime_ms: None,
        }
    }

    /// A check that could not be evaluated.
    pub fn errored(check_id: impl Into<String>, params_digest: String, tolerance: f64) -> Self {
        Self::new(check_id, params_digest, f64::NAN, tolerance)
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Measured quantity that is recorded without a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub check_id: String,
    pub value: serde_json::Value,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub seed: u64,
    pub precision: String,
    pub suites: Vec<String>,
    pub records: Vec<CheckRecord>,
    pub observations: Vec<Observation>,
}

impl VerificationReport {
    pub fn new(seed: u64, precision: &str, suites: Vec<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed,
            precision: precision.to_string(),
            suites,
            records: Vec::new(),
            observations: Vec::new(),
        }
    }

    /// Sorts records and observations by `check_id`; the sort is stable.
    pub fn finalize(&mut self) {
        self.records.sort_by(|a, b| a.check_id.cmp(&b.check_id));
        self.observations.sort_by(|a, b| a.check_id.cmp(&b.check_id));
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(CheckRecord::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| !r.passed())
    }

    /// Records whose id starts with `prefix`.
    pub fn with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a CheckRecord> {
        self.records.iter().filter(move |r| r.check_id.starts_with(prefix))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Hex SHA-256 of the JSON form of `params`.
pub fn params_digest<P: Serialize + ?Sized>(params: &P) -> String {
    let bytes = serde_json::to_vec(params).expect("parameters serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_is_strict_and_nan_fails() {
        assert_eq!(Verdict::judge(0.5, 1.0), Verdict::Pass);
        assert_eq!(Verdict::judge(1.0, 1.0), Verdict::Fail);
        assert_eq!(Verdict::judge(f64::NAN, 1.0), Verdict::Fail);
        let r = CheckRecord::errored("x", String::new(), 1.0);
        assert_eq!(r.residual, None);
        assert!(!r.passed());
    }

    #[test]
    fn digest_is_stable_hex() {
        let d = params_digest(&[1.0, 2.0]);
        assert_eq!(d.len(), 64);
        assert_eq!(d, params_digest(&[1.0, 2.0]));
    }
}
