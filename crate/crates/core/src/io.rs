//! JSON parameter documents and matrix export.
//!
//! Complex numbers are `{re, im}`; group elements are log coordinates
//! `{u_re, u_im}` so that branches survive a round trip.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::envelopes::{EnvelopeParams, HyperParams, HypertoricData, RestrictionMatrix};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::qspecial::{MultPoint, QContext};
use crate::scalar::{cx, cx_to_f64, lit, Cx, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

impl ComplexJson {
    pub fn from_cx<T: Real>(z: Cx<T>) -> Self {
        let z = cx_to_f64(z);
        Self { re: z.re, im: z.im }
    }

    pub fn to_cx<T: Real>(self) -> Cx<T> {
        cx(self.re, self.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogJson {
    pub u_re: f64,
    pub u_im: f64,
}

impl LogJson {
    pub fn from_point<T: Real>(x: &MultPoint<T>) -> Self {
        let u = cx_to_f64(x.u);
        Self { u_re: u.re, u_im: u.im }
    }

    pub fn to_point<T: Real>(self) -> MultPoint<T> {
        MultPoint::new(cx(self.u_re, self.u_im))
    }
}

/// A single Kähler variable or one per rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KahlerJson {
    One(LogJson),
    Many(Vec<LogJson>),
}

impl KahlerJson {
    pub fn points<T: Real>(&self) -> Vec<MultPoint<T>> {
        match self {
            KahlerJson::One(z) => vec![z.to_point()],
            KahlerJson::Many(zs) => zs.iter().map(|z| z.to_point()).collect(),
        }
    }
}

/// Parameter document shared by the subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_matrix: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_points: Option<Vec<crate::envelopes::HyperFixedPoint>>,
    pub a_log: Vec<LogJson>,
    pub hbar_half_log: LogJson,
    pub z_log: KahlerJson,
    pub q: ComplexJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunc: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

impl ParamsFile {
    pub fn parse(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.a_log.is_empty() {
            return bad("a_log is empty".into());
        }
        if let Some(n) = self.n {
            if n != self.a_log.len() {
                return bad(format!("n = {n} but a_log has {} entries", self.a_log.len()));
            }
        }
        if let Some(k) = self.k {
            if k == 0 || k > self.a_log.len() {
                return bad(format!("k = {k} outside 1..={}", self.a_log.len()));
            }
        }
        let q = Complex::new(self.q.re, self.q.im).norm();
        if !(q > 0.0 && q < 1.0) {
            return bad(format!("|q| = {q} outside (0, 1)"));
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0) {
                return bad(format!("tol = {tol} must be positive"));
            }
        }
        match (&self.weight_matrix, &self.fixed_points) {
            (Some(_), None) | (None, Some(_)) => return bad("weight_matrix and fixed_points come together".into()),
            (Some(_), Some(_)) => {
                let h = self.hypertoric().expect("both present");
                h.validate().map_err(|e| Error::ConfigInvalid(e.to_string()))?;
                if h.dim() != self.a_log.len() {
                    return bad(format!("weight_matrix has {} columns, a_log has {}", h.dim(), self.a_log.len()));
                }
            }
            (None, None) => {
                if let KahlerJson::Many(zs) = &self.z_log {
                    if zs.len() != 1 {
                        return bad("a single Kähler variable is expected without hypertoric data".into());
                    }
                }
            }
        }
        Ok(())
    }

    pub fn hypertoric(&self) -> Option<HypertoricData> {
        Some(HypertoricData { weight_matrix: self.weight_matrix.clone()?, fixed_points: self.fixed_points.clone()? })
    }

    pub fn context<T: Real>(&self) -> Result<QContext<T>> {
        let q = self.q.to_cx::<T>();
        let tol = self.tol.map(lit::<T>).unwrap_or_else(T::epsilon);
        match self.trunc {
            Some(t) => QContext::with_trunc(q, t, tol),
            None => QContext::with_tol(q, tol),
        }
    }

    /// Validated envelope parameters; resonances surface with their divisor.
    pub fn envelope<T: Real>(&self) -> Result<EnvelopeParams<T>> {
        let z = self.z_log.points::<T>();
        EnvelopeParams::new(
            self.a_log.iter().map(|a| a.to_point()).collect(),
            self.hbar_half_log.to_point(),
            z[0],
            self.context()?,
        )
    }

    pub fn hyper_params<T: Real>(&self) -> Result<HyperParams<T>> {
        Ok(HyperParams {
            a: self.a_log.iter().map(|a| a.to_point()).collect(),
            hbar_half: self.hbar_half_log.to_point(),
            kahler: self.z_log.points(),
            ctx: self.context()?,
        })
    }

    pub fn from_envelope<T: Real>(p: &EnvelopeParams<T>) -> Self {
        Self {
            weight_matrix: None,
            fixed_points: None,
            a_log: p.a.iter().map(LogJson::from_point).collect(),
            hbar_half_log: LogJson::from_point(&p.hbar_half),
            z_log: KahlerJson::One(LogJson::from_point(&p.z)),
            q: ComplexJson::from_cx(p.ctx.q()),
            trunc: Some(p.ctx.trunc()),
            tol: Some(crate::scalar::to_f64(p.ctx.tol())),
            k: None,
            n: Some(p.n()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub basis: Vec<String>,
    /// Row-major.
    pub entries: Vec<Vec<ComplexJson>>,
}

impl MatrixJson {
    pub fn from_cmat<T: Real>(basis: Vec<String>, m: &CMat<T>) -> Self {
        Self {
            basis,
            entries: m.to_rows().into_iter().map(|row| row.into_iter().map(ComplexJson::from_cx).collect()).collect(),
        }
    }

    pub fn from_restriction<T: Real>(m: &RestrictionMatrix<T>) -> Self {
        Self::from_cmat(m.basis.clone(), &m.entries)
    }

    /// One line per entry: `row,col,re,im`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::InvalidInput(e.to_string());
        w.write_record(["row", "col", "re", "im"]).map_err(err)?;
        for (j, row) in self.entries.iter().enumerate() {
            for (k, z) in row.iter().enumerate() {
                w.write_record([
                    self.basis[j].clone(),
                    self.basis[k].clone(),
                    format!("{:e}", z.re),
                    format!("{:e}", z.im),
                ])
                .map_err(err)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
        "a_log": [{"u_re": 0.3, "u_im": 0.4}, {"u_re": -0.2, "u_im": -0.9}],
        "hbar_half_log": {"u_re": -0.3, "u_im": 0.35},
        "z_log": {"u_re": -2.0, "u_im": 0.5},
        "q": {"re": 0.2, "im": 0.05}
    }"#;

    #[test]
    fn round_trip_preserves_logs() {
        let f = ParamsFile::parse(DOC).unwrap();
        let p = f.envelope::<f64>().unwrap();
        let back = ParamsFile::from_envelope(&p);
        assert_eq!(back.a_log, f.a_log);
        assert_eq!(back.z_log, f.z_log);
    }

    #[test]
    fn schema_rejects_unknown_and_bad_fields() {
        assert!(matches!(ParamsFile::parse(&DOC.replace("\"q\"", "\"qq\"")), Err(Error::ConfigInvalid(_))));
        let big_q = DOC.replace("\"re\": 0.2", "\"re\": 1.2");
        assert!(matches!(ParamsFile::parse(&big_q), Err(Error::ConfigInvalid(_))));
    }
}
