//! Verification suites and their orchestration.
//!
//! Every suite draws its parameters from its own seeded stream, so suites can
//! run concurrently and the report does not depend on scheduling. Inequality
//! requirements of the form `x ≥ bound` are recorded as the residual
//! `bound / x` against tolerance `1`.

use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use crate::abelianization::{
    grass_residuals, regularity_probe, restriction_matrix_grass, GrassParams, KSubset, ProbeFamily,
};
use crate::draw::{DrawConstraints, Drawer, RawDraw};
use crate::envelopes::{
    characterize, restriction_matrix_hypertoric, restriction_matrix_tpn, tpn_entry_product,
    triangle_factorization_check, Chamber, EnvelopeParams, HyperParams, HypertoricData,
};
use crate::error::{Error, Result};
use crate::io::ParamsFile;
use crate::ktheory_limit::{default_q_sequence, growth_basis, stab_support_limit, theta_ratio_limit, SlopePath};
use crate::qspecial::{theta, theta_three_term, MultPoint, QContext};
use crate::report::{params_digest, CheckRecord, Observation, VerificationReport};
use crate::rmatrix::{
    check_dyb, check_unitarity, displayed_stab_pair, stab_pair_sl2, DynWeight, Gauge, Psi, RForm, RMatrix,
};
use crate::scalar::{cx, lit, to_f64, Cx, Real};
use crate::vertex::{
    a_limit_check, circle_nodes, duality_residual, hankel_nodes, hankel_width, pole_cancellation_check,
    pole_subtraction_periodicity, qdiff_series_solve, separating_log_radius, subtracted_solution, vertex_contour,
    vertex_integral, vertex_series_value, vertex_tpn, ProbeGrid, QDiffSystem,
};

/// Suite names in execution order.
pub const SUITES: [&str; 7] = ["theta", "envelope", "grass", "rmatrix", "vertex", "tps", "limits"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// `f64` throughout, except the pole probe which needs binary128.
    Double,
    /// binary128 throughout.
    Wide,
}

impl Precision {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "double" => Ok(Precision::Double),
            "wide" => Ok(Precision::Wide),
            other => Err(Error::ConfigInvalid(format!("precision must be `double` or `wide`, got `{other}`"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Precision::Double => "double",
            Precision::Wide => "wide",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub suites: Vec<String>,
    /// Parameter document checked in addition to the seeded draws.
    pub params: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Record per-check wall time; off by default so reports are reproducible.
    pub timings: bool,
    /// Largest divisor index of the pole probe.
    pub m_max: i64,
    /// Draws of the Yang–Baxter and unitarity checks.
    pub rmatrix_draws: usize,
}

impl SuiteConfig {
    pub fn new(seed: u64, suites: Vec<String>) -> Self {
        Self { seed, suites, params: None, output: None, timings: false, m_max: 3, rmatrix_draws: 50 }
    }

    /// Suite names with `all` expanded, deduplicated, in execution order.
    pub fn resolved_suites(&self) -> Result<Vec<&'static str>> {
        if self.suites.is_empty() {
            return Err(Error::ConfigInvalid("no suite selected".into()));
        }
        for s in &self.suites {
            if s != "all" && !SUITES.contains(&s.as_str()) {
                return Err(Error::ConfigInvalid(format!("unknown suite `{s}`; expected one of {SUITES:?} or `all`")));
            }
        }
        let all = self.suites.iter().any(|s| s == "all");
        Ok(SUITES.iter().copied().filter(|name| all || self.suites.iter().any(|s| s == name)).collect())
    }
}

/// Records and observations of one suite.
#[derive(Debug, Default)]
pub struct Sink {
    timings: bool,
    pub records: Vec<CheckRecord>,
    pub observations: Vec<Observation>,
}

impl Sink {
    pub fn new(timings: bool) -> Self {
        Self { timings, ..Self::default() }
    }

    /// One check; an error becomes a failing record plus an observation.
    pub fn check(&mut self, id: impl Into<String>, digest: &str, tol: f64, f: impl FnOnce() -> Result<f64>) {
        let id = id.into();
        let start = Instant::now();
        let residual = self.unwrap(&id, f());
        self.push(id, digest, residual.unwrap_or(f64::NAN), tol, start);
    }

    /// Several checks sharing one computation.
    pub fn checks(&mut self, prefix: &str, digest: &str, spec: &[(&str, f64)], f: impl FnOnce() -> Result<Vec<f64>>) {
        let start = Instant::now();
        let values = self.unwrap(prefix, f());
        for (i, (name, tol)) in spec.iter().enumerate() {
            let r = values.as_ref().and_then(|v| v.get(i).copied()).unwrap_or(f64::NAN);
            self.push(format!("{prefix}.{name}"), digest, r, *tol, start);
        }
    }

    pub fn observe(&mut self, id: impl Into<String>, value: serde_json::Value, note: &str) {
        self.observations.push(Observation { check_id: id.into(), value, note: note.into() });
    }

    fn unwrap<V>(&mut self, id: &str, r: Result<V>) -> Option<V> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.observe(format!("{id}.error"), json!(e.to_string()), "check could not be evaluated");
                None
            }
        }
    }

    fn push(&mut self, id: String, digest: &str, residual: f64, tol: f64, start: Instant) {
        let mut rec = CheckRecord::new(id, digest.to_string(), residual, tol);
        if self.timings {
            rec.runtime_ms = Some(start.elapsed().as_millis() as u64);
        }
        self.records.push(rec);
    }
}

fn rel_err_f64<T: Real>(got: Cx<T>, want: Cx<T>) -> f64 {
    to_f64((got - want).norm() / want.norm())
}

fn digest_of(raw: &RawDraw) -> String {
    params_digest(raw)
}

fn stream(seed: u64, suite: &str) -> Drawer {
    let salt = SUITES.iter().position(|s| *s == suite).unwrap_or(SUITES.len()) as u64 + 1;
    Drawer::new(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

// --- theta -----------------------------------------------------------------

pub const THREE_TERM_TOL: f64 = 1e-10;
pub const THETA_LAW_TOL: f64 = 1e-12;
const THETA_DRAWS: usize = 100;

pub fn theta_suite<T: Real>(seed: u64, sink: &mut Sink) {
    let mut d = stream(seed, "theta");
    let pi = std::f64::consts::PI;
    for i in 0..THETA_DRAWS {
        let log_q = (d.uniform(0.02f64.ln(), 0.5f64.ln()), d.uniform(-pi, pi));
        let pts = [d.log_point(3.0), d.log_point(3.0), d.log_point(3.0)];
        let digest = params_digest(&json!({ "log_q": log_q, "points": pts }));
        let ctx = match QContext::<T>::from_log(cx(log_q.0, log_q.1), T::epsilon()) {
            Ok(c) => c,
            Err(e) => {
                for (name, tol) in
                    [("three_term", THREE_TERM_TOL), ("odd", THETA_LAW_TOL), ("quasi_period", THETA_LAW_TOL)]
                {
                    sink.check(format!("theta.{name}.d{i:03}"), &digest, tol, || Err(e.clone()));
                }
                continue;
            }
        };
        let [a, b, c] = pts.map(|(re, im)| MultPoint::<T>::new(cx(re, im)));
        sink.check(format!("theta.three_term.d{i:03}"), &digest, THREE_TERM_TOL, || {
            Ok(to_f64(theta_three_term(a, b, c, &ctx)?.relative()))
        });
        sink.check(format!("theta.odd.d{i:03}"), &digest, THETA_LAW_TOL, || {
            let t = theta(a, &ctx)?;
            Ok(to_f64((theta(a.inv(), &ctx)? + t).norm() / t.norm()))
        });
        // ϑ(qx) = −q^{-1/2} x^{-1} ϑ(x).
        sink.check(format!("theta.quasi_period.d{i:03}"), &digest, THETA_LAW_TOL, || {
            let shifted = theta(a.qshift(1, &ctx), &ctx)?;
            let want = -(-(ctx.log_q() * lit::<T>(0.5)) - a.u).exp() * theta(a, &ctx)?;
            Ok(to_f64((shifted - want).norm() / shifted.norm()))
        });
    }
}

// --- envelope --------------------------------------------------------------

pub const ENVELOPE_TOL: f64 = 1e-12;
pub const TRIANGLE_TOL: f64 = 1e-10;
const ENVELOPE_DRAWS: usize = 5;
const TRIANGLE_DRAWS: usize = 20;

fn envelope_checks<T: Real>(prefix: &str, digest: &str, p: &EnvelopeParams<T>, sink: &mut Sink) {
    let n = p.n();
    let c = Chamber::standard(n);
    // Entries above the diagonal vanish identically, so their values are exact zeros.
    sink.check(format!("{prefix}.strict_upper"), digest, f64::MIN_POSITIVE, || {
        let m = restriction_matrix_tpn(p, &c)?.entries;
        let mut worst = 0.0f64;
        for j in 0..n {
            for k in j + 1..n {
                if !tpn_entry_product(j, k, &c).is_identically_zero() {
                    return Ok(f64::INFINITY);
                }
                worst = worst.max(to_f64(m[(j, k)].norm()));
            }
        }
        Ok(worst)
    });
    sink.checks(
        prefix,
        digest,
        &[("diagonal", ENVELOPE_TOL), ("z_law", ENVELOPE_TOL), ("a_law", ENVELOPE_TOL), ("gluing", ENVELOPE_TOL)],
        || {
            let r = characterize(|q| Ok(restriction_matrix_tpn(q, &c)?.entries), p, &c)?;
            Ok(vec![to_f64(r.diagonal), to_f64(r.z_law), to_f64(r.a_law), to_f64(r.gluing)])
        },
    );
    sink.check(format!("{prefix}.hypertoric_agrees"), digest, ENVELOPE_TOL, || {
        let h = HypertoricData::tpn(n);
        let hp = HyperParams { a: p.a.clone(), hbar_half: p.hbar_half, kahler: vec![p.z], ctx: p.ctx };
        let m = restriction_matrix_hypertoric(&h, &hp)?.entries;
        Ok(to_f64(m.rel_diff(&restriction_matrix_tpn(p, &c)?.in_index_order())))
    });
}

pub fn envelope_suite<T: Real>(seed: u64, file: Option<&ParamsFile>, sink: &mut Sink) {
    let mut d = stream(seed, "envelope");
    for n in 2..=6 {
        for i in 0..ENVELOPE_DRAWS {
            match d.draw::<T>(&DrawConstraints::with_n(n)) {
                Ok((raw, p)) => envelope_checks(&format!("envelope.tpn.n{n}.d{i}"), &digest_of(&raw), &p, sink),
                Err(e) => sink.check(format!("envelope.tpn.n{n}.d{i}.draw"), "", ENVELOPE_TOL, || Err(e)),
            }
        }
    }
    // M[0][1] = 0 and M[1][1] = ϑ(a₁/a₂) on T*P¹ in index order.
    if let Ok((raw, p)) = d.draw::<T>(&DrawConstraints::with_n(2)) {
        sink.check("envelope.tpn.n2.transcription", &digest_of(&raw), ENVELOPE_TOL, || {
            let m = restriction_matrix_tpn(&p, &Chamber::standard(2))?.in_index_order();
            let want = theta(p.a[0].div(&p.a[1]), &p.ctx)?;
            Ok(to_f64(m[(0, 1)].norm()).max(to_f64(crate::linalg::rel_err(m[(1, 1)], want))))
        });
    }
    for m in 1..=2 {
        for i in 0..TRIANGLE_DRAWS {
            let id = format!("envelope.triangle.n3.m{m}.d{i:02}");
            match d.draw::<T>(&DrawConstraints::with_n(3)) {
                Ok((raw, p)) => sink.checks(
                    &id,
                    &digest_of(&raw),
                    &[("support", TRIANGLE_TOL), ("diagonal", TRIANGLE_TOL), ("z_law", TRIANGLE_TOL)],
                    || {
                        let r = triangle_factorization_check(&p, m)?;
                        Ok(vec![to_f64(r.support), to_f64(r.diagonal), to_f64(r.z_law)])
                    },
                ),
                Err(e) => sink.check(id, "", TRIANGLE_TOL, || Err(e)),
            }
        }
    }
    if let Some(f) = file {
        let digest = params_digest(f);
        match f.envelope::<T>() {
            Ok(p) => envelope_checks("envelope.file", &digest, &p, sink),
            Err(e) => sink.check("envelope.file", &digest, ENVELOPE_TOL, || Err(e)),
        }
    }
}

// --- grass -----------------------------------------------------------------

pub const GRASS_TRIANGULARITY_TOL: f64 = 1e-10;
pub const GRASS_DIAGONAL_TOL: f64 = 1e-9;
pub const GRASS_TPN_TOL: f64 = 1e-12;
/// Relative change of the symmetrized sum between probe radii `ε` and `ε/2`.
pub const REGULARITY_TOL: f64 = 1e-2;
const REGULARITY_EPS: f64 = 1e-4;
const GRASS_DRAWS: usize = 5;

pub fn grass_suite<T: Real>(seed: u64, sink: &mut Sink) {
    let mut d = stream(seed, "grass");
    let c4 = Chamber::standard(4);
    for i in 0..GRASS_DRAWS {
        let prefix = format!("grass.gr24.d{i}");
        let (raw, p) =
            match d.draw::<T>(&DrawConstraints { re_box: 1.5, hbar_re_box: 1.5, ..DrawConstraints::with_n(4) }) {
                Ok(x) => x,
                Err(e) => {
                    sink.check(prefix, "", GRASS_TRIANGULARITY_TOL, || Err(e));
                    continue;
                }
            };
        let digest = digest_of(&raw);
        let gp = match GrassParams::new(2, p) {
            Ok(g) => g,
            Err(e) => {
                sink.check(prefix, &digest, GRASS_TRIANGULARITY_TOL, || Err(e));
                continue;
            }
        };
        sink.checks(
            &prefix,
            &digest,
            &[
                ("triangularity", GRASS_TRIANGULARITY_TOL),
                ("diagonal", GRASS_DIAGONAL_TOL),
                ("z_law", GRASS_DIAGONAL_TOL),
            ],
            || {
                let r = grass_residuals(&gp, &c4)?;
                Ok(vec![to_f64(r.triangularity), to_f64(r.diagonal), to_f64(r.z_law)])
            },
        );
        let base: Vec<MultPoint<T>> =
            (0..2).map(|_| d.log_point(1.0)).map(|(re, im)| MultPoint::new(cx(re, im))).collect();
        for mu in KSubset::all(2, 4) {
            let id = format!("{prefix}.regularity.{}", mu.indices().iter().map(|x| x.to_string()).collect::<String>());
            sink.checks(&id, &digest, &[("bounded", REGULARITY_TOL), ("control_diverges", 1.0)], || {
                let r = regularity_probe(&mu, (0, 1), ProbeFamily::Diagonal, &base, lit(REGULARITY_EPS), &gp)?;
                let finite = r.value_eps.norm().is_finite() && r.value_half.norm().is_finite();
                let change = if finite { to_f64(r.relative_change) } else { f64::INFINITY };
                // A simple pole doubles the single term when ε halves.
                Ok(vec![change, 1.5 / to_f64(r.control_growth)])
            });
            if let Ok(r) = regularity_probe(&mu, (0, 1), ProbeFamily::Hbar, &base, lit(REGULARITY_EPS), &gp) {
                sink.observe(
                    format!("{id}.hbar_family"),
                    json!({ "relative_change": to_f64(r.relative_change), "control_growth": to_f64(r.control_growth) }),
                    "approach to the ħ-shifted diagonal; not a bounded direction of the symmetrized sum",
                );
            }
        }
    }
    for n in 2..=5 {
        let id = format!("grass.gr1n.n{n}");
        match d.draw::<T>(&DrawConstraints::with_n(n)) {
            Ok((raw, p)) => sink.check(id, &digest_of(&raw), GRASS_TPN_TOL, || {
                let c = Chamber::standard(n);
                let g = restriction_matrix_grass(&GrassParams::new(1, p.clone())?, &c)?.entries;
                Ok(to_f64(g.rel_diff(&restriction_matrix_tpn(&p, &c)?.entries)))
            }),
            Err(e) => sink.check(id, "", GRASS_TPN_TOL, || Err(e)),
        }
    }
}

// --- rmatrix ---------------------------------------------------------------

pub const RMATRIX_TOL: f64 = 1e-10;
pub const DYB_TOL: f64 = 1e-9;

pub fn rmatrix_suite<T: Real>(seed: u64, draws: usize, sink: &mut Sink) {
    let mut d = stream(seed, "rmatrix");
    let w = DynWeight::sl2_defining();
    for i in 0..draws {
        let prefix = format!("rmatrix.d{i:02}");
        let (raw, p) =
            match d.draw::<T>(&DrawConstraints { re_box: 1.5, hbar_re_box: 1.5, ..DrawConstraints::with_n(3) }) {
                Ok(x) => x,
                Err(e) => {
                    sink.check(prefix, "", RMATRIX_TOL, || Err(e));
                    continue;
                }
            };
        let digest = digest_of(&raw);
        let u = p.a[0].div(&p.a[1]);
        let make = |f: RForm| RMatrix::new(f, p.hbar_half, p.ctx);
        let (product, closed, felder) = (make(RForm::Product), make(RForm::Closed), make(RForm::Felder));
        sink.check(format!("{prefix}.product_vs_closed"), &digest, RMATRIX_TOL, || {
            Ok(to_f64(product.block(u, p.z)?.rel_diff(&closed.block(u, p.z)?)))
        });
        sink.check(format!("{prefix}.transcription"), &digest, RMATRIX_TOL, || {
            let (m1, p1) = stab_pair_sl2(u, p.z, p.hbar_half, &p.ctx)?;
            let (m2, p2) = displayed_stab_pair(u, p.z, p.hbar(), &p.ctx)?;
            Ok(to_f64(m1.rel_diff(&m2).max(p1.rel_diff(&p2))))
        });
        sink.check(format!("{prefix}.felder_gauge"), &digest, RMATRIX_TOL, || {
            let gauged = felder.gauged(Gauge::Diagonal(Psi::Theta));
            Ok(to_f64(gauged.block(u, p.z)?.rel_diff(&closed.block(u, p.z)?)))
        });
        for (name, r) in [("product", &product), ("closed", &closed), ("felder", &felder)] {
            sink.check(format!("{prefix}.unitarity.{name}"), &digest, RMATRIX_TOL, || {
                Ok(to_f64(check_unitarity(r, u, p.z)?))
            });
        }
        for (name, r) in [("closed", &closed), ("felder", &felder)] {
            sink.check(format!("{prefix}.dyb.{name}"), &digest, DYB_TOL, || {
                Ok(to_f64(check_dyb(r, &p.a, p.z, &w)?.relative()))
            });
        }
        if i == 0 {
            let broken = closed.gauged(Gauge::OffDiagonalKahler(cx(1.0, 0.0)));
            let value = json!({
                "unitarity": check_unitarity(&broken, u, p.z).map(to_f64).ok(),
                "dyb": check_dyb(&broken, &p.a, p.z, &w).map(|r| to_f64(r.relative())).ok(),
            });
            sink.observe(
                format!("{prefix}.kahler_gauge"),
                value,
                "off-diagonal z^c gauge breaks unitarity and the dynamical braid relation",
            );
        }
    }
}

// --- vertex ----------------------------------------------------------------

pub const VERTEX_TOL: f64 = 1e-8;
pub const REFINEMENT_TOL: f64 = 1e-10;
pub const DUALITY_TOL: f64 = 1e-10;
pub const VERTEX_ORDER: usize = 12;
const VERTEX_DRAWS: usize = 3;

/// Band of the vertex checks: `|z| ≤ 0.1`, `|q| ≤ 0.3`, moderate `a` and `ħ`.
pub fn vertex_constraints(n: usize) -> DrawConstraints {
    DrawConstraints {
        n,
        q_modulus: (0.05, 0.3),
        z_modulus: Some((0.01, 0.1)),
        re_box: 0.5,
        hbar_re_box: 0.5,
        pinch: false,
    }
}

fn vertex_checks<T: Real>(prefix: &str, digest: &str, p: &EnvelopeParams<T>, sink: &mut Sink) {
    for k in 0..p.n() {
        sink.checks(
            &format!("{prefix}.k{k}"),
            digest,
            &[("series_vs_integral", VERTEX_TOL), ("refinement", REFINEMENT_TOL), ("circle", VERTEX_TOL)],
            || {
                let s = vertex_series_value(k, VERTEX_ORDER, p)?;
                let nodes = hankel_nodes(k, p)?;
                let i1 = vertex_integral(k, p, nodes)?;
                let i2 = vertex_integral(k, p, 2 * nodes)?;
                let (h, _) = subtracted_solution(4 * VERTEX_ORDER, p)?;
                let circle = vertex_contour(k, p, circle_nodes(k, p)?)?;
                Ok(vec![rel_err_f64(s, i1), to_f64((i1 - i2).norm() / i1.norm()), rel_err_f64(circle, h[k])])
            },
        );
    }
    sink.check(format!("{prefix}.duality"), digest, DUALITY_TOL, || Ok(to_f64(duality_residual(p)?)));
}

pub fn vertex_suite<T: Real>(seed: u64, file: Option<&ParamsFile>, sink: &mut Sink) {
    let mut d = stream(seed, "vertex");
    for n in 2..=3 {
        for i in 0..VERTEX_DRAWS {
            let prefix = format!("vertex.tpn.n{n}.d{i}");
            // Both integral representations need their contour: a Hankel strip
            // and a circle separating the pole families.
            let accept = |p: &EnvelopeParams<T>| {
                (0..p.n()).all(|k| hankel_width(k, p).is_ok() && separating_log_radius(k, p).is_ok())
            };
            match d.draw_with::<T>(&vertex_constraints(n), accept) {
                Ok((raw, p)) => vertex_checks(&prefix, &digest_of(&raw), &p, sink),
                Err(e) => sink.check(prefix, "", VERTEX_TOL, || Err(e)),
            }
        }
    }
    // The matrix solution of the q-difference system reproduces the vertex.
    if let Ok((raw, p)) = d.draw_with::<T>(&vertex_constraints(2), |p| hankel_width(0, p).is_ok()) {
        sink.check("vertex.qdiff.n2", &digest_of(&raw), VERTEX_TOL, || {
            let sol = qdiff_series_solve(&QDiffSystem::tp1(&p, VERTEX_ORDER)?, VERTEX_ORDER)?;
            let x = p.z.value();
            let h = sol.series_at(x);
            let v = vertex_tpn(0, VERTEX_ORDER, &p)?.eval(x);
            Ok(rel_err_f64(h[(0, 0)] + h[(0, 1)], v))
        });
    }
    // Pinched parameters are refused rather than integrated.
    let pinched = DrawConstraints { pinch: true, ..vertex_constraints(2) };
    if let Ok((raw, p)) = d.draw::<T>(&pinched) {
        sink.check("vertex.pinch_detected", &digest_of(&raw), 1.0, || match separating_log_radius(0, &p) {
            Err(Error::ContourPinched(_)) => Ok(0.0),
            _ => Ok(f64::INFINITY),
        });
    }
    if let Some(f) = file {
        let digest = params_digest(f);
        match f.envelope::<T>() {
            Ok(p) => vertex_checks("vertex.file", &digest, &p, sink),
            Err(e) => sink.check("vertex.file", &digest, VERTEX_TOL, || Err(e)),
        }
    }
}

// --- tps -------------------------------------------------------------------

pub const POLE_TOL: f64 = 1e-7;
pub const PERIODICITY_TOL: f64 = 1e-10;
pub const OPPOSITE_ORDER_TOL: f64 = 1e-8;
pub const A_LIMIT_TOL: f64 = 1e-6;
const A_LIMIT_STEPS: [i64; 5] = [8, 9, 10, 11, 12];

/// Parameters of the pole probe: `T*P¹` with `|q| ∈ [0.15, 0.25]`.
pub fn tps_constraints() -> DrawConstraints {
    DrawConstraints {
        n: 2,
        q_modulus: (0.15, 0.25),
        z_modulus: Some((0.02, 0.08)),
        re_box: 0.5,
        hbar_re_box: 0.5,
        pinch: false,
    }
}

/// `T` for the smooth checks, `P` for the per-coefficient residues.
pub fn tps_suite<T: Real, P: Real>(seed: u64, m_max: i64, sink: &mut Sink) {
    let mut d = stream(seed, "tps");
    let (raw, p) = match d.draw::<T>(&tps_constraints()) {
        Ok(x) => x,
        Err(e) => return sink.check("tps.draw", "", POLE_TOL, || Err(e)),
    };
    let digest = digest_of(&raw);
    match raw.params::<P>() {
        Ok(pw) => match pole_cancellation_check(&pw, VERTEX_ORDER, m_max, POLE_TOL, &ProbeGrid::default()) {
            Ok(reports) => {
                for r in reports {
                    let id = format!("tps.pole.m{}.z{:02}", r.m, r.coefficient);
                    sink.check(format!("{id}.residue"), &digest, POLE_TOL, || Ok(r.residue));
                    sink.check(format!("{id}.control"), &digest, 1.0, || Ok(1e3 * POLE_TOL / r.control));
                    sink.check(format!("{id}.control_stable"), &digest, 0.1, || Ok(r.halving_change));
                }
            }
            Err(e) => sink.check("tps.pole", &digest, POLE_TOL, || Err(e)),
        },
        Err(e) => sink.check("tps.pole", &digest, POLE_TOL, || Err(e)),
    }
    sink.checks(
        "tps.subtraction",
        &digest,
        &[("z_period", PERIODICITY_TOL), ("a_period", PERIODICITY_TOL), ("opposite_order", OPPOSITE_ORDER_TOL)],
        || {
            let r = pole_subtraction_periodicity(&p)?;
            Ok(vec![to_f64(r.z_shift), to_f64(r.a_shift), to_f64(r.triangularity)])
        },
    );
    sink.checks("tps.a_limit", &digest, &[("drift", A_LIMIT_TOL), ("half_integer_power", A_LIMIT_TOL)], || {
        let r = a_limit_check(&p, &A_LIMIT_STEPS, &ProbeGrid { z_nodes: 32, ..ProbeGrid::default() })?;
        let off = r.hbar_exponents.iter().map(|e| (e - e.round()).abs()).fold(0.0, f64::max);
        Ok(vec![r.drift, off])
    });
}

// --- limits ----------------------------------------------------------------

pub const THETA_LIMIT_TOL: f64 = 1e-6;
pub const GROWTH_RESIDUAL_TOL: f64 = 1e-10;
pub const SUPPORT_FIT_TOL: f64 = 1e-6;
const GROWTH_ALPHAS: usize = 20;
const SUPPORT_SAMPLES: usize = 32;
/// Within `0.1` of mid-chamber: leakage across a wall at distance `d` is
/// `O(q^d)`, which must stay below the support threshold at the path's end.
const SUPPORT_SLOPES: [f64; 10] = [-0.5, -0.4, 0.4, 0.5, 0.6, 1.4, 1.5, 1.6, 2.5, 2.6];

pub fn limits_suite<T: Real>(seed: u64, sink: &mut Sink) {
    let mut d = stream(seed, "limits");
    let a_log = d.log_point(1.0);
    let a = MultPoint::<T>::new(cx(a_log.0, a_log.1));
    let phase = d.uniform(-1.0, 1.0);
    for k in 0..=2i64 {
        let slope = k as f64 + 0.5;
        let digest = params_digest(&json!({ "a_log": a_log, "slope": slope, "phase": phase }));
        let id = format!("limits.theta_ratio.k{k}");
        let report = SlopePath::new(slope, phase, default_q_sequence())
            .and_then(|path| theta_ratio_limit(a, &path, k, THETA_LIMIT_TOL));
        if let Ok(r) = &report {
            sink.observe(
                format!("{id}.rate"),
                json!({ "fitted": r.fitted_rate, "predicted": r.predicted_rate, "monotone": r.monotone, "errors": r.errors }),
                "error ≈ C q^r along the path",
            );
        }
        sink.check(id, &digest, THETA_LIMIT_TOL, || report.map(|r| r.tail_error));
    }

    for n in 1..=4u32 {
        for i in 0..GROWTH_ALPHAS {
            let alpha = loop {
                let x = d.uniform(-3.0, 3.0);
                if (x - x.round()).abs() > 1e-3 {
                    break x;
                }
            };
            let w_phase = d.uniform(-std::f64::consts::PI, std::f64::consts::PI);
            let digest = params_digest(&json!({ "n": n, "alpha": alpha, "w_phase": w_phase }));
            sink.checks(
                &format!("limits.growth.n{n}.d{i:02}"),
                &digest,
                &[("verdicts", 0.5), ("functional", GROWTH_RESIDUAL_TOL)],
                || {
                    let path = SlopePath::new(0.5, 0.0, default_q_sequence())?;
                    let r = growth_basis::<T>(n, alpha, w_phase, &path)?;
                    let mismatches = r.entries.iter().filter(|e| e.predicted != e.observed).count()
                        + usize::from(r.convergent != n as usize);
                    let functional = r.entries.iter().map(|e| e.functional_residual).fold(0.0, f64::max);
                    Ok(vec![mismatches as f64, functional])
                },
            );
        }
    }

    let h_log = d.log_point(0.5);
    let hbar_half = MultPoint::<T>::new(cx(h_log.0, h_log.1));
    let mut profile: Vec<(f64, Vec<Vec<i64>>)> = Vec::new();
    for &slope in &SUPPORT_SLOPES {
        let digest = params_digest(&json!({ "hbar_half_log": h_log, "slope": slope, "phase": phase }));
        let id = format!("limits.support.L{:+.2}", slope);
        let report = SlopePath::new(slope, phase, default_q_sequence())
            .and_then(|path| stab_support_limit(hbar_half, &path, SUPPORT_SAMPLES, SUPPORT_FIT_TOL));
        if let Ok(r) = &report {
            profile.push((slope, r.entries.iter().map(|e| e.support.clone()).collect()));
            sink.observe(
                format!("{id}.supports"),
                json!(r.entries.iter().map(|e| json!({ "entry": e.entry, "support": e.support, "predicted": e.predicted, "leakage": e.leakage })).collect::<Vec<_>>()),
                "doubled a-exponents",
            );
        }
        sink.checks(&id, &digest, &[("contained", 0.5), ("fit", SUPPORT_FIT_TOL)], || {
            let r = report?;
            let outside = r.entries.iter().filter(|e| !e.contained).count();
            Ok(vec![outside as f64, r.entries.iter().map(|e| e.fit_residual).fold(0.0, f64::max)])
        });
    }
    // Equal supports within a chamber of slopes, a change across every wall.
    sink.check("limits.support.piecewise_constant", &params_digest(&json!({ "hbar_half_log": h_log })), 0.5, || {
        if profile.len() != SUPPORT_SLOPES.len() {
            return Err(Error::InvalidInput("support profile incomplete".into()));
        }
        let violations =
            profile.windows(2).filter(|w| (w[0].0.floor() == w[1].0.floor()) != (w[0].1 == w[1].1)).count();
        Ok(violations as f64)
    });
}

// --- orchestration ---------------------------------------------------------

/// binary128 when compiled in, else `f64`.
#[cfg(feature = "wide")]
pub type WideScalar = f128::f128;
#[cfg(not(feature = "wide"))]
pub type WideScalar = f64;

/// Whether binary128 is compiled in.
pub const WIDE_AVAILABLE: bool = cfg!(feature = "wide");

fn run_one<T: Real, P: Real>(name: &str, cfg: &SuiteConfig, file: Option<&ParamsFile>) -> Sink {
    let mut sink = Sink::new(cfg.timings);
    match name {
        "theta" => theta_suite::<T>(cfg.seed, &mut sink),
        "envelope" => envelope_suite::<T>(cfg.seed, file, &mut sink),
        "grass" => grass_suite::<T>(cfg.seed, &mut sink),
        "rmatrix" => rmatrix_suite::<T>(cfg.seed, cfg.rmatrix_draws, &mut sink),
        "vertex" => vertex_suite::<T>(cfg.seed, file, &mut sink),
        "tps" => tps_suite::<T, P>(cfg.seed, cfg.m_max, &mut sink),
        "limits" => limits_suite::<T>(cfg.seed, &mut sink),
        _ => unreachable!("suite names are validated"),
    }
    sink
}

fn run_generic<T: Real, P: Real>(cfg: &SuiteConfig, names: &[&'static str], file: Option<&ParamsFile>) -> Vec<Sink> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = names.iter().map(|name| scope.spawn(move || run_one::<T, P>(name, cfg, file))).collect();
        handles.into_iter().map(|h| h.join().expect("suite thread panicked")).collect()
    })
}

/// Runs the configured suites and writes the report when `cfg.output` is set.
pub fn run_suite(cfg: &SuiteConfig, precision: Precision) -> Result<VerificationReport> {
    let names = cfg.resolved_suites()?;
    if cfg.m_max < 1 {
        return Err(Error::ConfigInvalid("m_max must be at least 1".into()));
    }
    let file = cfg.params.as_deref().map(ParamsFile::read).transpose()?;
    if let Some(f) = &file {
        f.envelope::<f64>()?;
    }
    let sinks = match precision {
        Precision::Double => run_generic::<f64, WideScalar>(cfg, &names, file.as_ref()),
        Precision::Wide if WIDE_AVAILABLE => run_generic::<WideScalar, WideScalar>(cfg, &names, file.as_ref()),
        Precision::Wide => return Err(Error::ConfigInvalid("built without binary128 support".into())),
    };
    let mut report =
        VerificationReport::new(cfg.seed, precision.label(), names.iter().map(|s| s.to_string()).collect());
    for s in sinks {
        report.records.extend(s.records);
        report.observations.extend(s.observations);
    }
    report.finalize();
    if let Some(path) = &cfg.output {
        std::fs::write(path, report.to_json() + "\n")
            .map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
    }
    Ok(report)
}
