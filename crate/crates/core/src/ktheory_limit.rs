//! The `q → 0` degeneration: theta ratios along slope paths, the solution
//! basis of `f(qz) = q^α w z^{-N} f(z)`, and the Laurent support of the
//! normalized `T*P¹` envelope.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::envelopes::{restriction_matrix_tpn, Chamber, EnvelopeParams};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::qspecial::{theta, MultPoint, QContext};
use crate::scalar::{imag_unit, int, lit, to_f64, Cx, Real};

/// Distance from an integer below which a slope counts as a wall.
pub const WALL_GUARD: f64 = 1e-6;

/// `q_j = 10^{-j}`, `j = 2..=6`.
pub fn default_q_sequence() -> Vec<f64> {
    (2..=6).map(|j| 10f64.powi(-j)).collect()
}

/// `z = q^{-L} e^{iθ}` along a decreasing sequence of real `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopePath {
    pub slope: f64,
    /// `θ`, the phase of `ζ`.
    pub phase: f64,
    pub q_sequence: Vec<f64>,
}

impl SlopePath {
    pub fn new(slope: f64, phase: f64, q_sequence: Vec<f64>) -> Result<Self> {
        if (slope - slope.round()).abs() < WALL_GUARD {
            return Err(Error::SlopeOnWall(slope));
        }
        if q_sequence.is_empty()
            || q_sequence.iter().any(|&q| !(1e-8..1.0).contains(&q))
            || q_sequence.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::ConfigInvalid("q_sequence must decrease strictly within [1e-8, 1)".into()));
        }
        Ok(Self { slope, phase, q_sequence })
    }

    /// `ln z` at the point with modulus `q`.
    pub fn log_z<T: Real>(&self, q: f64) -> Cx<T> {
        Cx::new(lit::<T>(-self.slope * q.ln()), lit(self.phase))
    }

    fn context<T: Real>(q: f64) -> Result<QContext<T>> {
        QContext::from_log(Cx::new(lit(q.ln()), T::zero()), T::epsilon())
    }
}

/// Least-squares slope of `ln err` against `ln q` over the given points.
fn fitted_rate(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > 0.0).map(|&(q, e)| (q.ln(), e.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaLimitReport {
    pub k: i64,
    pub slope: f64,
    /// `(q, |ϑ(az)/ϑ(z) · a^{-k-1/2} − 1|)` along the path.
    pub errors: Vec<(f64, f64)>,
    pub tail_error: f64,
    /// Fitted exponent `r` in `error ≈ C q^r`.
    pub fitted_rate: f64,
    /// `min(L − k, k + 1 − L)`.
    pub predicted_rate: f64,
    /// Errors decrease strictly along the path.
    pub monotone: bool,
    pub tolerance: f64,
    pub pass: bool,
}

/// `ϑ(az)/ϑ(z) → a^{k+1/2}` for `L ∈ (k, k+1)`.
pub fn theta_ratio_limit<T: Real>(a: MultPoint<T>, path: &SlopePath, k: i64, tol: f64) -> Result<ThetaLimitReport> {
    let l = path.slope;
    if !(l > k as f64 && l < (k + 1) as f64) {
        return Err(Error::InvalidInput(format!("slope {l} is not in ({k}, {})", k + 1)));
    }
    let target = (a.u * (int::<T>(k) + lit(0.5))).exp();
    let mut errors = Vec::with_capacity(path.q_sequence.len());
    for &q in &path.q_sequence {
        let ctx = SlopePath::context::<T>(q)?;
        let uz = path.log_z::<T>(q);
        let r = theta(MultPoint::new(a.u + uz), &ctx)? / theta(MultPoint::new(uz), &ctx)?;
        errors.push((q, to_f64((r / target - Cx::<T>::one()).norm())));
    }
    let tail_error = errors.last().map(|e| e.1).unwrap_or(f64::NAN);
    Ok(ThetaLimitReport {
        k,
        slope: l,
        fitted_rate: fitted_rate(&errors),
        predicted_rate: (l - k as f64).min(k as f64 + 1.0 - l),
        monotone: errors.windows(2).all(|w| w[1].1 < w[0].1),
        tail_error,
        tolerance: tol,
        pass: tail_error < tol,
        errors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthEntry {
    pub k: i64,
    pub beta: f64,
    /// `α < k < α + N`.
    pub predicted: bool,
    /// The off-`z^k` coefficients shrink along the `q`-sequence tail.
    pub observed: bool,
    /// `(q, |c_k − 1|, max_{j≠k} |c_j|)` from the discrete Fourier transform on `|z| = 1`.
    pub coefficients: Vec<(f64, f64, f64)>,
    /// `max |f(qz) − q^α w z^{-N} f(z)| / max |f|` at `q = 0.2`.
    pub functional_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub n: u32,
    pub alpha: f64,
    pub entries: Vec<GrowthEntry>,
    /// Number of convergent `k`, which must equal `N`.
    pub convergent: usize,
    pub pass: bool,
}

/// Terms `|m| ≤ GROWTH_TERMS` of the lattice sum.
const GROWTH_TERMS: i64 = 8;

/// `f_k(z) = z^k Σ_m q^{N m²/2} (w^{-1} q^β z^N)^m` at `ln z`.
fn growth_function<T: Real>(k: i64, n: u32, beta: f64, w_phase: f64, log_q: T, uz: Cx<T>) -> Cx<T> {
    let nn = int::<T>(n as i64);
    let mut acc = Cx::<T>::zero();
    for m in -GROWTH_TERMS..=GROWTH_TERMS {
        let mr = int::<T>(m);
        let expo = log_q * (nn * mr * mr * lit(0.5) + lit::<T>(beta) * mr);
        acc = acc + (Cx::new(expo, -lit::<T>(w_phase) * mr) + uz * nn * mr).exp();
    }
    acc * (uz * int::<T>(k)).exp()
}

/// Solution basis of `f(qz) = q^α w z^{-N} f(z)` for every `k` within `N` of
/// the window `(α, α + N)`, with convergence read off the `z`-coefficients.
pub fn growth_basis<T: Real>(n: u32, alpha: f64, w_phase: f64, path: &SlopePath) -> Result<GrowthReport> {
    if n == 0 || (alpha - alpha.round()).abs() < WALL_GUARD {
        return Err(Error::InvalidInput("growth basis needs N ≥ 1 and non-integer α".into()));
    }
    let nn = n as i64;
    let nodes = (4 * (GROWTH_TERMS * nn + 2 * nn + alpha.abs().ceil() as i64 + 2)) as usize;
    let two_pi = T::PI() * lit(2.0);
    let lo = alpha.floor() as i64 + 1 - nn;
    let hi = (alpha + n as f64).ceil() as i64 - 1 + nn;
    let mut entries = Vec::new();
    for k in lo..=hi {
        let beta = k as f64 - n as f64 / 2.0 - alpha;
        let mut coefficients = Vec::with_capacity(path.q_sequence.len());
        for &q in &path.q_sequence {
            let lq: T = lit(q.ln());
            let samples: Vec<Cx<T>> = (0..nodes)
                .map(|j| {
                    let uz = Cx::new(T::zero(), two_pi * int::<T>(j as i64) / int::<T>(nodes as i64));
                    growth_function(k, n, beta, w_phase, lq, uz)
                })
                .collect();
            let coeff = |d: i64| {
                samples.iter().enumerate().fold(Cx::<T>::zero(), |acc, (j, f)| {
                    let ang = -two_pi * int::<T>(d * j as i64) / int::<T>(nodes as i64);
                    acc + *f * Cx::new(ang.cos(), ang.sin())
                }) / int::<T>(nodes as i64)
            };
            let ck = to_f64((coeff(k) - Cx::<T>::one()).norm());
            let off = (-GROWTH_TERMS..=GROWTH_TERMS)
                .filter(|&m| m != 0)
                .map(|m| to_f64(coeff(k + nn * m).norm()))
                .fold(0.0, f64::max);
            coefficients.push((q, ck, off));
        }
        let observed = match coefficients.as_slice() {
            [.., prev, last] => last.2 < prev.2 && last.2 < 1.0,
            [only] => only.2 < 1.0,
            [] => false,
        };
        entries.push(GrowthEntry {
            k,
            beta,
            predicted: alpha < k as f64 && (k as f64) < alpha + n as f64,
            observed,
            coefficients,
            functional_residual: growth_functional_residual::<T>(k, n, alpha, beta, w_phase),
        });
    }
    let convergent = entries.iter().filter(|e| e.observed).count();
    let pass =
        entries.iter().all(|e| e.predicted == e.observed && e.functional_residual < 1e-10) && convergent == n as usize;
    Ok(GrowthReport { n, alpha, entries, convergent, pass })
}

fn growth_functional_residual<T: Real>(k: i64, n: u32, alpha: f64, beta: f64, w_phase: f64) -> f64 {
    let q = 0.2f64;
    let lq: T = lit(q.ln());
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for j in 0..16 {
        let uz = Cx::new(lit::<T>(0.3 * (j as f64 / 16.0) - 0.15), lit::<T>(0.4 * j as f64));
        let lhs = growth_function(k, n, beta, w_phase, lq, uz + lq);
        let f = growth_function(k, n, beta, w_phase, lq, uz);
        let rhs = (Cx::new(lq * lit(alpha), lit(w_phase)) - uz * int::<T>(n as i64)).exp() * f;
        worst = worst.max(to_f64((lhs - rhs).norm()));
        scale = scale.max(to_f64(lhs.norm()).max(to_f64(rhs.norm())));
    }
    worst / scale
}

/// Laurent fit of one normalized `T*P¹` entry in `a = a₁/a₂`, exponents in
/// units of `1/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportEntry {
    /// Row (restriction point) and column (fixed point of the envelope).
    pub entry: (usize, usize),
    /// Closed interval `Δ_{F_row} + L (w_row − w_col)` in integer `a`-degrees.
    pub window: (f64, f64),
    /// Doubled exponents `2e` with `|c_e| > support_threshold · max |c|`.
    pub support: Vec<i64>,
    /// Doubled exponents of the lattice points of `window`.
    pub predicted: Vec<i64>,
    /// `max_j |f(a_j) − Σ_{window ± guards} c_e a_j^e| / max |f|`.
    pub fit_residual: f64,
    /// Largest coefficient outside the window relative to the largest inside.
    pub leakage: f64,
    pub contained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub slope: f64,
    pub q: f64,
    pub entries: Vec<SupportEntry>,
    pub fit_tolerance: f64,
    pub pass: bool,
}

/// Doubled exponents kept on each side of the window.
const GUARD_SLOTS: i64 = 2;

/// Relative size below which a Laurent coefficient is not in the support.
pub const SUPPORT_THRESHOLD: f64 = 1e-2;

/// Newton interval of `∏_{w ∈ N^{1/2}} (1 − w^{-1})` at `F_j` in `a = a₁/a₂`
/// with polarization weight `a_l/a_j`: `[0, 1]` at `F₁`, `[−1, 0]` at `F₂`.
fn delta_tp1(j: usize) -> (f64, f64) {
    if j == 0 {
        (0.0, 1.0)
    } else {
        (-1.0, 0.0)
    }
}

/// `a`-weight of `𝒪(1)` at `F_j`.
fn line_bundle_weight_tp1(j: usize) -> f64 {
    j as f64
}

/// `Stab_▽ = (det T^{1/2})^{-1/2} Stab` on `T*P¹` (`X^A` is two points),
/// sampled on `|a| = 1` along the tail of `path` and fitted by Laurent
/// polynomials in `a^{1/2}`.
pub fn stab_support_limit<T: Real>(
    hbar_half: MultPoint<T>,
    path: &SlopePath,
    samples: usize,
    fit_tol: f64,
) -> Result<SupportReport> {
    let q = *path.q_sequence.last().ok_or_else(|| Error::ConfigInvalid("empty q_sequence".into()))?;
    let ctx = SlopePath::context::<T>(q)?;
    let l = path.slope;
    let windows: Vec<((usize, usize), (f64, f64))> = [(0, 0), (1, 0), (1, 1)]
        .into_iter()
        .map(|(j, k)| {
            let (lo, hi) = delta_tp1(j);
            let shift = l * (line_bundle_weight_tp1(j) - line_bundle_weight_tp1(k));
            ((j, k), (lo + shift, hi + shift))
        })
        .collect();
    let span = windows
        .iter()
        .map(|(_, (lo, hi))| 2 * (hi.floor() as i64 - lo.ceil() as i64) + 1 + 2 * GUARD_SLOTS)
        .max()
        .unwrap_or(1);
    if (samples as i64) < span {
        return Err(Error::FitUnderdetermined { samples, window: span as usize });
    }
    // a = e^{iθ} with θ ∈ (0, 4π) off a = 1: a^{1/2} is single-valued along the samples.
    let four_pi = T::PI() * lit(4.0);
    let angle = |t: usize| four_pi * (int::<T>(t as i64) + lit(0.5)) / int::<T>(samples as i64);
    let mut values = vec![CMat::<T>::zeros(2, 2); samples];
    let uz = path.log_z::<T>(q);
    for (t, v) in values.iter_mut().enumerate() {
        let ua = Cx::new(T::zero(), angle(t));
        let a = vec![MultPoint::new(ua), MultPoint::one()];
        let p = EnvelopeParams::new(a, hbar_half, MultPoint::new(uz), ctx)?;
        let m = restriction_matrix_tpn(&p, &Chamber::standard(2))?.in_index_order();
        // det T^{1/2}|_{F₁} = a^{-1}, det T^{1/2}|_{F₂} = a.
        let det_half = [(ua * lit::<T>(0.5)).exp(), (-ua * lit::<T>(0.5)).exp()];
        *v = CMat::from_fn(2, 2, |j, k| m[(j, k)] * det_half[j]);
    }
    let mut entries = Vec::new();
    for ((j, k), (lo, hi)) in windows {
        let f: Vec<Cx<T>> = values.iter().map(|v| v[(j, k)]).collect();
        // c_e for doubled exponent d: mean of f · a^{-d/2}.
        let coeff = |d: i64| {
            f.iter().enumerate().fold(Cx::<T>::zero(), |acc, (t, x)| {
                let ang = -angle(t) * int::<T>(d) * lit(0.5);
                acc + *x * Cx::new(ang.cos(), ang.sin())
            }) / int::<T>(samples as i64)
        };
        let (dlo, dhi) = (2 * lo.ceil() as i64 - GUARD_SLOTS, 2 * hi.floor() as i64 + GUARD_SLOTS);
        let coeffs: Vec<(i64, Cx<T>)> = (dlo..=dhi).map(|d| (d, coeff(d))).collect();
        let fmax = f.iter().map(|x| to_f64(x.norm())).fold(0.0, f64::max);
        let mut fit_residual = 0.0f64;
        for (t, x) in f.iter().enumerate() {
            let ua = angle(t);
            let model = coeffs.iter().fold(Cx::<T>::zero(), |acc, (d, c)| {
                acc + *c * (imag_unit::<T>() * (ua * int::<T>(*d) * lit::<T>(0.5))).exp()
            });
            fit_residual = fit_residual.max(to_f64((*x - model).norm()));
        }
        let fit_residual = if fmax > 0.0 { fit_residual / fmax } else { fit_residual };
        let predicted: Vec<i64> = (lo.ceil() as i64..=hi.floor() as i64).map(|e| 2 * e).collect();
        let inside =
            coeffs.iter().filter(|(d, _)| predicted.contains(d)).map(|(_, c)| to_f64(c.norm())).fold(0.0, f64::max);
        let outside =
            coeffs.iter().filter(|(d, _)| !predicted.contains(d)).map(|(_, c)| to_f64(c.norm())).fold(0.0, f64::max);
        let cmax = inside.max(outside);
        let support: Vec<i64> =
            coeffs.iter().filter(|(_, c)| to_f64(c.norm()) > SUPPORT_THRESHOLD * cmax).map(|(d, _)| *d).collect();
        let contained = !support.is_empty() && support.iter().all(|d| predicted.contains(d));
        entries.push(SupportEntry {
            entry: (j, k),
            window: (lo, hi),
            support,
            predicted,
            fit_residual,
            leakage: if inside > 0.0 { outside / inside } else { f64::INFINITY },
            contained,
        });
    }
    let pass = entries.iter().all(|e| e.contained && e.fit_residual < fit_tol);
    Ok(SupportReport { slope: l, q, entries, fit_tolerance: fit_tol, pass })
}

/// Supports of every entry at each slope, for piecewise-constancy checks.
pub fn support_profile<T: Real>(
    hbar_half: MultPoint<T>,
    slopes: &[f64],
    phase: f64,
    q_sequence: &[f64],
    samples: usize,
    fit_tol: f64,
) -> Result<Vec<SupportReport>> {
    slopes
        .iter()
        .map(|&l| stab_support_limit(hbar_half, &SlopePath::new(l, phase, q_sequence.to_vec())?, samples, fit_tol))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wall_slopes_rejected() {
        assert!(matches!(SlopePath::new(1.0, 0.0, default_q_sequence()), Err(Error::SlopeOnWall(_))));
        assert!(SlopePath::new(0.5, 0.0, vec![1e-3, 1e-2]).is_err());
    }

    #[test]
    fn fitted_rate_of_power_law() {
        let pts: Vec<(f64, f64)> = default_q_sequence().into_iter().map(|q| (q, 3.0 * q.powf(0.7))).collect();
        assert!((fitted_rate(&pts) - 0.7).abs() < 1e-12);
    }
}
