//! Vertex functions of `T*P^{n-1}`: the hypergeometric series, its prefactor,
//! the two contour-integral representations, the dual envelope `Stab_#` and
//! the pole-subtraction matrix, plus a solver for regular q-difference
//! systems.
//!
//! Conventions, fixed throughout:
//!
//! * `z_# = (−1)^n ħ^{n/2} z`, i.e. `ln z_# = ln z + n ln ħ^{1/2} + iπn`;
//! * the polarization is the opposite one, with weights `ħ^{-1} a_i/a_l` at
//!   `F_i`, and the constant `𝒦_X^{1/2}` is dropped;
//! * `Φ′(1) = φ(q)`: the zero weight is removed from `Φ`.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::envelopes::{restriction_matrix_tpn, Chamber, EnvelopeParams};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::qspecial::{bilinear_exp, phi, qpochhammer, theta, HalfWeight, MultPoint, QContext};
use crate::scalar::{fmax, fmin, imag_unit, int, lit, Cx, Real};

/// Shifted Kähler parameter `z_#` and the data it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpKahler<T> {
    pub z_sharp: MultPoint<T>,
    /// `ħ^{n/2}`.
    pub half_power: HalfWeight<T>,
    /// Exponent of the sign `(−1)^n`, realized as `e^{iπn}`.
    pub sign_exponent: i64,
}

impl<T: Real> SharpKahler<T> {
    pub fn new(p: &EnvelopeParams<T>) -> Self {
        let n = p.n() as i64;
        let half_power = HalfWeight::new(p.hbar(), n);
        let u = p.z.u + half_power.point().u + imag_unit::<T>() * (T::PI() * int::<T>(n));
        Self { z_sharp: MultPoint::new(u), half_power, sign_exponent: n }
    }
}

/// Truncated series `Σ_{d ≤ D} c_d z^d` of the vertex function at `F_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSeries<T> {
    pub coeffs: Vec<Cx<T>>,
    pub fixed_point: usize,
}

impl<T: Real> VertexSeries<T> {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Horner evaluation at `z`.
    pub fn eval(&self, z: Cx<T>) -> Cx<T> {
        self.coeffs.iter().rev().fold(Cx::<T>::zero(), |acc, c| acc * z + *c)
    }
}

/// `c_d = (−q/ħ^{1/2})^{dn} ∏_i (ħ a_i/a_k)_d / (q a_i/a_k)_d` for `d ≤ order`.
pub fn vertex_tpn<T: Real>(k: usize, order: usize, p: &EnvelopeParams<T>) -> Result<VertexSeries<T>> {
    let n = p.n();
    if k >= n {
        return Err(Error::InvalidInput(format!("fixed point {k} out of range for n = {n}")));
    }
    let ctx = &p.ctx;
    let guard: T = lit(crate::envelopes::RESONANCE_GUARD);
    let step = (-(ctx.q() / p.hbar_half.value())).powi(n as i32);
    let mut coeffs = Vec::with_capacity(order + 1);
    coeffs.push(Cx::<T>::one());
    let ratios: Vec<Cx<T>> = p.a.iter().map(|ai| (ai.u - p.a[k].u).exp()).collect();
    let hbar = p.hbar().value();
    let mut qd = Cx::<T>::one();
    for d in 1..=order {
        let q_prev = qd;
        qd = qd * ctx.q();
        let mut c = coeffs[d - 1] * step;
        for (i, r) in ratios.iter().enumerate() {
            let den = Cx::<T>::one() - qd * *r;
            if den.norm() < guard {
                return Err(Error::ResonantDenominator { i, j: k });
            }
            c = c * (Cx::<T>::one() - q_prev * hbar * *r) / den;
        }
        coeffs.push(c);
    }
    Ok(VertexSeries { coeffs, fixed_point: k })
}

/// Direct reassembly of `c_d` from Pochhammer symbols; used to cross-check
/// the recursion.
pub fn vertex_coefficient<T: Real>(k: usize, d: usize, p: &EnvelopeParams<T>) -> Cx<T> {
    let ctx = &p.ctx;
    let n = p.n();
    let mut c = (-(ctx.q() / p.hbar_half.value())).powi((d * n) as i32);
    for ai in &p.a {
        let r = ai.div(&p.a[k]);
        c = c * qpochhammer(p.hbar().mul(&r), d, ctx) / qpochhammer(r.qshift(1, ctx), d, ctx);
    }
    c
}

/// `e^{−ln z_# ln a_k / ln q} ∏_{i≠k} φ(q ħ^{-1} a_k/a_i) / φ(a_k/a_i)`.
pub fn vertex_prefactor<T: Real>(k: usize, p: &EnvelopeParams<T>) -> Result<Cx<T>> {
    let ctx = &p.ctx;
    let zs = SharpKahler::new(p).z_sharp;
    let mut v = bilinear_exp(zs, p.a[k].inv(), ctx);
    let h = p.hbar().u;
    for (i, ai) in p.a.iter().enumerate() {
        if i == k {
            continue;
        }
        let r = p.a[k].u - ai.u;
        let den = phi(MultPoint::new(r), ctx)?;
        if den.norm() < lit(crate::envelopes::RESONANCE_GUARD) {
            return Err(Error::ResonantDenominator { i: k, j: i });
        }
        v = v * phi(MultPoint::new(r - h).qshift(1, ctx), ctx)? / den;
    }
    Ok(v)
}

/// Prefactor times the truncated series.
pub fn vertex_series_value<T: Real>(k: usize, order: usize, p: &EnvelopeParams<T>) -> Result<Cx<T>> {
    Ok(vertex_prefactor(k, p)? * vertex_tpn(k, order, p)?.eval(p.z.value()))
}

/// Integrand of the Barnes-type representation in `σ = ln s`:
/// `e(z_#, s) · φ(q)/φ(q ħ^{-1}) · ∏_i φ(q ħ^{-1}/(a_i s)) / φ(1/(a_i s))`.
fn barnes_integrand<T: Real>(sigma: Cx<T>, zs: MultPoint<T>, p: &EnvelopeParams<T>) -> Result<Cx<T>> {
    let ctx = &p.ctx;
    let h = p.hbar().u;
    let mut v =
        (zs.u * sigma / ctx.log_q()).exp() * phi(ctx.q_point(), ctx)? / phi(MultPoint::new(-h).qshift(1, ctx), ctx)?;
    for ai in &p.a {
        let x = -ai.u - sigma;
        v = v * phi_ratio(x - h + ctx.log_q(), x, ctx)?;
    }
    Ok(v)
}

/// `φ(e^{u})/φ(e^{w})` as a product of factor ratios, which stays finite when
/// both arguments are far outside the unit disk.
fn phi_ratio<T: Real>(u: Cx<T>, w: Cx<T>, ctx: &QContext<T>) -> Result<Cx<T>> {
    let (x, y) = (u.exp(), w.exp());
    let cutoff = T::epsilon() * lit(1e-3);
    let mut qi = Cx::<T>::one();
    let mut acc = Cx::<T>::one();
    let big = x.norm().max(y.norm()).ln().max(T::zero());
    let head = (big / -ctx.log_q().re).ceil().to_usize().unwrap_or(usize::MAX - ctx.trunc());
    for _ in 0..ctx.trunc() + head {
        let den = Cx::<T>::one() - qi * y;
        if den.is_zero() {
            return Err(Error::DenominatorVanishes("φ at a q-lattice point".into()));
        }
        acc = acc * (Cx::<T>::one() - qi * x) / den;
        qi = qi * ctx.q();
        if (qi * x).norm() + (qi * y).norm() < cutoff {
            return Ok(acc);
        }
    }
    Err(Error::TruncationInsufficient {
        bound: crate::scalar::to_f64((qi * x).norm() + (qi * y).norm()),
        tol: crate::scalar::to_f64(cutoff),
    })
}

/// Half-width of the Hankel contour: half the distance from the real axis to
/// the nearest excluded pole, at most `0.3`. Poles sit at
/// `w = (ln(a_k/a_i) − 2πi m)/ln q + j`, so every branch `m` counts, and the
/// contour family itself contributes its `m ≠ 0` copies.
pub fn hankel_width<T: Real>(k: usize, p: &EnvelopeParams<T>) -> Result<T> {
    let lq = p.ctx.log_q();
    // Imaginary spacing of the branch copies in `w`.
    let kappa = (T::PI() * lit(2.0) * lq.re / lq.norm_sqr()).abs();
    let to_lattice = |y: T| {
        let r = y - (y / kappa).round() * kappa;
        r.abs()
    };
    let gap = (0..p.n()).filter(|&i| i != k).map(|i| to_lattice(((p.a[k].u - p.a[i].u) / lq).im)).fold(kappa, fmin);
    if gap < lit(1e-3) {
        return Err(Error::ContourPinched(format!(
            "foreign poles within {:.1e} of the real axis at F{}",
            crate::scalar::to_f64(gap),
            k + 1
        )));
    }
    Ok(fmin(gap * lit(0.5), lit(0.3)))
}

/// Trapezoid intervals for which the Hankel rule is converged to working
/// precision: the analytic strip of the integrand in `t` shrinks with `δ`.
pub fn hankel_nodes<T: Real>(k: usize, p: &EnvelopeParams<T>) -> Result<usize> {
    let delta = crate::scalar::to_f64(hankel_width(k, p)?);
    let digits = -crate::scalar::to_f64(T::epsilon()).ln();
    let n = (digits * 4.5 / delta).ceil() as usize;
    Ok(n.max(480).next_multiple_of(2))
}

/// Hankel-type contour around the poles `σ = −ln a_k + j ln q`, `j ≥ 0`, in
/// the variable `w = (σ + ln a_k)/ln q`:
/// `w(t) = −1/2 + (cosh t − 1) + iδ tanh t`, `|t| ≤ 4`, `δ` from [`hankel_width`], trapezoid rule
/// with `quad_points` intervals.
pub fn vertex_integral<T: Real>(k: usize, p: &EnvelopeParams<T>, quad_points: usize) -> Result<Cx<T>> {
    if k >= p.n() || quad_points < 2 {
        return Err(Error::InvalidInput("vertex integral needs a valid fixed point and ≥ 2 nodes".into()));
    }
    let zs = SharpKahler::new(p).z_sharp;
    let lq = p.ctx.log_q();
    let tmax: T = lit(4.0);
    let delta = hankel_width(k, p)?;
    let dt = tmax * lit(2.0) / int::<T>(quad_points as i64);
    let mut acc = Cx::<T>::zero();
    for j in 0..=quad_points {
        let t = -tmax + dt * int::<T>(j as i64);
        let w = Cx::new(lit::<T>(-0.5) + t.cosh() - T::one(), delta * t.tanh());
        let dw = Cx::new(t.sinh(), delta / (t.cosh() * t.cosh()));
        let sigma = -p.a[k].u + w * lq;
        acc = acc + barnes_integrand(sigma, zs, p)? * dw;
    }
    let two_pi_i = imag_unit::<T>() * (T::PI() * lit(2.0));
    Ok(-(acc * dt) * lq / two_pi_i)
}

/// `Stab_#(F_k)` at Chern root `σ`:
/// `∏_{i<k} ϑ(s a_i ħ) ∏_{i>k} ϑ(s a_i) · ϑ(s a_k ħ^{e} / z_#) / ϑ(ħ^e / z_#)`,
/// `e = n − k` (zero-based `k`).
pub fn stab_sharp_at<T: Real>(k: usize, sigma: Cx<T>, p: &EnvelopeParams<T>, zs: MultPoint<T>) -> Result<Cx<T>> {
    let ctx = &p.ctx;
    let h = p.hbar().u;
    let n = p.n();
    let th = |x: Cx<T>| theta(MultPoint::new(x), ctx);
    let mut v = Cx::<T>::one();
    for (i, ai) in p.a.iter().enumerate() {
        if i < k {
            v = v * th(sigma + ai.u + h)?;
        } else if i > k {
            v = v * th(sigma + ai.u)?;
        }
    }
    let e = h * int::<T>((n - k) as i64);
    let den = th(-zs.u + e)?;
    if den.is_zero() {
        return Err(Error::DenominatorVanishes(format!("ϑ(ħ^{} / z_#)", n - k)));
    }
    Ok(v * th(sigma - zs.u + p.a[k].u + e)? / den)
}

/// `S[k][i] = Stab_#(F_k)|_{F_i}`, i.e. at `s = a_i^{-1}`.
pub fn stab_sharp<T: Real>(p: &EnvelopeParams<T>) -> Result<CMat<T>> {
    let zs = SharpKahler::new(p).z_sharp;
    CMat::try_from_fn(p.n(), p.n(), |k, i| stab_sharp_at(k, -p.a[i].u, p, zs))
}

/// `∏_{i≠j} ϑ(a_i/a_j) ϑ(ħ a_i/a_j)`, the pairing weight at `F_j`.
pub fn pairing_weight<T: Real>(j: usize, p: &EnvelopeParams<T>) -> Result<Cx<T>> {
    let th = |x: Cx<T>| theta(MultPoint::new(x), &p.ctx);
    let mut v = Cx::<T>::one();
    for (i, ai) in p.a.iter().enumerate() {
        if i != j {
            let r = ai.u - p.a[j].u;
            v = v * th(r)? * th(r + p.hbar().u)?;
        }
    }
    Ok(v)
}

/// `max |S · diag(1/pairing) · M_C(z_#) − 1|`.
pub fn duality_residual<T: Real>(p: &EnvelopeParams<T>) -> Result<T> {
    let s = stab_sharp(p)?;
    let zs = SharpKahler::new(p).z_sharp;
    let m = restriction_matrix_tpn(&p.with_z(zs), &Chamber::standard(p.n()))?.in_index_order();
    let w: Vec<Cx<T>> = (0..p.n()).map(|j| pairing_weight(j, p).map(|x| x.inv())).collect::<Result<_>>()?;
    Ok(s.matmul(&CMat::diag(&w)).matmul(&m).sub(&CMat::identity(p.n())).max_abs())
}

/// `𝔓[k][j] = e_{C,k} S[k][j] / (Θ(T^{1/2})|_{F_j} e_j)` with
/// `e_j = e(z_#, a_j^{-1})`, `Θ(T^{1/2})|_{F_j} = ∏_{i≠j} ϑ(ħ^{-1} a_j/a_i)` and
/// `e_{C,k} = e(z_#, a_k^{-1}) · e(ħ, ∏_{i>k} a_k/a_i)`.
pub fn pole_subtraction_matrix<T: Real>(p: &EnvelopeParams<T>) -> Result<CMat<T>> {
    let n = p.n();
    let ctx = &p.ctx;
    let zs = SharpKahler::new(p).z_sharp;
    let s = stab_sharp(p)?;
    let h = p.hbar();
    let half_theta: Vec<Cx<T>> = (0..n)
        .map(|j| {
            (0..n)
                .filter(|&i| i != j)
                .try_fold(Cx::<T>::one(), |acc, i| Ok(acc * theta(MultPoint::new(-h.u + p.a[j].u - p.a[i].u), ctx)?))
        })
        .collect::<Result<_>>()?;
    let e = |j: usize| bilinear_exp(zs, p.a[j].inv(), ctx);
    Ok(CMat::from_fn(n, n, |k, j| {
        let det_a = (k + 1..n).fold(Cx::<T>::zero(), |acc, i| acc + p.a[k].u - p.a[i].u);
        let e_c = e(k) * bilinear_exp(h, MultPoint::new(det_a), ctx);
        e_c * s[(k, j)] / (half_theta[j] * e(j))
    }))
}

/// Periodicity and triangularity residuals of the pole-subtraction matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicityReport<T> {
    /// `max |𝔓(qz) − 𝔓(z)| / max |𝔓|`.
    pub z_shift: T,
    /// Same for every `a_m ↦ q a_m`.
    pub a_shift: T,
    /// Largest entry above the diagonal relative to `max |𝔓|`.
    pub triangularity: T,
}

pub fn pole_subtraction_periodicity<T: Real>(p: &EnvelopeParams<T>) -> Result<PeriodicityReport<T>> {
    use crate::symbolic::Var;
    let base = pole_subtraction_matrix(p)?;
    let z_shift = pole_subtraction_matrix(&p.qshift(Var::Z(0), 1))?.rel_diff(&base);
    let mut a_shift = T::zero();
    for m in 0..p.n() {
        a_shift = a_shift.max(pole_subtraction_matrix(&p.qshift(Var::A(m), 1))?.rel_diff(&base));
    }
    let scale = base.max_abs();
    let mut triangularity = T::zero();
    for k in 0..p.n() {
        for j in k + 1..p.n() {
            triangularity = triangularity.max(base[(k, j)].norm() / scale);
        }
    }
    Ok(PeriodicityReport { z_shift, a_shift, triangularity })
}

/// `G_i = (det T^{1/2})^{-1/2} / Φ(T^∨) · V_i` at `F_i`:
/// `∏_{l≠i} e^{−w/2} / (φ(e^{−w}) φ(ħ e^{w}))` with `w = ln(ħ^{-1} a_i/a_l)`,
/// times the truncated series.
pub fn normalized_vertex<T: Real>(i: usize, order: usize, p: &EnvelopeParams<T>) -> Result<Cx<T>> {
    let ctx = &p.ctx;
    let h = p.hbar().u;
    let mut v = Cx::<T>::one();
    for (l, al) in p.a.iter().enumerate() {
        if l == i {
            continue;
        }
        let w = -h + p.a[i].u - al.u;
        let den = phi(MultPoint::new(-w), ctx)? * phi(MultPoint::new(h + w), ctx)?;
        if den.is_zero() {
            return Err(Error::ResonantDenominator { i, j: l });
        }
        v = v * (-w * lit::<T>(0.5)).exp() / den;
    }
    Ok(v * vertex_tpn(i, order, p)?.eval(p.z.value()))
}

/// `(H_k) = Σ_i S[k][i] G_i`, the pole-subtracted solution.
pub fn subtracted_solution<T: Real>(order: usize, p: &EnvelopeParams<T>) -> Result<(Vec<Cx<T>>, Vec<Cx<T>>)> {
    let s = stab_sharp(p)?;
    let g: Vec<Cx<T>> = (0..p.n()).map(|i| normalized_vertex(i, order, p)).collect::<Result<_>>()?;
    Ok((s.matvec(&g), g))
}

/// Circle through which the theta-function integral is taken: `ln |s|`
/// between the poles `s = q^d/a_i` (`i ≤ k`) and `s = q^{-d}/(ħ a_i)` (`i ≥ k`).
pub fn separating_log_radius<T: Real>(k: usize, p: &EnvelopeParams<T>) -> Result<T> {
    let h = p.hbar().u;
    let inner = p.a[..=k].iter().map(|a| -a.u.re).fold(T::neg_infinity(), fmax);
    let outer = p.a[k..].iter().map(|a| -a.u.re - h.re).fold(T::infinity(), fmin);
    if !(outer - inner > lit(crate::envelopes::RESONANCE_GUARD)) {
        return Err(Error::ContourPinched(format!(
            "no circle separates the pole families for F{} (inner {:.3e}, outer {:.3e})",
            k + 1,
            crate::scalar::to_f64(inner),
            crate::scalar::to_f64(outer)
        )));
    }
    Ok((inner + outer) * lit(0.5))
}

/// Nodes for which the periodic rule on the separating circle is converged
/// to working precision: the error decays like `e^{-N m}` with `m` the log
/// distance from the circle to the nearest pole family.
pub fn circle_nodes<T: Real>(k: usize, p: &EnvelopeParams<T>) -> Result<usize> {
    let r = separating_log_radius(k, p)?;
    let inner = p.a[..=k].iter().map(|a| -a.u.re).fold(T::neg_infinity(), fmax);
    let margin = crate::scalar::to_f64(r - inner);
    let digits = -crate::scalar::to_f64(T::epsilon()).ln();
    Ok(((digits * 1.2 / margin).ceil() as usize).max(256))
}

/// Integrand of the theta-function representation in `σ = ln s`:
/// `(det T^{1/2})^{-1/2} / Φ′(T^∨) · Stab_#(F_k)`.
fn theta_integrand<T: Real>(k: usize, sigma: Cx<T>, zs: MultPoint<T>, p: &EnvelopeParams<T>) -> Result<Cx<T>> {
    let ctx = &p.ctx;
    let h = p.hbar().u;
    let n = p.n();
    let mut v =
        (p.hbar_half.u * int::<T>(n as i64 - 1)).exp() * phi(ctx.q_point(), ctx)? * phi(MultPoint::new(h), ctx)?;
    for ai in &p.a {
        let x = ai.u + sigma;
        v = v * (x * lit::<T>(0.5)).exp() / (phi(MultPoint::new(-x), ctx)? * phi(MultPoint::new(h + x), ctx)?);
    }
    Ok(v * stab_sharp_at(k, sigma, p, zs)?)
}

/// `(1/2πi) ∮ ds/s` over the separating circle, periodic trapezoid rule with
/// `quad_points` nodes. Equals `Σ_i S[k][i] G_i`.
pub fn vertex_contour<T: Real>(k: usize, p: &EnvelopeParams<T>, quad_points: usize) -> Result<Cx<T>> {
    if k >= p.n() || quad_points == 0 {
        return Err(Error::InvalidInput("contour needs a valid fixed point and nodes".into()));
    }
    let log_r = separating_log_radius(k, p)?;
    let zs = SharpKahler::new(p).z_sharp;
    let two_pi = T::PI() * lit(2.0);
    let mut acc = Cx::<T>::zero();
    for j in 0..quad_points {
        let sigma = Cx::new(log_r, two_pi * int::<T>(j as i64) / int::<T>(quad_points as i64));
        acc = acc + theta_integrand(k, sigma, zs, p)?;
    }
    Ok(acc / int::<T>(quad_points as i64))
}

/// Residue probe at one divisor and one `z`-Laurent coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleProbeReport {
    /// The divisor `a₁/a₂ = q^{-m}`.
    pub m: i64,
    /// Laurent index in `z`.
    pub coefficient: i64,
    /// `|Res H| / (ρ max |S G|)`: the residue of the subtracted solution relative
    /// to its individual summands, maximized over components.
    pub residue: f64,
    /// Same estimator on the unsubtracted vertex, maximized over components.
    pub control: f64,
    /// Relative change of the control residue when the radius is halved.
    pub halving_change: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Discrete contour sizes used by [`pole_cancellation_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    /// Nodes on the circle around the divisor.
    pub a_nodes: usize,
    /// Radius around the divisor in log coordinates.
    pub radius: f64,
    /// Nodes on the `z`-circle for Laurent coefficients.
    pub z_nodes: usize,
    /// `ln |z|` of that circle; `None` picks [`z_probe_log_radius`].
    pub log_z_radius: Option<f64>,
    /// Truncation of the series inside `G`.
    pub internal_order: usize,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self { a_nodes: 16, radius: 1e-3, z_nodes: 64, log_z_radius: None, internal_order: 60 }
    }
}

/// `ln |z|` in the middle of the annulus of holomorphy of `Stab_#` around
/// `|z| = |q|^{1/2}`. The poles sit at `z_# = ħ^e q^j`, `e = 1..=n`, `j ∈ ℤ`.
pub fn z_probe_log_radius<T: Real>(p: &EnvelopeParams<T>) -> T {
    let n = p.n() as i64;
    let period = -p.ctx.log_q().re;
    let target = -period * lit(0.5);
    let h = p.hbar().u.re;
    let (mut below, mut above) = (target - period, target + period);
    for e in 1..=n {
        // |z| = |ħ|^{e − n/2} |q|^j
        let b = h * (int::<T>(e) - int::<T>(n) * lit(0.5));
        let up = b + period * ((target - b) / period).ceil();
        let down = b + period * ((target - b) / period).floor();
        above = fmin(above, up);
        below = fmax(below, down);
    }
    (below + above) * lit(0.5)
}

/// Laurent coefficients `0..=order` on the circle `|z| = e^{log_r}`, each
/// indexed `[component][d]`.
struct Laurent<T> {
    /// The subtracted solution `H_k = Σ_i S[k][i] G_i`.
    h: Vec<Vec<Cx<T>>>,
    /// The vertex `G_i`.
    g: Vec<Vec<Cx<T>>>,
    /// `max_i |[z^d] S[k][i] G_i|`, the size of the summands of `H_k`.
    term_scale: Vec<Vec<T>>,
}

fn z_laurent<T: Real>(p: &EnvelopeParams<T>, order: usize, grid: &ProbeGrid) -> Result<Laurent<T>> {
    let n = p.n();
    let log_r: T = match grid.log_z_radius {
        Some(r) => lit(r),
        None => z_probe_log_radius(p),
    };
    let zero = vec![vec![Cx::<T>::zero(); order + 1]; n];
    let mut terms = vec![zero.clone(); n];
    let mut g = zero;
    let nodes = grid.z_nodes;
    let two_pi = T::PI() * lit(2.0);
    for t in 0..nodes {
        let uz = Cx::new(log_r, two_pi * int::<T>(t as i64) / int::<T>(nodes as i64));
        let pz = p.with_z(MultPoint::new(uz));
        let s = stab_sharp(&pz)?;
        let gv: Vec<Cx<T>> = (0..n).map(|i| normalized_vertex(i, grid.internal_order, &pz)).collect::<Result<_>>()?;
        for d in 0..=order {
            let w = (-uz * int::<T>(d as i64)).exp() / int::<T>(nodes as i64);
            for c in 0..n {
                g[c][d] = g[c][d] + gv[c] * w;
                for i in 0..n {
                    terms[c][i][d] = terms[c][i][d] + s[(c, i)] * gv[i] * w;
                }
            }
        }
    }
    let h = (0..n)
        .map(|c| (0..=order).map(|d| (0..n).fold(Cx::<T>::zero(), |acc, i| acc + terms[c][i][d])).collect())
        .collect();
    let term_scale = (0..n)
        .map(|c| (0..=order).map(|d| (0..n).map(|i| terms[c][i][d].norm()).fold(T::zero(), T::max)).collect())
        .collect();
    Ok(Laurent { h, g, term_scale })
}

/// Residue estimates around `a₁/a₂ = q^{-m} e^{ρ e^{iθ}}`:
/// `(Res_H, max summand of H, Res_G, max_G)` per component and coefficient.
type ResidueTable<T> = (Vec<Vec<Cx<T>>>, Vec<Vec<T>>, Vec<Vec<Cx<T>>>, Vec<Vec<T>>);

fn residues_at<T: Real>(
    p: &EnvelopeParams<T>,
    m: i64,
    order: usize,
    grid: &ProbeGrid,
    radius: T,
) -> Result<ResidueTable<T>> {
    let n = p.n();
    let center = p.a[1].u - p.ctx.log_q() * int::<T>(m);
    let mut rh = vec![vec![Cx::<T>::zero(); order + 1]; n];
    let mut rg = rh.clone();
    let mut mh = vec![vec![T::zero(); order + 1]; n];
    let mut mg = mh.clone();
    let nodes = grid.a_nodes;
    let two_pi = T::PI() * lit(2.0);
    for t in 0..nodes {
        let theta = two_pi * int::<T>(t as i64) / int::<T>(nodes as i64);
        let d = Cx::new(theta.cos(), theta.sin()) * radius;
        let mut a = p.a.clone();
        a[0] = MultPoint::new(center + d);
        let l = z_laurent(&p.with_a(a), order, grid)?;
        for c in 0..n {
            for k in 0..=order {
                rh[c][k] = rh[c][k] + l.h[c][k] * d / int::<T>(nodes as i64);
                rg[c][k] = rg[c][k] + l.g[c][k] * d / int::<T>(nodes as i64);
                mh[c][k] = mh[c][k].max(l.term_scale[c][k]);
                mg[c][k] = mg[c][k].max(l.g[c][k].norm());
            }
        }
    }
    Ok((rh, mh, rg, mg))
}

/// Residues of the subtracted solution of `T*P¹` at `a₁/a₂ = q^{-m}`,
/// `m = 1..=m_max`, for every `z`-coefficient `0..=order`, against the
/// unsubtracted vertex as control.
pub fn pole_cancellation_check<T: Real>(
    p: &EnvelopeParams<T>,
    order: usize,
    m_max: i64,
    tol: f64,
    grid: &ProbeGrid,
) -> Result<Vec<PoleProbeReport>> {
    if p.n() != 2 {
        return Err(Error::InvalidInput("pole cancellation is probed on T*P¹".into()));
    }
    let rho: T = lit(grid.radius);
    let mut out = Vec::new();
    for m in 1..=m_max {
        let (rh, mh, rg, mg) = residues_at(p, m, order, grid, rho)?;
        let (_, _, rg2, _) = residues_at(p, m, order, grid, rho * lit(0.5))?;
        for d in 0..=order {
            let rel = |r: Cx<T>, mx: T| crate::scalar::to_f64(r.norm() / (rho * mx));
            let residue = (0..2).map(|c| rel(rh[c][d], mh[c][d])).fold(0.0, f64::max);
            let (control, comp) =
                (0..2)
                    .map(|c| (rel(rg[c][d], mg[c][d]), c))
                    .fold((0.0, 0), |best, x| if x.0 > best.0 { x } else { best });
            if control == 0.0 {
                return Err(Error::ControlDegenerate);
            }
            let r1 = rg[comp][d].norm();
            let halving_change = crate::scalar::to_f64((rg2[comp][d].norm() - r1).abs() / r1);
            let pass = residue < tol && control >= 1e3 * tol && halving_change < 0.1;
            out.push(PoleProbeReport {
                m,
                coefficient: d as i64,
                residue,
                control,
                halving_change,
                tolerance: tol,
                pass,
            });
        }
    }
    Ok(out)
}

/// Behaviour of the normalized subtracted solution along `a₁ ↦ a₁ q^{-j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ALimitReport {
    pub steps: Vec<i64>,
    /// `[component][d]` coefficient at the last step, as `(re, im)`.
    pub limits: Vec<Vec<(f64, f64)>>,
    /// Largest relative change between the last two steps.
    pub drift: f64,
    /// `2 log|c| / log|ħ|` of each `z⁰` limit; integers when the modulus is a
    /// half-integer power of `|ħ|`.
    pub hbar_exponents: Vec<f64>,
}

/// Steps `a₁ ↦ a₁ q^{-j}` towards `0_C` (where `a₁/a₂ → ∞`) and records the
/// `z⁰` and `z¹` Laurent coefficients of `H_k · ∏_{i>k} a_k/a_i`.
pub fn a_limit_check<T: Real>(p: &EnvelopeParams<T>, steps: &[i64], grid: &ProbeGrid) -> Result<ALimitReport> {
    if p.n() != 2 || steps.len() < 2 {
        return Err(Error::InvalidInput("a-limit is probed on T*P¹ with at least two steps".into()));
    }
    let mut history: Vec<Vec<Vec<Cx<T>>>> = Vec::new();
    for &j in steps {
        let mut a = p.a.clone();
        a[0] = MultPoint::new(a[0].u - p.ctx.log_q() * int::<T>(j));
        let q = p.with_a(a.clone());
        let h = z_laurent(&q, 1, grid)?.h;
        let norm = [(a[0].u - a[1].u).exp(), Cx::<T>::one()];
        history.push((0..2).map(|c| h[c].iter().map(|x| *x * norm[c]).collect()).collect());
    }
    let last = &history[history.len() - 1];
    let prev = &history[history.len() - 2];
    let mut drift = T::zero();
    for c in 0..2 {
        for d in 0..2 {
            drift = drift.max((last[c][d] - prev[c][d]).norm() / last[c][d].norm());
        }
    }
    let log_h = p.hbar().u.re;
    Ok(ALimitReport {
        steps: steps.to_vec(),
        limits: last
            .iter()
            .map(|row| row.iter().map(|x| (crate::scalar::to_f64(x.re), crate::scalar::to_f64(x.im))).collect())
            .collect(),
        drift: crate::scalar::to_f64(drift),
        hbar_exponents: last.iter().map(|row| crate::scalar::to_f64(row[0].norm().ln() * lit(2.0) / log_h)).collect(),
    })
}

/// `f(qx) = M(x) f(x)` with `M(x) = Σ_j M_j x^j` given by its Taylor
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct QDiffSystem<T> {
    pub coeffs: Vec<CMat<T>>,
    pub ctx: QContext<T>,
}

impl<T: Real> QDiffSystem<T> {
    pub fn new(coeffs: Vec<CMat<T>>, ctx: QContext<T>) -> Result<Self> {
        let n = coeffs.first().map(CMat::rows).unwrap_or(0);
        if n == 0 || coeffs.iter().any(|m| m.rows() != n || m.cols() != n) {
            return Err(Error::InvalidInput("system coefficients must be nonempty square matrices of one size".into()));
        }
        Ok(Self { coeffs, ctx })
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].rows()
    }

    pub fn m0(&self) -> &CMat<T> {
        &self.coeffs[0]
    }

    pub fn eval(&self, x: Cx<T>) -> CMat<T> {
        self.coeffs.iter().rev().fold(CMat::zeros(self.dim(), self.dim()), |acc, m| acc.scale(x).add(m))
    }

    /// Second-order system of the `T*P¹` vertex at `F₁`, truncated at
    /// `order`: `y(q²z)` from `y(qz)`, `y(z)` with `b = a₂/a₁` and `ζ = q²/ħ`.
    pub fn tp1(p: &EnvelopeParams<T>, order: usize) -> Result<Self> {
        if p.n() != 2 {
            return Err(Error::InvalidInput("the T*P¹ system needs n = 2".into()));
        }
        let q = p.ctx.q();
        let hbar = p.hbar().value();
        let b = (p.a[1].u - p.a[0].u).exp();
        let zeta = q * q / hbar;
        // c2 = b(1 − ζħ²z), c1 = −(1+b)(1 − ζħz), c0 = 1 − ζz; 1/c2 expands geometrically.
        let r = zeta * hbar * hbar;
        let one = Cx::<T>::one();
        let mut coeffs = Vec::with_capacity(order + 1);
        for j in 0..=order {
            let inv_c2 = r.powi(j as i32) / b;
            let inv_c2_prev = if j == 0 { Cx::<T>::zero() } else { r.powi(j as i32 - 1) / b };
            let c0 = inv_c2 - zeta * inv_c2_prev;
            let c1 = -(one + b) * (inv_c2 - zeta * hbar * inv_c2_prev);
            let mut m = CMat::zeros(2, 2);
            if j == 0 {
                m[(0, 1)] = one;
            }
            m[(1, 0)] = -c0;
            m[(1, 1)] = -c1;
            coeffs.push(m);
        }
        Self::new(coeffs, p.ctx)
    }
}

/// Fundamental solution `Y(x) = H(x) · exp(ln M₀ · ln x / ln q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSolution<T> {
    /// `H_0 = 1, H_1, …, H_D`.
    pub series: Vec<CMat<T>>,
    pub eigenvalues: Vec<Cx<T>>,
    m0: CMat<T>,
    log_q: Cx<T>,
}

impl<T: Real> SeriesSolution<T> {
    pub fn series_at(&self, x: Cx<T>) -> CMat<T> {
        let n = self.m0.rows();
        self.series.iter().rev().fold(CMat::zeros(n, n), |acc, m| acc.scale(x).add(m))
    }

    /// `M₀^t` by Lagrange–Sylvester interpolation on the eigenvalues.
    pub fn m0_power(&self, t: Cx<T>) -> Result<CMat<T>> {
        matrix_power(&self.m0, &self.eigenvalues, t)
    }

    /// `Y` at the point with logarithm `ln_x`.
    pub fn eval(&self, ln_x: Cx<T>) -> Result<CMat<T>> {
        Ok(self.series_at(ln_x.exp()).matmul(&self.m0_power(ln_x / self.log_q)?))
    }
}

/// Eigenvalues from the Faddeev–LeVerrier characteristic polynomial and
/// Durand–Kerner root refinement.
pub fn eigenvalues<T: Real>(m: &CMat<T>) -> Vec<Cx<T>> {
    let n = m.rows();
    // c[k] is the coefficient of λ^{n-k}.
    let mut c = vec![Cx::<T>::one()];
    let mut mk = CMat::zeros(n, n);
    for k in 1..=n {
        let prev = c[k - 1];
        mk = m.matmul(&mk.add(&CMat::identity(n).scale(prev)));
        let tr = (0..n).fold(Cx::<T>::zero(), |acc, i| acc + mk[(i, i)]);
        c.push(-tr / int::<T>(k as i64));
    }
    let scale = m.max_abs().max(T::one());
    let mut roots: Vec<Cx<T>> = (0..n).map(|i| Cx::new(lit::<T>(0.4), lit::<T>(0.9)).powi(i as i32) * scale).collect();
    let poly = |x: Cx<T>| c.iter().fold(Cx::<T>::zero(), |acc, ci| acc * x + *ci);
    for _ in 0..500 {
        let mut moved = T::zero();
        for i in 0..n {
            let mut den = Cx::<T>::one();
            for j in 0..n {
                if i != j {
                    den = den * (roots[i] - roots[j]);
                }
            }
            let step = poly(roots[i]) / den;
            roots[i] = roots[i] - step;
            moved = moved.max(step.norm());
        }
        if moved <= T::epsilon() * scale {
            break;
        }
    }
    roots
}

fn matrix_power<T: Real>(m: &CMat<T>, eig: &[Cx<T>], t: Cx<T>) -> Result<CMat<T>> {
    let n = m.rows();
    let is_diag = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)].is_zero()));
    if is_diag {
        return Ok(CMat::diag(&(0..n).map(|i| (m[(i, i)].ln() * t).exp()).collect::<Vec<_>>()));
    }
    let mut out = CMat::zeros(n, n);
    for (i, mu) in eig.iter().enumerate() {
        let mut proj = CMat::identity(n);
        for (j, nu) in eig.iter().enumerate() {
            if i == j {
                continue;
            }
            let gap = *mu - *nu;
            if gap.norm() <= T::epsilon().sqrt() * mu.norm().max(T::one()) {
                return Err(Error::InvalidInput("repeated eigenvalue of a non-diagonal M₀".into()));
            }
            proj = proj.matmul(&m.sub(&CMat::identity(n).scale(*nu))).scale(gap.inv());
        }
        out = out.add(&proj.scale((mu.ln() * t).exp()));
    }
    Ok(out)
}

/// Solves `q^d H_d M₀ − M₀ H_d = Σ_{j=1}^{d} M_j H_{d−j}` order by order.
pub fn qdiff_series_solve<T: Real>(sys: &QDiffSystem<T>, order: usize) -> Result<SeriesSolution<T>> {
    let n = sys.dim();
    let m0 = sys.m0().clone();
    let eig = eigenvalues(&m0);
    let tol = sys.ctx.tol().max(T::epsilon() * lit(64.0));
    for (i, mi) in eig.iter().enumerate() {
        for (j, mj) in eig.iter().enumerate() {
            let mut qd = Cx::<T>::one();
            for d in 1..=order.max(1) {
                qd = qd * sys.ctx.q();
                if (*mi - qd * *mj).norm() <= tol * mi.norm().max(mj.norm()) {
                    return Err(Error::Resonant(format!("μ_{}/μ_{} = q^{d}", i + 1, j + 1)));
                }
            }
        }
    }
    let mut series = vec![CMat::identity(n)];
    let mut qd = Cx::<T>::one();
    for d in 1..=order {
        qd = qd * sys.ctx.q();
        let mut rhs = CMat::zeros(n, n);
        for j in 1..=d.min(sys.coeffs.len() - 1) {
            rhs = rhs.add(&sys.coeffs[j].matmul(&series[d - j]));
        }
        // Unknown X = H_d flattened row-major: index r*n + c.
        let big = CMat::from_fn(n * n, n * n, |row, col| {
            let (r, c) = (row / n, row % n);
            let (rr, cc) = (col / n, col % n);
            let mut v = Cx::<T>::zero();
            if rr == r {
                v = v + qd * m0[(cc, c)];
            }
            if cc == c {
                v = v - m0[(r, rr)];
            }
            v
        });
        let vec_rhs = CMat::from_fn(n * n, 1, |row, _| rhs[(row / n, row % n)]);
        let x = big.solve(&vec_rhs)?;
        series.push(CMat::from_fn(n, n, |r, c| x[(r * n + c, 0)]));
    }
    Ok(SeriesSolution { series, eigenvalues: eig, m0, log_q: sys.ctx.log_q() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    #[test]
    fn eigenvalues_of_triangular() {
        let m = CMat::<f64>::from_rows(vec![vec![cx(2.0, 0.0), cx(1.0, 0.0)], vec![cx(0.0, 0.0), cx(-0.5, 0.3)]]);
        let mut e = eigenvalues(&m);
        e.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((e[0] - cx(-0.5, 0.3)).norm() < 1e-13);
        assert!((e[1] - cx(2.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn matrix_power_matches_repeated_product() {
        let m = CMat::<f64>::from_rows(vec![vec![cx(1.2, 0.1), cx(0.4, 0.0)], vec![cx(0.3, -0.2), cx(0.7, 0.0)]]);
        let e = eigenvalues(&m);
        let p3 = matrix_power(&m, &e, cx(3.0, 0.0)).unwrap();
        assert!(p3.rel_diff(&m.matmul(&m).matmul(&m)) < 1e-12);
    }
}
