//! q-series special functions: the q-Pochhammer symbol, the infinite product
//! φ, the odd theta function ϑ and the bilinear exponential.
//!
//! Every argument is a [`MultPoint`], i.e. a logarithmic coordinate `u` with
//! `x = exp(u)`. Half powers are `exp(u/2)`, so they are single valued in the
//! stored data; two points whose `u` differ by `2πi` are the same `x` but may
//! carry opposite half-power signs.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{int, lit, to_f64, Cx, Real};

/// Band of `|x|` the auto-truncation policy is sized for.
pub const AUTO_TRUNC_MAX_ABS_X: f64 = 1e6;

/// Modulus `q`, its logarithm, truncation order and target accuracy.
///
/// Immutable after construction. `log_q` fixes the branch used by every
/// half power of `q` and by [`bilinear_exp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QContext<T> {
    q: Cx<T>,
    log_q: Cx<T>,
    trunc: usize,
    tol: T,
}

impl<T: Real> QContext<T> {
    /// Context with tolerance `8·ε` and automatic truncation.
    pub fn new(q: Cx<T>) -> Result<Self> {
        Self::with_tol(q, T::epsilon() * lit(8.0))
    }

    pub fn with_tol(q: Cx<T>, tol: T) -> Result<Self> {
        Self::from_log(q.ln(), tol)
    }

    /// Context from a logarithm of `q`; `Re log_q < 0` is required.
    pub fn from_log(log_q: Cx<T>, tol: T) -> Result<Self> {
        let q = log_q.exp();
        let m = q.norm();
        if !(m > T::zero() && m < T::one()) {
            return Err(Error::InvalidModulus(to_f64(m)));
        }
        if !(tol > T::zero()) {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        let trunc = Self::auto_trunc(m, tol);
        Ok(Self { q, log_q, trunc, tol })
    }

    /// Context with an explicit truncation order.
    pub fn with_trunc(q: Cx<T>, trunc: usize, tol: T) -> Result<Self> {
        let mut ctx = Self::with_tol(q, tol)?;
        ctx.trunc = trunc;
        Ok(ctx)
    }

    /// Smallest `N` whose tail bound at `|x| = 1e6` is below `tol`.
    pub fn auto_trunc(modulus: T, tol: T) -> usize {
        let x_max: T = lit(AUTO_TRUNC_MAX_ABS_X);
        let mut n = 0usize;
        while Self::tail_bound_for(modulus, x_max, n) > tol && n < 100_000 {
            n += 1;
        }
        n
    }

    fn tail_bound_for(modulus: T, abs_x: T, n: usize) -> T {
        let e = modulus.powi(n as i32 + 1) * abs_x / (T::one() - modulus);
        e.exp_m1()
    }

    /// Relative error bound of the order-`trunc` product for φ at `|x|`.
    pub fn tail_bound(&self, abs_x: T) -> T {
        Self::tail_bound_for(self.modulus(), abs_x, self.trunc)
    }

    pub fn q(&self) -> Cx<T> {
        self.q
    }

    pub fn log_q(&self) -> Cx<T> {
        self.log_q
    }

    pub fn modulus(&self) -> T {
        self.q.norm()
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn tol(&self) -> T {
        self.tol
    }

    /// `q` as a group element carrying the branch of `log_q`.
    pub fn q_point(&self) -> MultPoint<T> {
        MultPoint::new(self.log_q)
    }
}

/// Point of the multiplicative group stored by its logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultPoint<T> {
    pub u: Cx<T>,
}

impl<T: Real> MultPoint<T> {
    pub fn new(u: Cx<T>) -> Self {
        Self { u }
    }

    pub fn from_parts(re: T, im: T) -> Self {
        Self { u: Complex::new(re, im) }
    }

    /// Principal logarithm of a nonzero value.
    pub fn from_value(x: Cx<T>) -> Self {
        Self { u: x.ln() }
    }

    pub fn one() -> Self {
        Self { u: Cx::<T>::zero() }
    }

    pub fn value(&self) -> Cx<T> {
        self.u.exp()
    }

    /// `x^{1/2} = exp(u/2)`.
    pub fn half(&self) -> Cx<T> {
        (self.u * lit::<T>(0.5)).exp()
    }

    pub fn inv(&self) -> Self {
        Self { u: -self.u }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self { u: self.u + other.u }
    }

    pub fn div(&self, other: &Self) -> Self {
        Self { u: self.u - other.u }
    }

    pub fn pow(&self, e: i64) -> Self {
        Self { u: self.u * int::<T>(e) }
    }

    /// `x · q^e` with the branch of the context's `log q`.
    pub fn qshift(&self, e: i64, ctx: &QContext<T>) -> Self {
        Self { u: self.u + ctx.log_q * int::<T>(e) }
    }

    pub fn abs(&self) -> T {
        self.u.re.exp()
    }
}

/// Half-integer power of a base point, e.g. `ħ^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfWeight<T> {
    pub base: MultPoint<T>,
    twice_exponent: i64,
}

impl<T: Real> HalfWeight<T> {
    /// `base^{twice_exponent / 2}`.
    pub fn new(base: MultPoint<T>, twice_exponent: i64) -> Self {
        Self { base, twice_exponent }
    }

    pub fn twice_exponent(&self) -> i64 {
        self.twice_exponent
    }

    pub fn exponent(&self) -> f64 {
        self.twice_exponent as f64 / 2.0
    }

    pub fn point(&self) -> MultPoint<T> {
        MultPoint::new(self.base.u * lit::<T>(self.twice_exponent as f64 / 2.0))
    }
}

/// `∏_{j<d} (1 − q^j x)`; exact finite product.
pub fn qpochhammer<T: Real>(x: MultPoint<T>, d: usize, ctx: &QContext<T>) -> Cx<T> {
    let mut p: Cx<T> = Cx::<T>::one();
    let mut t = x.value();
    for _ in 0..d {
        p = p * (Cx::<T>::one() - t);
        t = t * ctx.q;
    }
    p
}

/// `φ(x) = ∏_{i≥0} (1 − q^i x)` truncated at `ctx.trunc`.
///
/// Factors whose correction is below a quarter ulp are skipped; they leave the
/// rounded product unchanged, so the result equals the full truncated product.
/// For `|x| > 1` the leading factors up to `|q^m x| ≤ 1` are multiplied out
/// exactly first.
pub fn phi<T: Real>(x: MultPoint<T>, ctx: &QContext<T>) -> Result<Cx<T>> {
    phi_value(x.value(), ctx)
}

pub(crate) fn phi_value<T: Real>(x: Cx<T>, ctx: &QContext<T>) -> Result<Cx<T>> {
    if !x.norm().is_finite() {
        return Err(Error::InvalidInput("φ at a non-finite argument".into()));
    }
    if x.norm() > T::one() {
        // φ(x) = (x; q)_m φ(q^m x) with |q^m x| ≤ 1.
        let m = (x.norm().ln() / -ctx.modulus().ln()).ceil();
        let m = m.to_usize().unwrap_or(usize::MAX);
        let mut head = Cx::<T>::one();
        let mut t = x;
        for _ in 0..m {
            head = head * (Cx::<T>::one() - t);
            t = t * ctx.q;
        }
        return Ok(head * phi_value(t, ctx)?);
    }
    let bound = ctx.tail_bound(x.norm());
    if !(bound <= ctx.tol) {
        return Err(Error::TruncationInsufficient { bound: to_f64(bound), tol: to_f64(ctx.tol) });
    }
    let negligible = T::epsilon() * lit(0.25);
    let mut p: Cx<T> = Cx::<T>::one();
    let mut t = x;
    for _ in 0..=ctx.trunc {
        if t.norm() < negligible {
            break;
        }
        p = p * (Cx::<T>::one() - t);
        t = t * ctx.q;
    }
    Ok(p)
}

/// `ϑ(x) = (x^{1/2} − x^{−1/2}) φ(qx) φ(q/x)` evaluated straight from the
/// product, without range reduction.
pub fn theta_direct<T: Real>(x: MultPoint<T>, ctx: &QContext<T>) -> Result<Cx<T>> {
    let h = x.half();
    let pre = h - h.inv();
    if pre.is_zero() {
        return Ok(Cx::<T>::zero());
    }
    let xv = x.value();
    Ok(pre * phi_value(ctx.q * xv, ctx)? * phi_value(ctx.q / xv, ctx)?)
}

/// `ϑ(x)` with `x` first moved into the annulus `|q|^{1/2} ≤ |x| ≤ |q|^{-1/2}`
/// via `ϑ(q^e X) = (−1)^e q^{−e²/2} X^{−e} ϑ(X)`.
pub fn theta<T: Real>(x: MultPoint<T>, ctx: &QContext<T>) -> Result<Cx<T>> {
    let e = (x.u.re / ctx.log_q.re).round();
    if e.is_zero() || !e.is_finite() {
        return theta_direct(x, ctx);
    }
    let u0 = x.u - ctx.log_q * e;
    let base = theta_direct(MultPoint::new(u0), ctx)?;
    let log_factor = -(ctx.log_q * (e * e * lit(0.5))) - u0 * e;
    let sign = if e.to_i64().unwrap_or(0) % 2 == 0 { T::one() } else { -T::one() };
    Ok(base * log_factor.exp() * sign)
}

/// `ln ϑ(x)` up to `2πi`, or `None` at a zero. Products of many thetas are
/// formed from these to stay inside the exponent range.
pub fn theta_log<T: Real>(x: MultPoint<T>, ctx: &QContext<T>) -> Result<Option<Cx<T>>> {
    let e = (x.u.re / ctx.log_q.re).round();
    let e = if e.is_finite() { e } else { T::zero() };
    let u0 = x.u - ctx.log_q * e;
    let base = theta_direct(MultPoint::new(u0), ctx)?;
    if base.norm() == T::zero() {
        return Ok(None);
    }
    let odd = e.to_i64().unwrap_or(0).rem_euclid(2) == 1;
    let sign = if odd { Cx::new(T::zero(), T::PI()) } else { Cx::<T>::zero() };
    Ok(Some(base.ln() - ctx.log_q * (e * e * lit(0.5)) - u0 * e + sign))
}

/// Value and magnitude of the three-term theta identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeTerm<T> {
    /// `ϑ(AB)ϑ(A/B)ϑ(C)² + ϑ(BC)ϑ(B/C)ϑ(A)² + ϑ(CA)ϑ(C/A)ϑ(B)²`.
    pub residual: Cx<T>,
    /// Largest modulus among the three terms.
    pub scale: T,
}

impl<T: Real> ThreeTerm<T> {
    pub fn relative(&self) -> T {
        if self.scale > T::zero() {
            self.residual.norm() / self.scale
        } else {
            self.residual.norm()
        }
    }
}

pub fn theta_three_term<T: Real>(
    a: MultPoint<T>,
    b: MultPoint<T>,
    c: MultPoint<T>,
    ctx: &QContext<T>,
) -> Result<ThreeTerm<T>> {
    let term = |x: &MultPoint<T>, y: &MultPoint<T>, w: &MultPoint<T>| -> Result<Cx<T>> {
        let tw = theta(*w, ctx)?;
        Ok(theta(x.mul(y), ctx)? * theta(x.div(y), ctx)? * tw * tw)
    };
    let t1 = term(&a, &b, &c)?;
    let t2 = term(&b, &c, &a)?;
    let t3 = term(&c, &a, &b)?;
    let scale = t1.norm().max(t2.norm()).max(t3.norm());
    Ok(ThreeTerm { residual: t1 + t2 + t3, scale })
}

/// `exp(ln z · ln a / ln q)` from the stored logarithms.
pub fn bilinear_exp<T: Real>(z: MultPoint<T>, a: MultPoint<T>, ctx: &QContext<T>) -> Cx<T> {
    (z.u * a.u / ctx.log_q).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    fn ctx() -> QContext<f64> {
        QContext::new(cx(0.1, 0.0)).unwrap()
    }

    #[test]
    fn pochhammer_hand_values() {
        let c = ctx();
        let x = MultPoint::from_value(cx(0.3, 0.0));
        assert_eq!(qpochhammer(x, 0, &c), cx(1.0, 0.0));
        assert!((qpochhammer(x, 2, &c) - cx(0.679, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn phi_at_zero_argument_is_one() {
        let c = ctx();
        assert_eq!(phi_value(cx(0.0, 0.0), &c).unwrap(), cx(1.0, 0.0));
    }

    #[test]
    fn theta_vanishes_at_one() {
        assert_eq!(theta(MultPoint::<f64>::one(), &ctx()).unwrap(), cx(0.0, 0.0));
    }

    #[test]
    fn auto_trunc_meets_policy() {
        for m in [0.05, 0.3, 0.5, 0.9] {
            let c = QContext::<f64>::new(cx(m, 0.0)).unwrap();
            let lhs = m.powi(c.trunc() as i32);
            assert!(lhs < c.tol() / (1.0 - m), "m={m}");
        }
    }

    #[test]
    fn short_truncation_is_reported() {
        let c = QContext::<f64>::with_trunc(cx(0.5, 0.0), 3, 1e-12).unwrap();
        let err = phi(MultPoint::from_value(cx(0.5, 0.0)), &c).unwrap_err();
        assert!(matches!(err, Error::TruncationInsufficient { .. }));
    }

    #[test]
    fn invalid_modulus_rejected() {
        assert!(QContext::<f64>::new(cx(1.0, 0.0)).is_err());
        assert!(QContext::<f64>::new(cx(0.0, 0.0)).is_err());
    }

    #[test]
    fn half_weight_point() {
        let h = MultPoint::<f64>::from_parts(0.4, 1.0);
        let hw = HalfWeight::new(h, 1);
        assert_eq!(hw.exponent(), 0.5);
        assert!((hw.point().u - h.u * 0.5).norm() < 1e-16);
    }
}
