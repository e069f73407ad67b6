//! Elliptic dynamical R-matrices of the defining representation of `sl₂`.
//!
//! The R-matrix of two chambers is `Stab_{-C}^{-1} ∘ Stab_C` on the middle
//! weight space of `T*P¹`, with the equivariant parameters inverted and the
//! Kähler parameter shifted `z ↦ z ħ`. On `(C²)^{⊗2}` the extreme weight
//! spaces are points and carry the identity.
//!
//! Tensor factors use the basis `|+⟩ = 0`, `|−⟩ = 1` with weights `+1`, `−1`.
//! The fixed points of `T*P¹` sit at `F₁ = |−+⟩` and `F₂ = |+−⟩`.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::envelopes::{restriction_matrix_tpn, Chamber, EnvelopeParams};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::qspecial::{theta, MultPoint, QContext};
use crate::scalar::{fmax, int, Cx, Real};

/// Explicit form of the 2×2 block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RForm {
    /// `M_{-C}^{-1} M_C` from restriction matrices.
    Product,
    /// The simplified closed form of the product.
    Closed,
    /// The standard dynamical matrix.
    Felder,
    Identity,
}

/// Scalar function of the Kähler variable used by diagonal gauges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psi<T> {
    Theta,
    /// `exp(c · u_z²)`.
    Gaussian(Cx<T>),
}

/// Gauge transformations of the 2×2 block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gauge<T> {
    /// `[0][0] ↦ r [0][0]`, `[1][1] ↦ r^{-1} [1][1]` with `r = ψ(z ħ^{-1}) / ψ(z)`.
    Diagonal(Psi<T>),
    /// `[0][1] ↦ f [0][1]`, `[1][0] ↦ f^{-1} [1][0]` with `f = (a_i / a_j)^c`.
    OffDiagonalEquivariant(Cx<T>),
    /// `[0][1] ↦ f [0][1]`, `[1][0] ↦ f^{-1} [1][0]` with `f = z^c`.
    OffDiagonalKahler(Cx<T>),
}

/// Weight of each basis vector of one tensor factor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynWeight {
    pub mu: Vec<i64>,
}

impl DynWeight {
    pub fn sl2_defining() -> Self {
        Self { mu: vec![1, -1] }
    }
}

/// R-matrix evaluator in the spectral ratio `u = a_i/a_j` and `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct RMatrix<T> {
    pub form: RForm,
    pub gauges: Vec<Gauge<T>>,
    /// Evaluate at `z ħ^{-z_shift}`.
    pub z_shift: i64,
    pub hbar_half: MultPoint<T>,
    pub ctx: QContext<T>,
    pub framing: Vec<String>,
}

impl<T: Real> RMatrix<T> {
    pub fn new(form: RForm, hbar_half: MultPoint<T>, ctx: QContext<T>) -> Self {
        Self { form, gauges: Vec::new(), z_shift: 0, hbar_half, ctx, framing: vec!["F1".into(), "F2".into()] }
    }

    pub fn gauged(&self, g: Gauge<T>) -> Self {
        let mut r = self.clone();
        r.gauges.push(g);
        r
    }

    pub fn hbar(&self) -> MultPoint<T> {
        self.hbar_half.pow(2)
    }

    /// 2×2 block on `(F₁, F₂)`.
    pub fn block(&self, u: MultPoint<T>, z: MultPoint<T>) -> Result<CMat<T>> {
        let z = MultPoint::new(z.u - self.hbar().u * int::<T>(self.z_shift));
        let mut m = match self.form {
            RForm::Product => r_from_stab(u, z, self.hbar_half, &self.ctx)?,
            RForm::Closed => r_closed_form(u, z, self.hbar(), &self.ctx)?,
            RForm::Felder => r_felder(u, z, self.hbar(), &self.ctx)?,
            RForm::Identity => CMat::identity(2),
        };
        for g in &self.gauges {
            apply_gauge(&mut m, g, u, z, self.hbar(), &self.ctx)?;
        }
        Ok(m)
    }

    /// Operator on `C² ⊗ C²`.
    pub fn full(&self, u: MultPoint<T>, z: MultPoint<T>) -> Result<CMat<T>> {
        Ok(embed_block(&self.block(u, z)?))
    }
}

fn apply_gauge<T: Real>(
    m: &mut CMat<T>,
    g: &Gauge<T>,
    u: MultPoint<T>,
    z: MultPoint<T>,
    hbar: MultPoint<T>,
    ctx: &QContext<T>,
) -> Result<()> {
    match *g {
        Gauge::Diagonal(psi) => {
            let eval = |x: Cx<T>| -> Result<Cx<T>> {
                match psi {
                    Psi::Theta => theta(MultPoint::new(x), ctx),
                    Psi::Gaussian(c) => Ok((c * x * x).exp()),
                }
            };
            let r = eval(z.u - hbar.u)? / eval(z.u)?;
            m[(0, 0)] = m[(0, 0)] * r;
            m[(1, 1)] = m[(1, 1)] / r;
        }
        Gauge::OffDiagonalEquivariant(c) => {
            let f = (c * u.u).exp();
            m[(0, 1)] = m[(0, 1)] * f;
            m[(1, 0)] = m[(1, 0)] / f;
        }
        Gauge::OffDiagonalKahler(c) => {
            let f = (c * z.u).exp();
            m[(0, 1)] = m[(0, 1)] * f;
            m[(1, 0)] = m[(1, 0)] / f;
        }
    }
    Ok(())
}

/// Places the `(F₁, F₂)` block on `|−+⟩ = 2`, `|+−⟩ = 1`; identity on
/// `|++⟩`, `|−−⟩`.
pub fn embed_block<T: Real>(b: &CMat<T>) -> CMat<T> {
    let mut m = CMat::identity(4);
    let idx = [2, 1];
    for r in 0..2 {
        for c in 0..2 {
            m[(idx[r], idx[c])] = b[(r, c)];
        }
    }
    m
}

/// Restriction matrices of both chambers of `T*P¹` at `a = (u, 1)` after
/// `a_i ↦ a_i^{-1}` and `z ↦ z ħ`, in index order: `(M_{-C}, M_C)`.
pub fn stab_pair_sl2<T: Real>(
    u: MultPoint<T>,
    z: MultPoint<T>,
    hbar_half: MultPoint<T>,
    ctx: &QContext<T>,
) -> Result<(CMat<T>, CMat<T>)> {
    let hbar = hbar_half.pow(2);
    let p =
        EnvelopeParams::new_unchecked(vec![u.inv(), MultPoint::one()], hbar_half, MultPoint::new(z.u + hbar.u), *ctx);
    let c = Chamber::standard(2);
    let plus = restriction_matrix_tpn(&p, &c)?.in_index_order();
    let minus = restriction_matrix_tpn(&p, &c.opposite())?.in_index_order();
    Ok((minus, plus))
}

/// The two matrices of the product form written out from ϑ:
/// `M_{-C} = [[ϑ(u), ϑ(ħ)ϑ(zu)/ϑ(z)], [0, ϑ(ħ/u)]]`,
/// `M_C = [[ϑ(uħ), 0], [ϑ(ħ)ϑ(z/u)/ϑ(z), ϑ(1/u)]]`.
pub fn displayed_stab_pair<T: Real>(
    u: MultPoint<T>,
    z: MultPoint<T>,
    hbar: MultPoint<T>,
    ctx: &QContext<T>,
) -> Result<(CMat<T>, CMat<T>)> {
    let th = |x: Cx<T>| theta(MultPoint::new(x), ctx);
    let (u, z, h) = (u.u, z.u, hbar.u);
    let tz = th(z)?;
    let minus = CMat::from_rows(vec![vec![th(u)?, th(h)? * th(z + u)? / tz], vec![Cx::<T>::zero(), th(h - u)?]]);
    let plus = CMat::from_rows(vec![vec![th(u + h)?, Cx::<T>::zero()], vec![th(h)? * th(z - u)? / tz, th(-u)?]]);
    Ok((minus, plus))
}

/// `M_{-C}^{-1} M_C`.
pub fn r_from_stab<T: Real>(
    u: MultPoint<T>,
    z: MultPoint<T>,
    hbar_half: MultPoint<T>,
    ctx: &QContext<T>,
) -> Result<CMat<T>> {
    let (minus, plus) = stab_pair_sl2(u, z, hbar_half, ctx)?;
    minus.solve(&plus)
}

fn nonzero<T: Real>(x: Cx<T>, what: &str) -> Result<Cx<T>> {
    if x.norm() <= T::min_positive_value() {
        Err(Error::DenominatorVanishes(what.into()))
    } else {
        Ok(x)
    }
}

/// `(1/ϑ(u/ħ)) [[ϑ(zħ)ϑ(z/ħ)ϑ(u)/ϑ(z)², −ϑ(ħ)ϑ(zu)/ϑ(z)], [−ϑ(ħ)ϑ(z/u)/ϑ(z), ϑ(u)]]`.
pub fn r_closed_form<T: Real>(
    u: MultPoint<T>,
    z: MultPoint<T>,
    hbar: MultPoint<T>,
    ctx: &QContext<T>,
) -> Result<CMat<T>> {
    let th = |x: Cx<T>| theta(MultPoint::new(x), ctx);
    let (u, z, h) = (u.u, z.u, hbar.u);
    let tz = nonzero(th(z)?, "ϑ(z)")?;
    let pre = nonzero(th(u - h)?, "ϑ(u/ħ)")?.inv();
    let th_u = th(u)?;
    let th_h = th(h)?;
    Ok(CMat::from_rows(vec![
        vec![pre * th(z + h)? * th(z - h)? * th_u / (tz * tz), -pre * th_h * th(z + u)? / tz],
        vec![-pre * th_h * th(z - u)? / tz, pre * th_u],
    ]))
}

/// `(1/(ϑ(ħ/u)ϑ(z))) [[ϑ(zħ)ϑ(1/u), ϑ(zu)ϑ(ħ)], [ϑ(z/u)ϑ(ħ), ϑ(ħ/z)ϑ(u)]]`.
pub fn r_felder<T: Real>(u: MultPoint<T>, z: MultPoint<T>, hbar: MultPoint<T>, ctx: &QContext<T>) -> Result<CMat<T>> {
    let th = |x: Cx<T>| theta(MultPoint::new(x), ctx);
    let (u, z, h) = (u.u, z.u, hbar.u);
    let pre = (nonzero(th(h - u)?, "ϑ(ħ/u)")? * nonzero(th(z)?, "ϑ(z)")?).inv();
    let th_h = th(h)?;
    Ok(CMat::from_rows(vec![
        vec![pre * th(z + h)? * th(-u)?, pre * th(z + u)? * th_h],
        vec![pre * th(z - u)? * th_h, pre * th(h - z)? * th(u)?],
    ]))
}

/// Flip operator on `C² ⊗ C²`.
pub fn flip<T: Real>() -> CMat<T> {
    let mut p = CMat::zeros(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            p[(2 * i + j, 2 * j + i)] = Cx::<T>::one();
        }
    }
    p
}

/// `max |P R(u^{-1}) P R(u) − 1|`, divided by `max(1, max|R₂₁| · max|R|)`
/// so that the cancellation scale near `ϑ(u/ħ) = 0` does not dominate.
pub fn check_unitarity<T: Real>(r: &RMatrix<T>, u: MultPoint<T>, z: MultPoint<T>) -> Result<T> {
    let p = flip::<T>();
    let r21 = p.matmul(&r.full(u.inv(), z)?).matmul(&p);
    let r12 = r.full(u, z)?;
    let scale = fmax(T::one(), r21.max_abs() * r12.max_abs());
    Ok(r21.matmul(&r12).sub(&CMat::identity(4)).max_abs() / scale)
}

/// Acts with a two-factor operator on factors `(i, j)` of `(C²)^{⊗3}`, with
/// the operator chosen per basis state of the remaining factor.
fn on_factors<T: Real>(i: usize, j: usize, op_for_spectator: &dyn Fn(usize) -> CMat<T>) -> CMat<T> {
    let spectator = 3 - i - j;
    let bit = |state: usize, f: usize| (state >> (2 - f)) & 1;
    let ops = [op_for_spectator(0), op_for_spectator(1)];
    CMat::from_fn(8, 8, |row, col| {
        if bit(row, spectator) != bit(col, spectator) {
            return Cx::<T>::zero();
        }
        let op = &ops[bit(row, spectator)];
        let r = 2 * bit(row, i) + bit(row, j);
        let c = 2 * bit(col, i) + bit(col, j);
        op[(r, c)]
    })
}

/// Result of a dynamical Yang–Baxter evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DybResidual<T> {
    pub residual: T,
    pub scale: T,
}

impl<T: Real> DybResidual<T> {
    pub fn relative(&self) -> T {
        if self.scale > T::zero() {
            self.residual / self.scale
        } else {
            self.residual
        }
    }
}

/// `R₁₂(z) R₁₃(z ħ^{-μ⁽²⁾}) R₂₃(z) − R₂₃(z ħ^{-μ⁽¹⁾}) R₁₃(z) R₁₂(z ħ^{-μ⁽³⁾})` on
/// `(C²)^{⊗3}`, with `R_ij` evaluated at `u = a_i/a_j` and the shifted
/// factor chosen per weight of the spectator.
pub fn check_dyb<T: Real>(
    r: &RMatrix<T>,
    a: &[MultPoint<T>],
    z: MultPoint<T>,
    w: &DynWeight,
) -> Result<DybResidual<T>> {
    if a.len() != 3 || w.mu.len() != 2 {
        return Err(Error::InvalidInput("dynamical Yang–Baxter needs three factors of dimension two".into()));
    }
    let u = |i: usize, j: usize| a[i].div(&a[j]);
    let plain = |i: usize, j: usize| -> Result<CMat<T>> { r.full(u(i, j), z) };
    let shifted = |i: usize, j: usize| -> Result<[CMat<T>; 2]> {
        Ok([wall_shift(r, w.mu[0]).full(u(i, j), z)?, wall_shift(r, w.mu[1]).full(u(i, j), z)?])
    };
    let r12 = plain(0, 1)?;
    let r13 = plain(0, 2)?;
    let r23 = plain(1, 2)?;
    let s13 = shifted(0, 2)?;
    let s23 = shifted(1, 2)?;
    let s12 = shifted(0, 1)?;
    let lhs = on_factors(0, 1, &|_| r12.clone()).matmul(&on_factors(0, 2, &|b| s13[b].clone())).matmul(&on_factors(
        1,
        2,
        &|_| r23.clone(),
    ));
    let rhs = on_factors(1, 2, &|b| s23[b].clone()).matmul(&on_factors(0, 2, &|_| r13.clone())).matmul(&on_factors(
        0,
        1,
        &|b| s12[b].clone(),
    ));
    // Products that cancel are accurate relative to their factors, not their value.
    let norm2 = |m: &[CMat<T>; 2]| fmax(m[0].max_abs(), m[1].max_abs());
    let factors = fmax(r12.max_abs() * norm2(&s13) * r23.max_abs(), norm2(&s23) * r13.max_abs() * norm2(&s12));
    let scale = fmax(fmax(lhs.max_abs(), rhs.max_abs()), factors);
    Ok(DybResidual { residual: lhs.sub(&rhs).max_abs(), scale })
}

/// The evaluator at `z ħ^{-shift}`.
pub fn wall_shift<T: Real>(r: &RMatrix<T>, shift: i64) -> RMatrix<T> {
    let mut out = r.clone();
    out.z_shift += shift;
    out
}

/// Determinant of the closed-form block.
pub fn closed_form_determinant<T: Real>(
    u: MultPoint<T>,
    z: MultPoint<T>,
    hbar: MultPoint<T>,
    ctx: &QContext<T>,
) -> Result<Cx<T>> {
    let m = r_closed_form(u, z, hbar, ctx)?;
    Ok(m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)])
}

/// Entrywise ratio `R_closed / R_Felder` on the 2×2 block.
pub fn gauge_ratio<T: Real>(
    u: MultPoint<T>,
    z: MultPoint<T>,
    hbar: MultPoint<T>,
    ctx: &QContext<T>,
) -> Result<CMat<T>> {
    let a = r_closed_form(u, z, hbar, ctx)?;
    let b = r_felder(u, z, hbar, ctx)?;
    Ok(CMat::from_fn(2, 2, |i, j| a[(i, j)] / b[(i, j)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    #[test]
    fn flip_is_involution() {
        let p = flip::<f64>();
        assert_eq!(p.matmul(&p), CMat::identity(4));
        assert_eq!(p[(1, 2)], cx(1.0, 0.0));
    }

    #[test]
    fn identity_form_is_trivially_unitary() {
        let ctx = QContext::<f64>::new(cx(0.3, 0.0)).unwrap();
        let r = RMatrix::new(RForm::Identity, MultPoint::from_parts(0.1, 0.4), ctx);
        let u = MultPoint::from_parts(0.2, 0.3);
        assert_eq!(check_unitarity(&r, u, MultPoint::from_parts(0.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn wall_shift_composes() {
        let ctx = QContext::<f64>::new(cx(0.3, 0.0)).unwrap();
        let r = RMatrix::new(RForm::Felder, MultPoint::from_parts(0.1, 0.4), ctx);
        assert_eq!(wall_shift(&wall_shift(&r, 2), -2), r);
    }
}
