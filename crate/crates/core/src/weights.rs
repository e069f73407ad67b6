//! Torus weights of tangent spaces at fixed points, their attracting and
//! repelling parts for a cocharacter, and the associated theta products.
//!
//! Independent of the envelope formulas: the diagonal normalization of every
//! restriction matrix is checked against the products built here.

use num_traits::One;

use crate::error::Result;
use crate::qspecial::{theta, MultPoint, QContext};
use crate::scalar::{Cx, Real};
use crate::symbolic::{Layout, Monomial, Point, Var};

/// A tangent weight and whether it belongs to the polarization `T^{1/2}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TangentWeight {
    pub weight: Monomial,
    pub polarized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Attracting,
    Repelling,
    Fixed,
}

/// Tangent weights of `T*Gr(k, n)` at the fixed point `mu` (strictly
/// increasing zero-based indices): `a_l/a_m` (polarized) and `ħ^{-1} a_m/a_l`
/// for `m ∈ mu`, `l ∉ mu`. With `k = 1` this is `T*P^{n-1}`.
pub fn cotangent_grassmannian_weights(mu: &[usize], n: usize) -> Vec<TangentWeight> {
    let layout = Layout { n_a: n, n_s: 0, n_z: 0 };
    let mut out = Vec::new();
    for &m in mu {
        for l in (0..n).filter(|l| !mu.contains(l)) {
            let w = Monomial::var(layout, Var::A(l)).times_var(Var::A(m), -1);
            out.push(TangentWeight { weight: w.clone(), polarized: true });
            out.push(TangentWeight { weight: w.pow(-1).times_var(Var::Hbar, -1), polarized: false });
        }
    }
    out
}

/// Classifies a weight by its pairing with a cocharacter: weights that tend to
/// zero along `a_i = t^{c_i}, t → 0` are attracting.
pub fn direction(w: &Monomial, cocharacter: &[i64]) -> Direction {
    let pairing: i64 = w.a.iter().zip(cocharacter).map(|(e, c)| e * c).sum();
    match pairing.signum() {
        1 => Direction::Attracting,
        -1 => Direction::Repelling,
        _ => Direction::Fixed,
    }
}

/// `(−1)^{rk ind} ∏_{repelling w} ϑ(w)` where `ind` is the attracting part of
/// the polarization; weights fixed by the cocharacter are skipped.
pub fn repelling_theta_product<T: Real>(
    weights: &[TangentWeight],
    cocharacter: &[i64],
    a: &[MultPoint<T>],
    hbar: MultPoint<T>,
    ctx: &QContext<T>,
) -> Result<Cx<T>> {
    let point = Point { a: a.iter().map(|x| x.u).collect(), s: vec![], z: vec![], hbar: hbar.u };
    let mut acc = Cx::<T>::one();
    let mut ind = 0usize;
    for tw in weights {
        match direction(&tw.weight, cocharacter) {
            Direction::Repelling => {
                acc = acc * theta(MultPoint::new(tw.weight.log_at(&point)), ctx)?;
            }
            Direction::Attracting if tw.polarized => ind += 1,
            _ => {}
        }
    }
    Ok(if ind % 2 == 1 { -acc } else { acc })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tpn_weight_count_and_directions() {
        let w = cotangent_grassmannian_weights(&[1], 4);
        assert_eq!(w.len(), 6);
        let coch = [0, 1, 2, 3];
        let att = w.iter().filter(|t| direction(&t.weight, &coch) == Direction::Attracting).count();
        assert_eq!(att, 3);
    }

    #[test]
    fn grassmannian_dimension() {
        assert_eq!(cotangent_grassmannian_weights(&[0, 2], 4).len(), 2 * 2 * 2);
    }
}
