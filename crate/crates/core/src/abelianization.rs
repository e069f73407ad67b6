//! Elliptic stable envelopes of `T*Gr(k, n)` by symmetrizing the abelian
//! envelope over the Weyl group `S_k`.
//!
//! For a fixed point `μ` (a strictly increasing map `{0..k} → {0..n}`) and
//! Chern roots `s_0..s_{k-1}`:
//!
//! ```text
//! Stab(μ) = Σ_{σ ∈ S_k} ∏_i f_{μ(i)}(s_{σ(i)}, z ħ^{2ρ_i})
//!                      / ∏_{i<j} ϑ(s_{σ(i)}/s_{σ(j)}) ϑ(s_{σ(j)}/(s_{σ(i)} ħ))
//! ```
//!
//! where `f_m` is the `T*P^{n-1}` envelope of the `m`-th fixed point.

use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::envelopes::{Chamber, EnvelopeParams, RestrictionMatrix};
use crate::error::{Error, Result};
use crate::linalg::{rel_err, CMat};
use crate::qspecial::{theta, MultPoint};
use crate::scalar::{fmax, int, lit, Cx, Real};
use crate::weights::{cotangent_grassmannian_weights, repelling_theta_product};

/// Strictly increasing zero-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KSubset {
    mu: Vec<usize>,
}

impl KSubset {
    pub fn new(mu: Vec<usize>, n: usize) -> Result<Self> {
        if mu.windows(2).any(|w| w[0] >= w[1]) || mu.iter().any(|&m| m >= n) {
            return Err(Error::InvalidInput(format!("{mu:?} is not a strictly increasing subset of 0..{n}")));
        }
        Ok(Self { mu })
    }

    pub fn indices(&self) -> &[usize] {
        &self.mu
    }

    pub fn k(&self) -> usize {
        self.mu.len()
    }

    /// All `k`-subsets of `0..n` in lexicographic order.
    pub fn all(k: usize, n: usize) -> Vec<Self> {
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (0..k).collect();
        if k > n {
            return out;
        }
        loop {
            out.push(Self { mu: cur.clone() });
            let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
                return out;
            };
            cur[i] += 1;
            for j in i + 1..k {
                cur[j] = cur[j - 1] + 1;
            }
        }
    }

    /// `self ≤ other` componentwise: the envelope of `self` may be nonzero at
    /// `other` only in that case.
    pub fn dominated_by(&self, other: &Self) -> bool {
        self.mu.iter().zip(&other.mu).all(|(a, b)| a <= b)
    }
}

impl fmt::Display for KSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.mu.iter().map(|m| (m + 1).to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Which index bounds the trailing `ϑ(s a_i ħ)` product of `f_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrailingIndex {
    /// `i > m`, the reading under which `f_m` is the `T*P^{n-1}` envelope.
    Running,
    /// `i > k`, the literal rank-indexed reading.
    Rank,
}

/// Kähler shift `2ρ_i` attached to the `i`-th Chern root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TwoRho {
    /// `2ρ_i = k + 1 − 2i` (1-based `i`), the positive roots of `GL(k)`.
    GlK,
    /// `2ρ_i = n + 1 − 2i`, the first `k` entries of `(n−1, n−3, …, 1−n)`.
    GlN,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrassParams<T> {
    pub k: usize,
    pub env: EnvelopeParams<T>,
    pub trailing: TrailingIndex,
    pub two_rho: TwoRho,
}

impl<T: Real> GrassParams<T> {
    pub fn new(k: usize, env: EnvelopeParams<T>) -> Result<Self> {
        if k == 0 || k > env.n() {
            return Err(Error::InvalidInput(format!("need 1 ≤ k ≤ n, got k = {k}, n = {}", env.n())));
        }
        Ok(Self { k, env, trailing: TrailingIndex::Running, two_rho: TwoRho::GlK })
    }

    pub fn n(&self) -> usize {
        self.env.n()
    }

    /// `2ρ_i` for zero-based `i`.
    pub fn two_rho(&self, i: usize) -> i64 {
        let top = match self.two_rho {
            TwoRho::GlK => self.k as i64,
            TwoRho::GlN => self.n() as i64,
        };
        top - 1 - 2 * i as i64
    }

    pub fn with_env(&self, env: EnvelopeParams<T>) -> Self {
        Self { env, ..self.clone() }
    }
}

/// `∏_{i<m} ϑ(s a_i) · ϑ(s a_m z' ħ^{m+1-n}) / ϑ(z' ħ^{m+1-n}) · ∏_{trailing} ϑ(s a_i ħ)`
/// with `z' = z_shift` (zero-based `m`).
pub fn f_weight<T: Real>(m: usize, s: MultPoint<T>, z_shift: MultPoint<T>, p: &GrassParams<T>) -> Result<Cx<T>> {
    let n = p.n();
    if m >= n {
        return Err(Error::InvalidInput(format!("index {m} out of range for n = {n}")));
    }
    let ctx = &p.env.ctx;
    let a = &p.env.a;
    let h = p.env.hbar().u;
    let mut acc = Cx::<T>::one();
    for ai in &a[..m] {
        acc = acc * theta(MultPoint::new(s.u + ai.u), ctx)?;
    }
    let zh = z_shift.u + h * int::<T>(m as i64 + 1 - n as i64);
    let den = theta(MultPoint::new(zh), ctx)?;
    if den.is_zero() {
        return Err(Error::DenominatorVanishes(format!("ϑ(z ħ^{})", m as i64 + 1 - n as i64)));
    }
    acc = acc * theta(MultPoint::new(s.u + a[m].u + zh), ctx)? / den;
    let start = match p.trailing {
        TrailingIndex::Running => m + 1,
        TrailingIndex::Rank => p.k,
    };
    for ai in a.iter().skip(start) {
        acc = acc * theta(MultPoint::new(s.u + ai.u + h), ctx)?;
    }
    Ok(acc)
}

/// One Weyl-group term of the symmetrization.
pub fn grass_term<T: Real>(mu: &KSubset, s: &[MultPoint<T>], sigma: &[usize], p: &GrassParams<T>) -> Result<Cx<T>> {
    let ctx = &p.env.ctx;
    let h = p.env.hbar().u;
    let mut num = Cx::<T>::one();
    for (i, &m) in mu.indices().iter().enumerate() {
        let zs = MultPoint::new(p.env.z.u + h * int::<T>(p.two_rho(i)));
        num = num * f_weight(m, s[sigma[i]], zs, p)?;
        if num.is_zero() {
            return Ok(num);
        }
    }
    let mut den = Cx::<T>::one();
    for i in 0..sigma.len() {
        for j in i + 1..sigma.len() {
            let (si, sj) = (s[sigma[i]].u, s[sigma[j]].u);
            den = den * theta(MultPoint::new(si - sj), ctx)? * theta(MultPoint::new(sj - si - h), ctx)?;
        }
    }
    if den.is_zero() {
        return Err(Error::DenominatorVanishes("ϑ(s_i/s_j)·ϑ(s_j/(s_i ħ))".into()));
    }
    Ok(num / den)
}

/// All permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (1..k).rev().find(|&i| cur[i - 1] < cur[i]).map(|i| i - 1) else {
            return out;
        };
        let j = (i + 1..k).rev().find(|&j| cur[j] > cur[i]).expect("successor exists");
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
}

/// The `k!`-term symmetrized envelope.
pub fn stab_grass<T: Real>(mu: &KSubset, s: &[MultPoint<T>], p: &GrassParams<T>) -> Result<Cx<T>> {
    if mu.k() != p.k || s.len() != p.k {
        return Err(Error::InvalidInput("subset size, Chern roots and k disagree".into()));
    }
    let mut acc = Cx::<T>::zero();
    for sigma in permutations(p.k) {
        acc = acc + grass_term(mu, s, &sigma, p)?;
    }
    Ok(acc)
}

/// `Σ_σ |t_σ|`, the scale of the rounding error in [`stab_grass`].
pub fn stab_grass_magnitude<T: Real>(mu: &KSubset, s: &[MultPoint<T>], p: &GrassParams<T>) -> Result<T> {
    permutations(p.k).iter().try_fold(T::zero(), |acc, sigma| Ok(acc + grass_term(mu, s, sigma, p)?.norm()))
}

/// Chern roots at the fixed point `ν`: `s_i = a_{ν(i)}^{-1}`.
pub fn fixed_point_roots<T: Real>(nu: &KSubset, p: &GrassParams<T>) -> Vec<MultPoint<T>> {
    nu.indices().iter().map(|&i| p.env.a[i].inv()).collect()
}

/// Parameters with the `a_i` relabelled so that the chamber becomes the
/// standard one: `a'_pos = a_{order[pos]}`.
fn relabel<T: Real>(p: &GrassParams<T>, c: &Chamber) -> GrassParams<T> {
    let a = c.effective_order().into_iter().map(|i| p.env.a[i]).collect();
    p.with_env(p.env.with_a(a))
}

/// Restriction matrix with rows and columns indexed by `k`-subsets of chamber
/// positions, in lexicographic order (a linear extension of the dominance
/// order). Labels report the original indices.
pub fn restriction_matrix_grass<T: Real>(p: &GrassParams<T>, c: &Chamber) -> Result<RestrictionMatrix<T>> {
    let q = relabel(p, c);
    let basis = KSubset::all(p.k, p.n());
    let order = c.effective_order();
    let entries = CMat::try_from_fn(basis.len(), basis.len(), |r, col| {
        stab_grass(&basis[col], &fixed_point_roots(&basis[r], &q), &q)
    })?;
    let labels = basis
        .iter()
        .map(|b| {
            let mut orig: Vec<usize> = b.indices().iter().map(|&pos| order[pos]).collect();
            orig.sort_unstable();
            KSubset { mu: orig }.to_string()
        })
        .collect();
    Ok(RestrictionMatrix { entries, basis: labels, order: (0..basis.len()).collect() })
}

/// Repelling theta product at every fixed point, in the order of
/// [`restriction_matrix_grass`].
pub fn repelling_diagonal_grass<T: Real>(p: &GrassParams<T>, c: &Chamber) -> Result<Vec<Cx<T>>> {
    let q = relabel(p, c);
    let coch: Vec<i64> = (0..p.n() as i64).collect();
    KSubset::all(p.k, p.n())
        .iter()
        .map(|mu| {
            repelling_theta_product(
                &cotangent_grassmannian_weights(mu.indices(), p.n()),
                &coch,
                &q.env.a,
                q.env.hbar(),
                &q.env.ctx,
            )
        })
        .collect()
}

/// Structural residuals of the Grassmannian restriction matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrassResiduals<T> {
    /// Largest `|M[ν][μ]| / |M|` over pairs with `μ` not dominated by `ν`
    /// that are nonzero term by term (genuine cancellations).
    pub triangularity: T,
    pub diagonal: T,
    /// Largest deviation from `M(qz) = (a_ν / a_μ) M(z)` with
    /// `a_ν = ∏_{i∈ν} a_i`.
    pub z_law: T,
}

pub fn grass_residuals<T: Real>(p: &GrassParams<T>, c: &Chamber) -> Result<GrassResiduals<T>> {
    let m = restriction_matrix_grass(p, c)?.entries;
    let basis = KSubset::all(p.k, p.n());
    let scale = m.max_abs();
    let mut triangularity = T::zero();
    for (r, nu) in basis.iter().enumerate() {
        for (col, mu) in basis.iter().enumerate() {
            if !mu.dominated_by(nu) {
                triangularity = triangularity.max(m[(r, col)].norm() / scale);
            }
        }
    }
    let diag = repelling_diagonal_grass(p, c)?;
    let mut diagonal = T::zero();
    for (i, d) in diag.iter().enumerate() {
        diagonal = diagonal.max(rel_err(m[(i, i)], *d));
    }
    let shifted_params = p.with_env(p.env.qshift(crate::symbolic::Var::Z(0), 1));
    let shifted = restriction_matrix_grass(&shifted_params, c)?.entries;
    let q = relabel(p, c);
    let q_shifted = relabel(&shifted_params, c);
    let weight = |s: &KSubset| s.indices().iter().fold(Cx::<T>::zero(), |acc, &i| acc + q.env.a[i].u);
    let mut z_law = T::zero();
    for (r, nu) in basis.iter().enumerate() {
        for (col, mu) in basis.iter().enumerate() {
            if mu.dominated_by(nu) {
                let ratio = (weight(nu) - weight(mu)).exp();
                let want = m[(r, col)] * ratio;
                // Cancelling Weyl sums are accurate relative to their terms, not their value.
                let before = stab_grass_magnitude(mu, &fixed_point_roots(nu, &q), &q)? * ratio.norm();
                let after = stab_grass_magnitude(mu, &fixed_point_roots(nu, &q_shifted), &q_shifted)?;
                let d = (shifted[(r, col)] - want).norm();
                z_law = z_law.max(d / fmax(want.norm(), fmax(before, after)));
            }
        }
    }
    Ok(GrassResiduals { triangularity, diagonal, z_law })
}

/// Largest relative spread, over Weyl-group terms, of the factor
/// `t_σ(q s_j) / t_σ(s)` for every Chern root `s_j`. The symmetrized sum is a
/// quasi-periodic section in `s` only when this vanishes; it holds for any
/// `2ρ_i = c − 2i`.
pub fn weyl_automorphy_spread<T: Real>(mu: &KSubset, s: &[MultPoint<T>], p: &GrassParams<T>) -> Result<T> {
    let perms = permutations(p.k);
    let mut spread = T::zero();
    for j in 0..p.k {
        let mut shifted = s.to_vec();
        shifted[j] = shifted[j].qshift(1, &p.env.ctx);
        let mut first: Option<Cx<T>> = None;
        for sigma in &perms {
            let r = grass_term(mu, &shifted, sigma, p)? / grass_term(mu, s, sigma, p)?;
            match first {
                None => first = Some(r),
                Some(f) => spread = spread.max(rel_err(r, f)),
            }
        }
    }
    Ok(spread)
}

/// A theta-function ratio with the factors of automorphy in `(a, s, z)`
/// required of the envelope of `μ`:
///
/// ```text
/// ∏_{i,l} ϑ(s_i a_l) / ∏_{i≠j} ϑ(s_i/s_j) · ϑ(z S)/(ϑ(S)ϑ(z)) · ϑ(A)ϑ(z)/ϑ(Az)
///     · ∏_l ϑ(a_l)/ϑ(a_l ħ^{-d_l})
/// ```
///
/// with `S = ∏ s_i`, `A = ∏_{m∈μ} a_m^{-1}` and `d_l` counting the pairs
/// `m ∈ μ < l ∉ μ` (positively at `l`, negatively at `m`).
pub fn line_bundle_reference<T: Real>(mu: &KSubset, s: &[MultPoint<T>], p: &GrassParams<T>) -> Result<Cx<T>> {
    let ctx = &p.env.ctx;
    let th = |x: Cx<T>| theta(MultPoint::new(x), ctx);
    let a = &p.env.a;
    let n = p.n();
    let (z, h) = (p.env.z.u, p.env.hbar().u);
    let mut num = Cx::<T>::one();
    let mut den = Cx::<T>::one();
    for si in s {
        for al in a {
            num = num * th(si.u + al.u)?;
        }
    }
    for (i, si) in s.iter().enumerate() {
        for (j, sj) in s.iter().enumerate() {
            if i != j {
                den = den * th(si.u - sj.u)?;
            }
        }
    }
    let sum_s = s.iter().fold(Cx::<T>::zero(), |acc, x| acc + x.u);
    num = num * th(z + sum_s)?;
    den = den * th(sum_s)? * th(z)?;
    let big_a = -mu.indices().iter().fold(Cx::<T>::zero(), |acc, &m| acc + a[m].u);
    num = num * th(big_a)? * th(z)?;
    den = den * th(big_a + z)?;
    let mut d = vec![0i64; n];
    for &m in mu.indices() {
        for l in (m + 1..n).filter(|l| !mu.indices().contains(l)) {
            d[l] += 1;
            d[m] -= 1;
        }
    }
    for (l, al) in a.iter().enumerate() {
        num = num * th(al.u)?;
        den = den * th(al.u - h * int::<T>(d[l]))?;
    }
    if den.is_zero() {
        return Err(Error::DenominatorVanishes("line-bundle reference".into()));
    }
    Ok(num / den)
}

/// Largest `|g(shifted)/g − 1|` over Weyl terms `σ` and shifts `v ↦ q v` of
/// every `a_l`, `s_i` and `z`, where `g = t_σ / reference`. Zero exactly when
/// each term is a section of the required line bundle.
pub fn grass_automorphy_residual<T: Real>(mu: &KSubset, s: &[MultPoint<T>], p: &GrassParams<T>) -> Result<T> {
    use crate::symbolic::Var;
    let ctx = p.env.ctx;
    let g = |s: &[MultPoint<T>], p: &GrassParams<T>, sigma: &[usize]| -> Result<Cx<T>> {
        Ok(grass_term(mu, s, sigma, p)? / line_bundle_reference(mu, s, p)?)
    };
    let mut worst = T::zero();
    for sigma in permutations(p.k) {
        let base = g(s, p, &sigma)?;
        let mut shifted_params: Vec<GrassParams<T>> =
            (0..p.n()).map(|l| p.with_env(p.env.qshift(Var::A(l), 1))).collect();
        shifted_params.push(p.with_env(p.env.qshift(Var::Z(0), 1)));
        for q in &shifted_params {
            worst = worst.max((g(s, q, &sigma)? / base - Cx::<T>::one()).norm());
        }
        for i in 0..p.k {
            let mut s2 = s.to_vec();
            s2[i] = s2[i].qshift(1, &ctx);
            worst = worst.max((g(&s2, p, &sigma)? / base - Cx::<T>::one()).norm());
        }
    }
    Ok(worst)
}

/// Which denominator family a regularity probe approaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeFamily {
    /// `s_i → s_j`, the zero of `ϑ(s_i/s_j)`.
    Diagonal,
    /// `s_i → ħ^{-1} s_j`, the zero of `ϑ(s_j/(s_i ħ))`.
    Hbar,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityProbe<T> {
    pub value_eps: Cx<T>,
    pub value_half: Cx<T>,
    /// `|v(ε) − v(ε/2)| / |v(ε)|`.
    pub relative_change: T,
    /// `|t(ε/2)| / |t(ε)|` for the identity term alone; near 2 at a simple pole.
    pub control_growth: T,
}

impl<T: Real> RegularityProbe<T> {
    /// Bounded symmetrized sum while the single term diverges.
    pub fn bounded(&self, tol: T) -> bool {
        let finite = |v: Cx<T>| v.re.is_finite() && v.im.is_finite();
        finite(self.value_eps) && finite(self.value_half) && self.relative_change < tol
    }
}

/// Approaches a denominator divisor of the symmetrization from generic Chern
/// roots `base` by moving `s_i` to distance `ε` and `ε/2` (log coordinates).
pub fn regularity_probe<T: Real>(
    mu: &KSubset,
    pair: (usize, usize),
    family: ProbeFamily,
    base: &[MultPoint<T>],
    eps: T,
    p: &GrassParams<T>,
) -> Result<RegularityProbe<T>> {
    let (i, j) = pair;
    if i == j || i >= p.k || j >= p.k || base.len() != p.k {
        return Err(Error::InvalidInput("probe pair must be two distinct Chern roots".into()));
    }
    let target = match family {
        ProbeFamily::Diagonal => base[j].u,
        ProbeFamily::Hbar => base[j].u - p.env.hbar().u,
    };
    // A fixed complex direction keeps the probe off real-symmetric accidents.
    let dir = Cx::new(lit::<T>(0.6), lit::<T>(0.8));
    let at = |e: T| {
        let mut s = base.to_vec();
        s[i] = MultPoint::new(target + dir * e);
        s
    };
    let s1 = at(eps);
    let s2 = at(eps * lit(0.5));
    let value_eps = stab_grass(mu, &s1, p)?;
    let value_half = stab_grass(mu, &s2, p)?;
    let ident: Vec<usize> = (0..p.k).collect();
    let t1 = grass_term(mu, &s1, &ident, p)?;
    let t2 = grass_term(mu, &s2, &ident, p)?;
    Ok(RegularityProbe {
        value_eps,
        value_half,
        relative_change: (value_eps - value_half).norm() / value_eps.norm(),
        control_growth: t2.norm() / t1.norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_are_lexicographic() {
        let all = KSubset::all(2, 4);
        assert_eq!(all.len(), 6);
        assert_eq!(all[0].indices(), &[0, 1]);
        assert_eq!(all[5].indices(), &[2, 3]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(4).len(), 24);
        assert_eq!(permutations(1), vec![vec![0]]);
    }

    #[test]
    fn dominance() {
        let a = KSubset::new(vec![0, 2], 4).unwrap();
        let b = KSubset::new(vec![1, 2], 4).unwrap();
        assert!(a.dominated_by(&b));
        assert!(!b.dominated_by(&a));
        assert!(KSubset::new(vec![2, 1], 4).is_err());
        assert_eq!(b.to_string(), "{2,3}");
    }
}
