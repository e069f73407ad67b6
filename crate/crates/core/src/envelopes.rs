//! Elliptic stable envelopes of `T*P^{n-1}` and smooth hypertoric varieties,
//! their restriction matrices, and checks of the defining properties.
//!
//! Fixed points of `T*P^{n-1}` are `F_0, …, F_{n-1}` (zero based). In the
//! standard chamber `F_0 > F_1 > … > F_{n-1}` and
//!
//! ```text
//! Stab(F_k) = ∏_{i<k} ϑ(s a_i) · ϑ(s a_k z ħ^{k+1-n}) / ϑ(z ħ^{k+1-n}) · ∏_{i>k} ϑ(s a_i ħ)
//! ```
//!
//! where `s` is the Chern root of `O(1)`. Other chambers relabel the `a_i`
//! through the chamber order; the opposite chamber is the reversed order.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rel_err, CMat};
use crate::qspecial::{MultPoint, QContext};
use crate::scalar::{int, lit, Cx, Real};
use crate::symbolic::{Layout, Monomial, Point, ThetaProduct, Var};
use crate::weights::{cotangent_grassmannian_weights, repelling_theta_product};

/// Minimal distance, in log coordinates modulo `ℤ ln q + 2πi ℤ`, from every
/// resonance divisor.
pub const RESONANCE_GUARD: f64 = 1e-8;

/// Ordering of fixed points `F_{σ(0)} > F_{σ(1)} > …`; `sign = -1` selects the
/// opposite chamber, i.e. the reversed order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chamber {
    order: Vec<usize>,
    sign: i8,
}

impl Chamber {
    pub fn new(order: Vec<usize>, sign: i8) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n || seen[i] {
                return Err(Error::InvalidInput(format!("chamber order {order:?} is not a permutation")));
            }
            seen[i] = true;
        }
        if sign != 1 && sign != -1 {
            return Err(Error::InvalidInput("chamber sign must be ±1".into()));
        }
        Ok(Self { order, sign })
    }

    pub fn standard(n: usize) -> Self {
        Self { order: (0..n).collect(), sign: 1 }
    }

    pub fn opposite(&self) -> Self {
        Self { order: self.order.clone(), sign: -self.sign }
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    /// Fixed-point indices from highest to lowest.
    pub fn effective_order(&self) -> Vec<usize> {
        if self.sign > 0 {
            self.order.clone()
        } else {
            self.order.iter().rev().copied().collect()
        }
    }

    /// `positions()[i]` is the rank of `F_i` (0 = highest).
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.n()];
        for (p, i) in self.effective_order().into_iter().enumerate() {
            pos[i] = p;
        }
        pos
    }

    /// Cocharacter `c_i = position(i)`: along `a_i = t^{c_i}`, `t → 0`, the
    /// weight `a_j/a_i` is attracting iff `F_j` is below `F_i`.
    pub fn cocharacter(&self) -> Vec<i64> {
        self.positions().into_iter().map(|p| p as i64).collect()
    }
}

/// Distance from `u` to the lattice `ℤ ln q + 2πi ℤ`.
pub fn lattice_distance<T: Real>(u: Cx<T>, ctx: &QContext<T>) -> T {
    let lq = ctx.log_q();
    let two_pi = T::PI() * lit(2.0);
    let alpha = u.re / lq.re;
    let beta = (u.im - alpha * lq.im) / two_pi;
    let (a0, b0) = (alpha.round(), beta.round());
    let mut best = T::infinity();
    for da in -1..=1 {
        for db in -1..=1 {
            let a = a0 + int::<T>(da);
            let b = b0 + int::<T>(db);
            let r = u - lq * a - Cx::new(T::zero(), two_pi * b);
            best = best.min(r.norm());
        }
    }
    best
}

/// Equivariant parameters `a`, `ħ = (ħ^{1/2})²`, Kähler parameter `z`, and the
/// q-context.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeParams<T> {
    pub a: Vec<MultPoint<T>>,
    pub hbar_half: MultPoint<T>,
    pub z: MultPoint<T>,
    pub ctx: QContext<T>,
}

impl<T: Real> EnvelopeParams<T> {
    /// Validated constructor: rejects draws within [`RESONANCE_GUARD`] of
    /// `a_i/a_j ∈ q^ℤ`, `ħ ∈ q^ℤ` or `z ħ^m ∈ q^ℤ` for `|m| ≤ n`.
    pub fn new(a: Vec<MultPoint<T>>, hbar_half: MultPoint<T>, z: MultPoint<T>, ctx: QContext<T>) -> Result<Self> {
        let p = Self::new_unchecked(a, hbar_half, z, ctx);
        if let Some(d) = p.resonance() {
            return Err(Error::ParameterResonant(d));
        }
        Ok(p)
    }

    /// Constructor without the genericity guard, for probes on divisors.
    pub fn new_unchecked(a: Vec<MultPoint<T>>, hbar_half: MultPoint<T>, z: MultPoint<T>, ctx: QContext<T>) -> Self {
        Self { a, hbar_half, z, ctx }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn hbar(&self) -> MultPoint<T> {
        self.hbar_half.pow(2)
    }

    /// First violated genericity condition, if any.
    pub fn resonance(&self) -> Option<String> {
        let guard: T = lit(RESONANCE_GUARD);
        let ctx = &self.ctx;
        let n = self.n();
        for i in 0..n {
            for j in i + 1..n {
                if lattice_distance(self.a[i].u - self.a[j].u, ctx) < guard {
                    return Some(format!("a_{}/a_{} ∈ q^Z", i + 1, j + 1));
                }
            }
        }
        let h = self.hbar().u;
        if lattice_distance(h, ctx) < guard {
            return Some("ħ ∈ q^Z".into());
        }
        for m in -(n as i64)..=(n as i64) {
            if lattice_distance(self.z.u + h * int::<T>(m), ctx) < guard {
                return Some(format!("z ħ^{m} ∈ q^Z"));
            }
        }
        None
    }

    pub fn with_z(&self, z: MultPoint<T>) -> Self {
        Self { z, ..self.clone() }
    }

    pub fn with_a(&self, a: Vec<MultPoint<T>>) -> Self {
        Self { a, ..self.clone() }
    }

    /// Symbolic evaluation point with the given Chern-root values.
    pub fn point(&self, s: &[MultPoint<T>]) -> Point<T> {
        Point {
            a: self.a.iter().map(|x| x.u).collect(),
            s: s.iter().map(|x| x.u).collect(),
            z: vec![self.z.u],
            hbar: self.hbar().u,
        }
    }

    /// Same parameters with `v ↦ q^e v`.
    pub fn qshift(&self, v: Var, e: i64) -> Self {
        let mut p = self.clone();
        let d = self.ctx.log_q() * int::<T>(e);
        match v {
            Var::A(i) => p.a[i] = MultPoint::new(p.a[i].u + d),
            Var::Z(0) => p.z = MultPoint::new(p.z.u + d),
            Var::Hbar => p.hbar_half = MultPoint::new(p.hbar_half.u + d * lit::<T>(0.5)),
            other => panic!("cannot shift {other:?} on envelope parameters"),
        }
        p
    }
}

/// Layout of the `T*P^{n-1}` monomials: `n` equivariant variables, one Chern
/// root, one Kähler variable.
pub fn tpn_layout(n: usize) -> Layout {
    Layout { n_a: n, n_s: 1, n_z: 1 }
}

/// Envelope of the fixed point at chamber position `pos` as a theta product
/// in `s`, with the chamber's relabelling of the `a_i`.
pub fn stab_tpn_product(pos: usize, chamber: &Chamber) -> ThetaProduct {
    let n = chamber.n();
    let l = tpn_layout(n);
    let order = chamber.effective_order();
    let shift = pos as i64 + 1 - n as i64;
    let mut p = ThetaProduct::new();
    for (q, &i) in order.iter().enumerate() {
        let sa = Monomial::var(l, Var::S(0)).times_var(Var::A(i), 1);
        if q < pos {
            p = p.num(sa);
        } else if q > pos {
            p = p.num(sa.times_var(Var::Hbar, 1));
        } else {
            let zh = Monomial::var(l, Var::Z(0)).times_var(Var::Hbar, shift);
            p = p.num(sa.mul(&zh)).den(zh);
        }
    }
    p
}

/// `Stab(F_k)` in the standard chamber at Chern root `s`.
pub fn stab_tpn<T: Real>(k: usize, s: MultPoint<T>, p: &EnvelopeParams<T>) -> Result<Cx<T>> {
    stab_tpn_in(k, s, p, &Chamber::standard(p.n()))
}

/// `Stab(F_k)` in an arbitrary chamber.
pub fn stab_tpn_in<T: Real>(k: usize, s: MultPoint<T>, p: &EnvelopeParams<T>, c: &Chamber) -> Result<Cx<T>> {
    if k >= p.n() || c.n() != p.n() {
        return Err(Error::InvalidInput(format!("fixed point {k} out of range for n = {}", p.n())));
    }
    let pos = c.positions()[k];
    stab_tpn_product(pos, c).eval(&p.point(&[s]), &p.ctx)
}

/// Restriction matrix entries at fixed points, rows and columns in chamber
/// order: `entries[j][k] = Stab(F_{σ(k)})|_{F_{σ(j)}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionMatrix<T> {
    pub entries: CMat<T>,
    pub basis: Vec<String>,
    /// Fixed-point index of each basis position.
    pub order: Vec<usize>,
}

impl<T: Real> RestrictionMatrix<T> {
    /// The same matrix with rows and columns in fixed-point index order.
    pub fn in_index_order(&self) -> CMat<T> {
        let n = self.order.len();
        let mut out = CMat::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                out[(self.order[j], self.order[k])] = self.entries[(j, k)];
            }
        }
        out
    }
}

/// Substitution `s = a_i^{-1}` restricting to `F_i`.
pub fn fixed_point_root(n: usize, i: usize) -> Monomial {
    Monomial::var(tpn_layout(n), Var::A(i)).pow(-1)
}

/// Symbolic entry `[j][k]` (chamber positions) of the `T*P^{n-1}` matrix.
pub fn tpn_entry_product(j: usize, k: usize, c: &Chamber) -> ThetaProduct {
    let row_index = c.effective_order()[j];
    stab_tpn_product(k, c).substitute_s(0, &fixed_point_root(c.n(), row_index))
}

pub fn restriction_matrix_tpn<T: Real>(p: &EnvelopeParams<T>, c: &Chamber) -> Result<RestrictionMatrix<T>> {
    let n = p.n();
    if c.n() != n {
        return Err(Error::InvalidInput("chamber size differs from n".into()));
    }
    let pt = p.point(&[]);
    let entries = CMat::try_from_fn(n, n, |j, k| tpn_entry_product(j, k, c).eval(&pt, &p.ctx))?;
    let order = c.effective_order();
    Ok(RestrictionMatrix { entries, basis: order.iter().map(|i| format!("F{}", i + 1)).collect(), order })
}

/// `(−1)^{rk ind} ∏ ϑ(repelling tangent weights)` at each fixed point, in
/// chamber order.
pub fn repelling_diagonal_tpn<T: Real>(p: &EnvelopeParams<T>, c: &Chamber) -> Result<Vec<Cx<T>>> {
    let coch = c.cocharacter();
    c.effective_order()
        .into_iter()
        .map(|k| repelling_theta_product(&cotangent_grassmannian_weights(&[k], p.n()), &coch, &p.a, p.hbar(), &p.ctx))
        .collect()
}

/// Predicted ratio `M[j][k](qz) / M[j][k](z)` for fixed-point indices `j`
/// (row) and `k` (column): the monomial `a_j / a_k`.
pub fn z_quasiperiodicity_factor<T: Real>(j: usize, k: usize, p: &EnvelopeParams<T>) -> Cx<T> {
    p.a[j].div(&p.a[k]).value()
}

/// Factor of automorphy of entry `[j][k]` (chamber positions) for
/// `v ↦ q v`, assembled from the theta-shift law.
pub fn tpn_entry_automorphy<T: Real>(j: usize, k: usize, v: Var, p: &EnvelopeParams<T>, c: &Chamber) -> Cx<T> {
    tpn_entry_product(j, k, c).automorphy(v, tpn_layout(p.n())).eval(&p.point(&[]), &p.ctx)
}

/// Residuals of the properties that characterize a restriction matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Characterization<T> {
    /// Largest modulus above the diagonal relative to the matrix scale.
    pub support: T,
    /// Largest relative deviation of the diagonal from the repelling product.
    pub diagonal: T,
    /// Largest relative deviation from `M(qz) = (a_j/a_k) M(z)`.
    pub z_law: T,
    /// Largest relative deviation from the predicted `a_m ↦ q a_m` factors.
    pub a_law: T,
    /// Largest relative mismatch of rows `j`, `l` on the divisor `a_j = a_l`.
    pub gluing: T,
}

impl<T: Real> Characterization<T> {
    pub fn max(&self) -> T {
        self.support.max(self.diagonal).max(self.z_law).max(self.a_law).max(self.gluing)
    }
}

/// Evaluates the characterizing properties for an arbitrary matrix-valued
/// candidate `m(params)` in chamber order. The envelope passes; any other
/// candidate violates at least one property at generic parameters.
pub fn characterize<T: Real, F>(m: F, p: &EnvelopeParams<T>, c: &Chamber) -> Result<Characterization<T>>
where
    F: Fn(&EnvelopeParams<T>) -> Result<CMat<T>>,
{
    let n = p.n();
    let order = c.effective_order();
    let base = m(p)?;
    let scale = base.max_abs();
    let mut support = T::zero();
    for j in 0..n {
        for k in j + 1..n {
            support = support.max(base[(j, k)].norm() / scale);
        }
    }
    let diag = repelling_diagonal_tpn(p, c)?;
    let mut diagonal = T::zero();
    for k in 0..n {
        diagonal = diagonal.max(rel_err(base[(k, k)], diag[k]));
    }
    let shifted_z = m(&p.qshift(Var::Z(0), 1))?;
    let mut z_law = T::zero();
    for j in 0..n {
        for k in 0..=j {
            let want = base[(j, k)] * z_quasiperiodicity_factor(order[j], order[k], p);
            z_law = z_law.max(entry_deviation(shifted_z[(j, k)], want, scale));
        }
    }
    let mut a_law = T::zero();
    for v in 0..n {
        let shifted = m(&p.qshift(Var::A(v), 1))?;
        for j in 0..n {
            for k in 0..=j {
                let want = base[(j, k)] * tpn_entry_automorphy(j, k, Var::A(v), p, c);
                a_law = a_law.max(entry_deviation(shifted[(j, k)], want, want.norm().max(scale)));
            }
        }
    }
    let mut gluing = T::zero();
    for j in 0..n {
        for l in j + 1..n {
            let mut a = p.a.clone();
            a[order[l]] = a[order[j]];
            let glued = m(&p.with_a(a))?;
            let s = glued.max_abs();
            for k in 0..n {
                gluing = gluing.max((glued[(j, k)] - glued[(l, k)]).norm() / s);
            }
        }
    }
    Ok(Characterization { support, diagonal, z_law, a_law, gluing })
}

fn entry_deviation<T: Real>(got: Cx<T>, want: Cx<T>, scale: T) -> T {
    let d = (got - want).norm();
    let s = want.norm();
    if s > scale * T::epsilon() {
        d / s
    } else {
        d / scale
    }
}

/// Residuals of the composite-envelope check for the subtorus whose fixed
/// locus is `T*P(W') ⊔ points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleResiduals<T> {
    pub support: T,
    pub diagonal: T,
    pub z_law: T,
}

impl<T: Real> TriangleResiduals<T> {
    pub fn max(&self) -> T {
        self.support.max(self.diagonal).max(self.z_law)
    }
}

/// Restriction matrix of the envelope of `X^{A'}` inside `X` relative to the
/// quotient chamber: the `T*P^{m-1}` envelope on `a_0..a_{m-1}` with Kähler
/// parameter `z ħ^{m-n}` on the first block, identity on the points.
pub fn inner_factor_tpn<T: Real>(p: &EnvelopeParams<T>, m: usize) -> Result<CMat<T>> {
    let n = p.n();
    let shifted_z = MultPoint::new(p.z.u + p.hbar().u * int::<T>(m as i64 - n as i64));
    let sub = EnvelopeParams::new_unchecked(p.a[..m].to_vec(), p.hbar_half, shifted_z, p.ctx);
    let block = restriction_matrix_tpn(&sub, &Chamber::standard(m))?.entries;
    Ok(CMat::from_fn(n, n, |j, k| {
        if j < m && k < m {
            block[(j, k)]
        } else if j == k {
            Cx::<T>::one()
        } else {
            Cx::<T>::zero()
        }
    }))
}

/// Composite `P = M_C · N^{-1}` for the split `W' = {F_0..F_{m-1}}`, where `N`
/// is [`inner_factor_tpn`]. `P` must be the envelope of the coarser chamber:
/// triangular by components, the `A'`-repelling normalization on the diagonal
/// blocks, and `P(qz) = D P D^{-1}` with `D = diag(a_j)`.
pub fn triangle_composite<T: Real>(p: &EnvelopeParams<T>, m: usize) -> Result<CMat<T>> {
    let mc = restriction_matrix_tpn(p, &Chamber::standard(p.n()))?.entries;
    let inner = inner_factor_tpn(p, m)?;
    Ok(inner.transpose().solve(&mc.transpose())?.transpose())
}

pub fn triangle_factorization_check<T: Real>(p: &EnvelopeParams<T>, m: usize) -> Result<TriangleResiduals<T>> {
    let n = p.n();
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!("split size {m} outside 1..={n}")));
    }
    let comp = |j: usize| if j < m { 0 } else { j - m + 1 };
    let pc = triangle_composite(p, m)?;
    let scale = pc.max_abs();

    let mut support = T::zero();
    for j in 0..n {
        for l in 0..n {
            if !(comp(j) > comp(l) || j == l) {
                support = support.max(pc[(j, l)].norm() / scale);
            }
        }
    }

    // A' pairs to zero on weights inside T*P(W') and separates the rest.
    let coch: Vec<i64> = (0..n).map(|i| if i < m { 0 } else { i as i64 }).collect();
    let mut diagonal = T::zero();
    for j in 0..n {
        let want = repelling_theta_product(&cotangent_grassmannian_weights(&[j], n), &coch, &p.a, p.hbar(), &p.ctx)?;
        diagonal = diagonal.max(rel_err(pc[(j, j)], want));
    }

    let shifted = triangle_composite(&p.qshift(Var::Z(0), 1), m)?;
    let mut z_law = T::zero();
    for j in 0..n {
        for l in (0..n).filter(|&l| comp(j) > comp(l) || j == l) {
            let want = pc[(j, l)] * p.a[j].div(&p.a[l]).value();
            z_law = z_law.max(entry_deviation(shifted[(j, l)], want, scale));
        }
    }
    Ok(TriangleResiduals { support, diagonal, z_law })
}

/// Fixed point of a hypertoric variety: the coordinates spanning `M₀` (one
/// per rank of `S`, with weight-matrix columns `e_0, e_1, …`), the ħ-shift of
/// each Kähler variable, and the `M₁` coordinates with a flag selecting the
/// dual (cotangent) weight `ħ x_j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperFixedPoint {
    pub label: String,
    pub m0: Vec<usize>,
    pub hbar_shift: Vec<i64>,
    pub m1: Vec<(usize, bool)>,
}

/// Weight matrix `W` (rows: characters of `S`, columns: coordinates of `M`)
/// and fixed-point data. The Chern root of coordinate `j` is
/// `x_j = ∏_i s_i^{W_ij} · a_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypertoricData {
    pub weight_matrix: Vec<Vec<i64>>,
    pub fixed_points: Vec<HyperFixedPoint>,
}

impl HypertoricData {
    pub fn rank(&self) -> usize {
        self.weight_matrix.len()
    }

    pub fn dim(&self) -> usize {
        self.weight_matrix.first().map_or(0, Vec::len)
    }

    pub fn layout(&self) -> Layout {
        Layout { n_a: self.dim(), n_s: self.rank(), n_z: self.rank() }
    }

    /// `T*P^{n-1}` as the quotient of `T*C^n` by the diagonal `C^×`.
    pub fn tpn(n: usize) -> Self {
        let fixed_points = (0..n)
            .map(|k| HyperFixedPoint {
                label: format!("F{}", k + 1),
                m0: vec![k],
                hbar_shift: vec![k as i64 + 1 - n as i64],
                m1: (0..n).filter(|&i| i != k).map(|i| (i, i > k)).collect(),
            })
            .collect();
        Self { weight_matrix: vec![vec![1; n]], fixed_points }
    }

    /// Product of two hypertoric varieties.
    pub fn product(x: &Self, y: &Self) -> Self {
        let (r1, n1) = (x.rank(), x.dim());
        let (r2, n2) = (y.rank(), y.dim());
        let mut w = vec![vec![0; n1 + n2]; r1 + r2];
        for i in 0..r1 {
            w[i][..n1].copy_from_slice(&x.weight_matrix[i]);
        }
        for i in 0..r2 {
            w[r1 + i][n1..].copy_from_slice(&y.weight_matrix[i]);
        }
        let mut fps = Vec::new();
        for f in &x.fixed_points {
            for g in &y.fixed_points {
                let mut m0 = f.m0.clone();
                m0.extend(g.m0.iter().map(|j| j + n1));
                let mut shift = f.hbar_shift.clone();
                shift.extend(&g.hbar_shift);
                let mut m1 = f.m1.clone();
                m1.extend(g.m1.iter().map(|(j, d)| (j + n1, *d)));
                fps.push(HyperFixedPoint { label: format!("{}x{}", f.label, g.label), m0, hbar_shift: shift, m1 });
            }
        }
        Self { weight_matrix: w, fixed_points: fps }
    }

    /// Checks unimodularity, surjectivity and the fixed-point splittings.
    pub fn validate(&self) -> Result<()> {
        let r = self.rank();
        let n = self.dim();
        if r == 0 || n < r || self.weight_matrix.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidInput("weight matrix must be a nonempty r×n array with n ≥ r".into()));
        }
        let mut has_unit_maximal_minor = false;
        for size in 1..=r {
            for rows in combinations(r, size) {
                for cols in combinations(n, size) {
                    let d = int_det(&rows, &cols, &self.weight_matrix);
                    if d.abs() > 1 {
                        return Err(Error::InvalidInput(format!(
                            "minor on rows {rows:?}, columns {cols:?} equals {d}"
                        )));
                    }
                    if size == r && d != 0 {
                        has_unit_maximal_minor = true;
                    }
                }
            }
        }
        if !has_unit_maximal_minor {
            return Err(Error::InvalidInput("weight matrix is not surjective over Z".into()));
        }
        for f in &self.fixed_points {
            if f.m0.len() != r || f.hbar_shift.len() != r {
                return Err(Error::InvalidInput(format!("fixed point {} needs {r} M0 coordinates", f.label)));
            }
            for (i, &j) in f.m0.iter().enumerate() {
                if j >= n || (0..r).any(|row| self.weight_matrix[row][j] != i64::from(row == i)) {
                    return Err(Error::InvalidInput(format!(
                        "fixed point {}: column {j} must be the unit vector e_{i}",
                        f.label
                    )));
                }
            }
            let mut covered = vec![0usize; n];
            for &j in &f.m0 {
                covered[j] += 1;
            }
            for &(j, _) in &f.m1 {
                if j >= n {
                    return Err(Error::InvalidInput(format!("fixed point {}: coordinate {j} out of range", f.label)));
                }
                covered[j] += 1;
            }
            if covered.iter().any(|c| *c != 1) {
                return Err(Error::InvalidInput(format!("fixed point {}: M0 and M1 must partition M", f.label)));
            }
        }
        Ok(())
    }

    fn chern_root(&self, j: usize) -> Monomial {
        let l = self.layout();
        let mut m = Monomial::var(l, Var::A(j));
        for i in 0..self.rank() {
            m = m.times_var(Var::S(i), self.weight_matrix[i][j]);
        }
        m
    }

    /// `ϑ(M₁) ∏_i ϑ(x_{m0_i} z_i ħ^{h_i}) / ϑ(z_i ħ^{h_i})`.
    pub fn stab_product(&self, f: usize) -> ThetaProduct {
        let l = self.layout();
        let fp = &self.fixed_points[f];
        let mut p = ThetaProduct::new();
        for &(j, dual) in &fp.m1 {
            let x = self.chern_root(j);
            p = p.num(if dual { x.times_var(Var::Hbar, 1) } else { x });
        }
        for (i, &j) in fp.m0.iter().enumerate() {
            let zh = Monomial::var(l, Var::Z(i)).times_var(Var::Hbar, fp.hbar_shift[i]);
            p = p.num(self.chern_root(j).mul(&zh)).den(zh);
        }
        p
    }

    /// Chern roots at fixed point `f`: `s_i = a_{m0_i}^{-1}`, so that every
    /// `M₀` root is trivial.
    pub fn fixed_point_roots(&self, f: usize) -> Vec<Monomial> {
        let l = self.layout();
        self.fixed_points[f].m0.iter().map(|&j| Monomial::var(l, Var::A(j)).pow(-1)).collect()
    }

    pub fn entry_product(&self, row: usize, col: usize) -> ThetaProduct {
        let roots = self.fixed_point_roots(row);
        let mut p = self.stab_product(col);
        for (i, m) in roots.iter().enumerate() {
            p = p.substitute_s(i, m);
        }
        p
    }
}

/// Parameters of a hypertoric envelope: one `a` per coordinate of `M`, one
/// Kähler variable per rank of `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams<T> {
    pub a: Vec<MultPoint<T>>,
    pub hbar_half: MultPoint<T>,
    pub kahler: Vec<MultPoint<T>>,
    pub ctx: QContext<T>,
}

impl<T: Real> HyperParams<T> {
    pub fn point(&self, s: &[MultPoint<T>]) -> Point<T> {
        Point {
            a: self.a.iter().map(|x| x.u).collect(),
            s: s.iter().map(|x| x.u).collect(),
            z: self.kahler.iter().map(|x| x.u).collect(),
            hbar: self.hbar_half.pow(2).u,
        }
    }
}

pub fn stab_hypertoric<T: Real>(f: usize, s: &[MultPoint<T>], h: &HypertoricData, p: &HyperParams<T>) -> Result<Cx<T>> {
    if s.len() != h.rank() || p.a.len() != h.dim() || p.kahler.len() != h.rank() || f >= h.fixed_points.len() {
        return Err(Error::InvalidInput("hypertoric data and parameters disagree in size".into()));
    }
    h.stab_product(f).eval(&p.point(s), &p.ctx)
}

/// `entries[F'][F] = Stab(F)|_{F'}` in the order of `h.fixed_points`.
pub fn restriction_matrix_hypertoric<T: Real>(h: &HypertoricData, p: &HyperParams<T>) -> Result<RestrictionMatrix<T>> {
    let m = h.fixed_points.len();
    let pt = p.point(&vec![MultPoint::one(); h.rank()]);
    let entries = CMat::try_from_fn(m, m, |r, c| h.entry_product(r, c).eval(&pt, &p.ctx))?;
    Ok(RestrictionMatrix {
        entries,
        basis: h.fixed_points.iter().map(|f| f.label.clone()).collect(),
        order: (0..m).collect(),
    })
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Exact integer determinant by cofactor expansion (sizes ≤ 4 here).
fn int_det(rows: &[usize], cols: &[usize], w: &[Vec<i64>]) -> i64 {
    if rows.len() == 1 {
        return w[rows[0]][cols[0]];
    }
    let mut det = 0;
    for (c_idx, &c) in cols.iter().enumerate() {
        let entry = w[rows[0]][c];
        if entry == 0 {
            continue;
        }
        let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let sign = if c_idx % 2 == 0 { 1 } else { -1 };
        det += sign * entry * int_det(&rows[1..], &rest, w);
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    #[test]
    fn chamber_positions_and_reversal() {
        let c = Chamber::new(vec![2, 0, 1], 1).unwrap();
        assert_eq!(c.positions(), vec![1, 2, 0]);
        assert_eq!(c.opposite().effective_order(), vec![1, 0, 2]);
        assert!(Chamber::new(vec![0, 0], 1).is_err());
    }

    #[test]
    fn lattice_distance_detects_q_powers() {
        let ctx = QContext::<f64>::new(cx(0.3, 0.1)).unwrap();
        let u = ctx.log_q() * 3.0 + cx(0.0, 2.0 * std::f64::consts::PI);
        assert!(lattice_distance(u, &ctx) < 1e-14);
        assert!(lattice_distance(u + cx(1e-3, 0.0), &ctx) > 9e-4);
    }

    #[test]
    fn hypertoric_validation_rejects_bad_minors() {
        let mut h = HypertoricData::tpn(3);
        assert!(h.validate().is_ok());
        h.weight_matrix = vec![vec![2, 1, 1]];
        assert!(h.validate().is_err());
        assert!(HypertoricData::product(&HypertoricData::tpn(2), &HypertoricData::tpn(2)).validate().is_ok());
    }

    #[test]
    fn int_det_small() {
        let w = vec![vec![1, 2], vec![3, 4]];
        assert_eq!(int_det(&[0, 1], &[0, 1], &w), -2);
    }
}
