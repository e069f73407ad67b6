//! Laurent monomials in the equivariant, Chern-root, Kähler and ħ variables,
//! and products of theta functions of such monomials.
//!
//! A [`ThetaProduct`] is both an evaluator and a symbolic object: its factor
//! of automorphy under `v ↦ q v` for any variable `v` follows exactly from
//! `ϑ(q^e X) = (−1)^e q^{−e²/2} X^{−e} ϑ(X)`.

use std::fmt;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::qspecial::{theta_log, MultPoint, QContext};
use crate::scalar::{int, lit, Cx, Real};

/// A variable of the monomial ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    A(usize),
    S(usize),
    Z(usize),
    Hbar,
}

/// `∏ a_i^{a[i]} ∏ s_i^{s[i]} ∏ z_i^{z[i]} ħ^{hbar}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    pub a: Vec<i64>,
    pub s: Vec<i64>,
    pub z: Vec<i64>,
    pub hbar: i64,
}

/// Sizes of the variable families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_a: usize,
    pub n_s: usize,
    pub n_z: usize,
}

impl Monomial {
    pub fn one(layout: Layout) -> Self {
        Self { a: vec![0; layout.n_a], s: vec![0; layout.n_s], z: vec![0; layout.n_z], hbar: 0 }
    }

    pub fn var(layout: Layout, v: Var) -> Self {
        Self::one(layout).times_var(v, 1)
    }

    pub fn times_var(mut self, v: Var, e: i64) -> Self {
        match v {
            Var::A(i) => self.a[i] += e,
            Var::S(i) => self.s[i] += e,
            Var::Z(i) => self.z[i] += e,
            Var::Hbar => self.hbar += e,
        }
        self
    }

    pub fn exponent(&self, v: Var) -> i64 {
        match v {
            Var::A(i) => self.a[i],
            Var::S(i) => self.s[i],
            Var::Z(i) => self.z[i],
            Var::Hbar => self.hbar,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.combine(other, 1)
    }

    pub fn div(&self, other: &Self) -> Self {
        self.combine(other, -1)
    }

    pub fn pow(&self, e: i64) -> Self {
        let f = |v: &Vec<i64>| v.iter().map(|x| x * e).collect();
        Self { a: f(&self.a), s: f(&self.s), z: f(&self.z), hbar: self.hbar * e }
    }

    fn combine(&self, other: &Self, sign: i64) -> Self {
        let f = |x: &Vec<i64>, y: &Vec<i64>| x.iter().zip(y).map(|(p, q)| p + sign * q).collect();
        Self {
            a: f(&self.a, &other.a),
            s: f(&self.s, &other.s),
            z: f(&self.z, &other.z),
            hbar: self.hbar + sign * other.hbar,
        }
    }

    pub fn is_one(&self) -> bool {
        self.hbar == 0 && self.a.iter().chain(&self.s).chain(&self.z).all(|e| *e == 0)
    }

    /// Replaces `s_idx` by the monomial `m`, which must not involve `s_idx`.
    pub fn substitute_s(&self, idx: usize, m: &Monomial) -> Self {
        let e = self.s[idx];
        let mut out = self.clone();
        out.s[idx] = 0;
        out.mul(&m.pow(e))
    }

    /// Logarithm at a point: `Σ exponent · u`.
    pub fn log_at<T: Real>(&self, p: &Point<T>) -> Cx<T> {
        let mut acc = Cx::<T>::zero();
        for (e, u) in self.a.iter().zip(&p.a) {
            if *e != 0 {
                acc = acc + *u * int::<T>(*e);
            }
        }
        for (e, u) in self.s.iter().zip(&p.s) {
            if *e != 0 {
                acc = acc + *u * int::<T>(*e);
            }
        }
        for (e, u) in self.z.iter().zip(&p.z) {
            if *e != 0 {
                acc = acc + *u * int::<T>(*e);
            }
        }
        if self.hbar != 0 {
            acc = acc + p.hbar * int::<T>(self.hbar);
        }
        acc
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        let mut push = |name: String, e: i64| match e {
            0 => {}
            1 => parts.push(name),
            _ => parts.push(format!("{name}^{e}")),
        };
        for (i, e) in self.a.iter().enumerate() {
            push(format!("a{}", i + 1), *e);
        }
        for (i, e) in self.s.iter().enumerate() {
            push(format!("s{}", i + 1), *e);
        }
        for (i, e) in self.z.iter().enumerate() {
            push(format!("z{}", i + 1), *e);
        }
        push("ħ".to_string(), self.hbar);
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("·"))
        }
    }
}

/// Logarithmic coordinates of all variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Point<T> {
    pub a: Vec<Cx<T>>,
    pub s: Vec<Cx<T>>,
    pub z: Vec<Cx<T>>,
    pub hbar: Cx<T>,
}

impl<T: Real> Point<T> {
    pub fn get(&self, v: Var) -> Cx<T> {
        match v {
            Var::A(i) => self.a[i],
            Var::S(i) => self.s[i],
            Var::Z(i) => self.z[i],
            Var::Hbar => self.hbar,
        }
    }

    pub fn set(&mut self, v: Var, u: Cx<T>) {
        match v {
            Var::A(i) => self.a[i] = u,
            Var::S(i) => self.s[i] = u,
            Var::Z(i) => self.z[i] = u,
            Var::Hbar => self.hbar = u,
        }
    }

    /// The point with `v` replaced by `q^e v`.
    pub fn qshift(&self, v: Var, e: i64, ctx: &QContext<T>) -> Self {
        let mut p = self.clone();
        p.set(v, self.get(v) + ctx.log_q() * int::<T>(e));
        p
    }
}

/// `ϑ(arg)^power`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ThetaFactor {
    pub arg: Monomial,
    pub power: i64,
}

/// Product of integer powers of theta functions of monomials.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ThetaProduct {
    pub factors: Vec<ThetaFactor>,
}

/// `sign · q^{q_half/2} · mono`, the ratio `F(q v)/F(v)` of a theta product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automorphy {
    pub sign: i64,
    pub q_half: i64,
    pub mono: Monomial,
}

impl Automorphy {
    pub fn eval<T: Real>(&self, p: &Point<T>, ctx: &QContext<T>) -> Cx<T> {
        let log = ctx.log_q() * (int::<T>(self.q_half) * lit(0.5)) + self.mono.log_at(p);
        log.exp() * int::<T>(self.sign)
    }
}

impl ThetaProduct {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num(mut self, arg: Monomial) -> Self {
        self.factors.push(ThetaFactor { arg, power: 1 });
        self
    }

    pub fn den(mut self, arg: Monomial) -> Self {
        self.factors.push(ThetaFactor { arg, power: -1 });
        self
    }

    pub fn times(mut self, other: &ThetaProduct) -> Self {
        self.factors.extend(other.factors.iter().cloned());
        self
    }

    /// True when a numerator factor is `ϑ(1)`, which makes the product
    /// identically zero.
    pub fn is_identically_zero(&self) -> bool {
        self.factors.iter().any(|f| f.power > 0 && f.arg.is_one())
    }

    pub fn substitute_s(&self, idx: usize, m: &Monomial) -> Self {
        Self {
            factors: self
                .factors
                .iter()
                .map(|f| ThetaFactor { arg: f.arg.substitute_s(idx, m), power: f.power })
                .collect(),
        }
    }

    pub fn eval<T: Real>(&self, p: &Point<T>, ctx: &QContext<T>) -> Result<Cx<T>> {
        if self.is_identically_zero() {
            return Ok(Cx::<T>::zero());
        }
        let mut log = Cx::<T>::zero();
        let mut zero_num = false;
        for f in &self.factors {
            match theta_log(MultPoint::new(f.arg.log_at(p)), ctx)? {
                Some(l) => log = log + l * int::<T>(f.power),
                None if f.power > 0 => zero_num = true,
                None => return Err(self.vanishing_denominator()),
            }
        }
        if zero_num {
            return Ok(Cx::<T>::zero());
        }
        Ok(log.exp())
    }

    fn vanishing_denominator(&self) -> Error {
        let which =
            self.factors.iter().filter(|f| f.power < 0).map(|f| format!("ϑ({})", f.arg)).collect::<Vec<_>>().join("·");
        Error::DenominatorVanishes(which)
    }

    /// Exact factor of automorphy for `v ↦ q v`.
    pub fn automorphy(&self, v: Var, layout: Layout) -> Automorphy {
        let mut sign = 1i64;
        let mut q_half = 0i64;
        let mut mono = Monomial::one(layout);
        for f in &self.factors {
            let e = f.arg.exponent(v);
            if e == 0 {
                continue;
            }
            if (e * f.power).rem_euclid(2) == 1 {
                sign = -sign;
            }
            q_half -= e * e * f.power;
            mono = mono.mul(&f.arg.pow(-e * f.power));
        }
        Automorphy { sign, q_half, mono }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    #[test]
    fn substitution_exposes_forced_zero() {
        let l = Layout { n_a: 2, n_s: 1, n_z: 0 };
        let arg = Monomial::var(l, Var::S(0)).times_var(Var::A(1), 1);
        let p = ThetaProduct::new().num(arg);
        let inv_a1 = Monomial::var(l, Var::A(1)).pow(-1);
        assert!(p.substitute_s(0, &inv_a1).is_identically_zero());
        let inv_a0 = Monomial::var(l, Var::A(0)).pow(-1);
        assert!(!p.substitute_s(0, &inv_a0).is_identically_zero());
    }

    #[test]
    fn automorphy_of_single_theta() {
        let l = Layout { n_a: 1, n_s: 0, n_z: 0 };
        let f = ThetaProduct::new().num(Monomial::var(l, Var::A(0)).pow(2));
        let aut = f.automorphy(Var::A(0), l);
        assert_eq!(aut.sign, 1);
        assert_eq!(aut.q_half, -4);
        assert_eq!(aut.mono, Monomial::var(l, Var::A(0)).pow(-4));
        let ctx = QContext::<f64>::new(cx(0.2, 0.1)).unwrap();
        let p = Point { a: vec![cx(0.3, 0.7)], s: vec![], z: vec![], hbar: cx(0.0, 0.0) };
        let lhs = f.eval(&p.qshift(Var::A(0), 1, &ctx), &ctx).unwrap();
        let rhs = aut.eval(&p, &ctx) * f.eval(&p, &ctx).unwrap();
        assert!((lhs - rhs).norm() < 1e-12 * rhs.norm());
    }

    #[test]
    fn display_is_readable() {
        let l = Layout { n_a: 2, n_s: 1, n_z: 1 };
        let m = Monomial::var(l, Var::S(0)).times_var(Var::A(1), -1).times_var(Var::Hbar, 2);
        assert_eq!(m.to_string(), "a2^-1·s1·ħ^2");
    }
}
