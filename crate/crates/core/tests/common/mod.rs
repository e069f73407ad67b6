//! Reference implementations built from bilateral series rather than the
//! infinite products used by the library.

#![allow(dead_code)]

use num_complex::Complex64;

const TERMS: i64 = 80;

/// `q^{m}` for a possibly large integer `m`, from `ln q`.
fn qpow(log_q: Complex64, m: f64) -> Complex64 {
    (log_q * m).exp()
}

/// `(q;q)_∞` from the pentagonal number series.
pub fn euler(log_q: Complex64) -> Complex64 {
    (-TERMS..=TERMS)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let k = k as f64;
            qpow(log_q, k * (3.0 * k - 1.0) / 2.0) * sign
        })
        .sum()
}

/// `ϑ(e^u) = −e^{−u/2} Σ_k (−1)^k q^{k(k−1)/2} e^{ku} / (q;q)_∞`.
pub fn theta(u: Complex64, log_q: Complex64) -> Complex64 {
    let s: Complex64 = (-TERMS..=TERMS)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let kf = k as f64;
            (log_q * (kf * (kf - 1.0) / 2.0) + u * kf).exp() * sign
        })
        .sum();
    -(-u / 2.0).exp() * s / euler(log_q)
}

/// Finite `(x;q)_d` by direct multiplication.
pub fn pochhammer(x: Complex64, q: Complex64, d: usize) -> Complex64 {
    let mut out = Complex64::new(1.0, 0.0);
    let mut qi = Complex64::new(1.0, 0.0);
    for _ in 0..d {
        out *= Complex64::new(1.0, 0.0) - x * qi;
        qi *= q;
    }
    out
}

pub fn rel(got: Complex64, want: Complex64) -> f64 {
    (got - want).norm() / want.norm().max(1e-300)
}

/// Largest entry-wise difference over the largest entry.
pub fn rel_mat(got: &[Vec<Complex64>], want: &[Vec<Complex64>]) -> f64 {
    let scale = want.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    let diff = got.iter().flatten().zip(want.iter().flatten()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    diff / scale
}
