//! Seeded parameter draws with rejection of non-generic points.
//!
//! Draws are made in `f64` and widened, so every scalar type sees the same
//! parameters for a given seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::envelopes::EnvelopeParams;
use crate::error::{Error, Result};
use crate::qspecial::{MultPoint, QContext};
use crate::scalar::{cx, Real};

/// Rejections tolerated before [`Error::DrawExhausted`].
pub const MAX_REJECTIONS: usize = 1000;

/// Sampling boxes. Logarithms have `|Im u| ≤ π` and `|Re u| ≤ re_box`.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawConstraints {
    pub n: usize,
    /// Range of `|q|`.
    pub q_modulus: (f64, f64),
    /// Range of `|z|`; the `Re` box when absent.
    pub z_modulus: Option<(f64, f64)>,
    pub re_box: f64,
    /// Box for `Re ln ħ^{1/2}`.
    pub hbar_re_box: f64,
    /// Forces `a₁/a₂ = ħ q`.
    pub pinch: bool,
}

impl Default for DrawConstraints {
    fn default() -> Self {
        Self { n: 2, q_modulus: (0.05, 0.5), z_modulus: None, re_box: 3.0, hbar_re_box: 3.0, pinch: false }
    }
}

impl DrawConstraints {
    pub fn with_n(n: usize) -> Self {
        Self { n, ..Self::default() }
    }
}

/// A parameter draw in plain logarithms, before widening.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawDraw {
    pub a: Vec<(f64, f64)>,
    pub hbar_half: (f64, f64),
    pub z: (f64, f64),
    pub log_q: (f64, f64),
}

impl RawDraw {
    pub fn params<T: Real>(&self) -> Result<EnvelopeParams<T>> {
        EnvelopeParams::new(
            self.a.iter().map(|&(re, im)| MultPoint::new(cx(re, im))).collect(),
            MultPoint::new(cx(self.hbar_half.0, self.hbar_half.1)),
            MultPoint::new(cx(self.z.0, self.z.1)),
            self.context()?,
        )
    }

    pub fn context<T: Real>(&self) -> Result<QContext<T>> {
        QContext::from_log(cx(self.log_q.0, self.log_q.1), T::epsilon())
    }
}

/// Deterministic stream of draws.
#[derive(Debug, Clone)]
pub struct Drawer {
    rng: ChaCha8Rng,
}

impl Drawer {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    /// `(Re, Im)` with `|Re| ≤ re_box`, `|Im| ≤ π`.
    pub fn log_point(&mut self, re_box: f64) -> (f64, f64) {
        let pi = std::f64::consts::PI;
        (self.uniform(-re_box, re_box), self.uniform(-pi, pi))
    }

    fn raw(&mut self, c: &DrawConstraints) -> RawDraw {
        let pi = std::f64::consts::PI;
        let log_q = (self.uniform(c.q_modulus.0.ln(), c.q_modulus.1.ln()), self.uniform(-pi, pi));
        let mut a: Vec<(f64, f64)> = (0..c.n).map(|_| self.log_point(c.re_box)).collect();
        let hbar_half = self.log_point(c.hbar_re_box);
        let z = match c.z_modulus {
            Some((lo, hi)) => (self.uniform(lo.ln(), hi.ln()), self.uniform(-pi, pi)),
            None => self.log_point(c.re_box),
        };
        if c.pinch && c.n >= 2 {
            a[0] = (a[1].0 + 2.0 * hbar_half.0 + log_q.0, a[1].1 + 2.0 * hbar_half.1 + log_q.1);
        }
        RawDraw { a, hbar_half, z, log_q }
    }

    /// First draw passing the genericity guards and `accept`.
    pub fn draw_with<T: Real>(
        &mut self,
        c: &DrawConstraints,
        accept: impl Fn(&EnvelopeParams<T>) -> bool,
    ) -> Result<(RawDraw, EnvelopeParams<T>)> {
        for _ in 0..MAX_REJECTIONS {
            let raw = self.raw(c);
            if let Ok(p) = raw.params::<T>() {
                if accept(&p) {
                    return Ok((raw, p));
                }
            }
        }
        Err(Error::DrawExhausted(MAX_REJECTIONS))
    }

    pub fn draw<T: Real>(&mut self, c: &DrawConstraints) -> Result<(RawDraw, EnvelopeParams<T>)> {
        self.draw_with(c, |_| true)
    }
}

/// One generic draw from a fresh stream.
pub fn draw_generic<T: Real>(seed: u64, c: &DrawConstraints) -> Result<EnvelopeParams<T>> {
    Drawer::new(seed).draw(c).map(|(_, p)| p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_draws_repeat() {
        let c = DrawConstraints::with_n(3);
        let a = draw_generic::<f64>(11, &c).unwrap();
        let b = draw_generic::<f64>(11, &c).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, draw_generic::<f64>(12, &c).unwrap());
    }

    #[test]
    fn impossible_constraint_exhausts() {
        let err = Drawer::new(1).draw_with::<f64>(&DrawConstraints::default(), |_| false).unwrap_err();
        assert_eq!(err, Error::DrawExhausted(MAX_REJECTIONS));
    }
}
