//! Scalar abstraction shared by every numerical routine.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar type the library is generic over.
///
/// Implemented for `f32`, `f64` and, with the `wide` feature, the binary128
/// type from the `f128` crate.
pub trait Real: Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static {
    /// Label written into reports.
    const NAME: &'static str;
}

impl Real for f32 {
    const NAME: &'static str = "f32";
}

impl Real for f64 {
    const NAME: &'static str = "f64";
}

#[cfg(feature = "wide")]
impl Real for f128::f128 {
    const NAME: &'static str = "f128";
}

/// Complex number over the scalar `T`.
pub type Cx<T> = Complex<T>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Complex literal.
#[inline]
pub fn cx<T: Real>(re: f64, im: f64) -> Cx<T> {
    Complex::new(lit(re), lit(im))
}

/// Complex unit `i`.
#[inline]
pub fn imag_unit<T: Real>() -> Cx<T> {
    Complex::new(T::zero(), T::one())
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn cx_to_f64<T: Real>(z: Cx<T>) -> Complex<f64> {
    Complex::new(to_f64(z.re), to_f64(z.im))
}

#[inline]
pub fn cx_from_f64<T: Real>(z: Complex<f64>) -> Cx<T> {
    Complex::new(lit(z.re), lit(z.im))
}

/// `max` by comparison. The binary128 type's own `max`/`min` order two
/// negative values backwards.
#[inline]
pub fn fmax<T: Real>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

#[inline]
pub fn fmin<T: Real>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

/// Integer to scalar.
#[inline]
pub fn int<T: Real>(k: i64) -> T {
    T::from_i64(k).expect("integer representable in scalar type")
}
