//! Elliptic stable envelopes, elliptic dynamical R-matrices and vertex
//! functions for `T*P^{n-1}`, smooth hypertoric varieties and `T*Gr(k, n)`,
//! together with numerical checks of the identities they satisfy.
//!
//! Every numerical routine is generic over [`Real`]; the aliases at the crate
//! root fix the scalar to `f64`.

pub mod abelianization;
pub mod draw;
pub mod envelopes;
pub mod error;
pub mod io;
pub mod ktheory_limit;
pub mod linalg;
pub mod qspecial;
pub mod report;
pub mod rmatrix;
pub mod scalar;
pub mod suite;
pub mod symbolic;
pub mod vertex;
pub mod weights;

pub use error::{Error, Result};
pub use scalar::{Cx, Real};

/// Double-precision aliases.
pub type QContextF64 = qspecial::QContext<f64>;
pub type MultPointF64 = qspecial::MultPoint<f64>;
pub type EnvelopeParamsF64 = envelopes::EnvelopeParams<f64>;
pub type CMatF64 = linalg::CMat<f64>;
