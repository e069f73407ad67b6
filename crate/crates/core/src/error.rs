use thiserror::Error;

/// Failure modes of the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("modulus must satisfy 0 < |q| < 1, got |q| = {0}")]
    InvalidModulus(f64),
    #[error("truncation insufficient: tail bound {bound:e} exceeds tolerance {tol:e}")]
    TruncationInsufficient { bound: f64, tol: f64 },
    #[error("denominator vanishes: {0}")]
    DenominatorVanishes(String),
    #[error("resonant parameters: {0}")]
    ParameterResonant(String),
    #[error("stable envelope matrix is numerically singular")]
    SingularStab,
    #[error("resonant denominator Pochhammer for a_{i}/a_{j}")]
    ResonantDenominator { i: usize, j: usize },
    #[error("contour pinched: {0}")]
    ContourPinched(String),
    #[error("resonant q-difference system: {0}")]
    Resonant(String),
    #[error("control residue vanishes, probe is uninformative")]
    ControlDegenerate,
    #[error("slope {0} lies on a wall")]
    SlopeOnWall(f64),
    #[error("fit underdetermined: {samples} samples for a window of {window} slots")]
    FitUnderdetermined { samples: usize, window: usize },
    #[error("no generic draw after {0} rejections")]
    DrawExhausted(usize),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
