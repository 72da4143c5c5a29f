use thiserror::Error;

/// Errors raised by the library. Numeric payloads are reported as `f64`
/// regardless of the scalar type used for the computation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("|alpha'| = {slope} > 1 at s = {s}: no arclength completion exists")]
    SlopeExceedsOne { s: f64, slope: f64 },
    #[error("negative radius alpha = {alpha} at interior s = {s}")]
    NegativeRadius { s: f64, alpha: f64 },
    #[error("profile is not a pole at s = {s}: {reason}")]
    PoleMismatch { s: f64, reason: String },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("surface kind mismatch: {0}")]
    WrongSurfaceKind(String),
    #[error("shooting failed: {0}")]
    ShootingFailed(String),
    #[error("conformal map lost monotonicity near phi = {phi}")]
    NonMonotone { phi: f64 },
    #[error("s = 0 is the point at infinity of the chart")]
    PoleAtInfinity,
    #[error("evaluation at r = {r} is below the chart origin guard")]
    OriginUndefined { r: f64 },
    #[error("invalid vortex configuration: {0}")]
    ConfigurationInvalid(String),
    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),
    #[error("evaluation point coincides with vortex {index}")]
    AtVortexCenter { index: usize },
    #[error("vortex at s = {s} is within {standoff} of the boundary")]
    VortexTooCloseToBoundary { s: f64, standoff: f64 },
    #[error("vortex degrees sum to {0}, expected 0")]
    DegreesDoNotCancel(i64),
    #[error("order parameter vanishes on the measurement loop")]
    ZeroOnLoop,
    #[error("time step {dt} exceeds the stability bound {bound}")]
    CflViolated { dt: f64, bound: f64 },
    #[error("non-finite value at grid node ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("field format error: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
