use thiserror::Error;

/// Errors raised by the loop, field, action and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("parity mismatch: {0}")]
    Parity(String),
    #[error("winding number undefined: loop passes within {tolerance:e} of the origin at node {node}")]
    WindingUndefined { node: usize, tolerance: f64 },
    #[error("unknown field preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("position {re}+{im}i lies outside the model domain: {reason}")]
    Domain { re: f64, im: f64, reason: String },
    #[error("degenerate loop: L2 norm vanishes")]
    DegenerateLoop,
    #[error("degenerate collision at tau = {tau}: |z'| = {speed:e} below tolerance")]
    DegenerateCollision { tau: f64, speed: f64 },
    #[error("singular loop: |q| = {min_abs:e} at node {node}")]
    SingularLoop { node: usize, min_abs: f64 },
    #[error("gradient flow collapsed towards the zero loop (|z| = {norm:e})")]
    DegenerateFlow { norm: f64 },
    #[error("continuation seed is invalid: {0}")]
    SeedInvalid(String),
    #[error("direct integration aborted near collision at t = {t} (|q| = {radius:e})")]
    NearCollision { t: f64, radius: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
