//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("improper transfer function: numerator degree {num_deg} exceeds denominator degree {den_deg}")]
    Improper { num_deg: usize, den_deg: usize },

    #[error("denominator polynomial is identically zero")]
    ZeroDenominator,

    #[error("algebraic degeneracy: {0}")]
    Degenerate(String),

    #[error("expected a SISO system, got {inputs} inputs and {outputs} outputs")]
    NotSiso { inputs: usize, outputs: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),

    #[error("Riccati solve failed: {0}")]
    Riccati(String),

    #[error("gamma {gamma} must exceed gamma_min {gamma_min}")]
    GammaTooSmall { gamma: f64, gamma_min: f64 },

    #[error("ill-posed feedback interconnection: I + D_plant * D_controller is singular")]
    IllPosed,

    #[error("all plant pairs fail the winding condition; partition the envelope into smaller regions")]
    EnvelopeWindingFailure,

    #[error("envelope error: {0}")]
    Envelope(String),

    #[error("invalid weight parameter {name}: {reason}")]
    WeightParam { name: &'static str, reason: String },

    #[error("magnitude fit is rank deficient; try a lower order")]
    FitRankDeficient,

    #[error("invalid fit input: {0}")]
    FitInput(String),

    #[error("invalid swarm configuration: {0}")]
    SwarmConfig(String),

    #[error("cost parameter vector has length {got}, expected {expected}")]
    ParamLength { got: usize, expected: usize },

    #[error("steady state not reached: {0}")]
    Unsettled(String),

    #[error("matrix exponential failed: {0}")]
    MatrixExp(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
