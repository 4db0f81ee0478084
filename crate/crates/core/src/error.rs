use thiserror::Error;

use crate::network::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("matrix is not orthonormal (||x^T x - I||_F = {residual:e})")]
    NotOrthonormal { residual: f64 },

    #[error("tangent vector violates the skew condition (residual {residual:e})")]
    NotTangent { residual: f64 },

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    /// The Euclidean mean has a (numerically) vanishing singular value, so its
    /// polar factor is not unique.
    #[error("degenerate mean: smallest singular value {sigma_min:e} is below the threshold")]
    DegenerateMean { sigma_min: f64 },

    #[error("matrix violates the mixing-matrix assumptions: {}", format_violations(.0))]
    InvalidMixingMatrix(Vec<Violation>),

    #[error("communication graph is not connected (lambda_2 = {lambda2})")]
    NotConnected { lambda2: f64 },

    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("edge list line {line}: {message}")]
    EdgeList { line: usize, message: String },

    #[error("trace too short for rate estimation: {have} iterations, need at least {need}")]
    TraceTooShort { have: usize, need: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
