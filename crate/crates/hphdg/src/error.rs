use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum HdgError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("mesh integrity error: {0}")]
    MeshIntegrity(String),
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error("flux hypothesis violated at x = ({:.6e}, {:.6e}), n = ({:.6e}, {:.6e}): {detail}", x[0], x[1], n[0], n[1])]
    FluxHypothesis { x: [f64; 2], n: [f64; 2], detail: String },
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
}

pub type Result<T> = std::result::Result<T, HdgError>;
