use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point violates manifold constraint: {0}")]
    Constraint(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("generator index {index} out of range for family with {count} controls")]
    GeneratorIndex { index: usize, count: usize },

    #[error("ensemble members {0} and {1} coincide")]
    CoincidentMembers(usize, usize),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("integration produced a non-finite state at control step {step}, substep {substep}")]
    NonFinite { step: usize, substep: usize },

    #[error("quadrature order {nodes} too small for series order {order} (need at least {required})")]
    QuadratureOrder {
        order: usize,
        nodes: usize,
        required: usize,
    },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
