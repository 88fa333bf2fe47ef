use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("circulant embedding failed: {0}")]
    Embedding(String),

    #[error("estimation failed: {0}")]
    EstimationFailure(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("insufficient sample: {0}")]
    InsufficientSample(String),

    #[error("collinear design: columns {columns:?} (condition number {condition:.3e})")]
    Collinearity { columns: Vec<String>, condition: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
