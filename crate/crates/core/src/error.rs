use thiserror::Error;

/// Errors produced by model construction, estimators and the oracle.
#[derive(Debug, Error)]
pub enum CdroError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("enumeration guard exceeded: {leaves} leaves > {max}")]
    SizeGuard { leaves: usize, max: usize },

    #[error("model is not a martingale: worst node violation {violation:.3e} > {tol:.3e}")]
    NotMartingale { violation: f64, tol: f64 },

    #[error("projection failed: {0}")]
    ProjectionFailure(String),

    #[error("unsupported backend: {0}")]
    UnsupportedBackend(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, CdroError>;
