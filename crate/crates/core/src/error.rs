use thiserror::Error;

/// Errors raised by matrix construction, manifold operations, generators and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    Asymmetric(f64),

    #[error("block dimension {d} does not divide matrix order {n}")]
    InvalidBlockDim { n: usize, d: usize },

    #[error("matrix carries no block structure")]
    MissingBlockStructure,

    #[error("point is not on the manifold: {0}")]
    NotOnManifold(String),

    #[error("vector is not tangent at the given base point: {0}")]
    NotTangent(String),

    #[error("zero tangent vector")]
    ZeroTangent,

    #[error("retraction undefined: block {block} has singular value {singular_value:.3e}")]
    RetractionUndefined { block: usize, singular_value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negative edge weight {value} at ({i}, {j})")]
    NegativeWeight { i: usize, j: usize, value: f64 },

    #[error("instance too large for exhaustive search: n = {n} > {max}")]
    TooLarge { n: usize, max: usize },

    #[error("generator failed: {0}")]
    GeneratorFailed(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
