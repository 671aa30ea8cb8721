use thiserror::Error;

/// Errors raised anywhere in the solver suite.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("point {point:?} lies outside the tubular neighborhood of the surface")]
    Projection { point: Vec<f64> },

    #[error("projection failed at vertex {vertex}: {reason}")]
    VertexProjection { vertex: usize, reason: String },

    #[error("non-manifold mesh: facet {facet:?} has {count} incident cells")]
    NonManifold { facet: Vec<usize>, count: usize },

    #[error("degenerate cell {0}")]
    DegenerateCell(usize),

    #[error("degenerate facet {0}")]
    DegenerateFacet(usize),

    #[error("isolated vertex {0}")]
    IsolatedVertex(usize),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-positive pivot {value:e} at row {row}")]
    NonPositivePivot { row: usize, value: f64 },

    #[error("non-positive diagonal entry {value:e} at row {row}")]
    NonPositiveDiagonal { row: usize, value: f64 },

    #[error("preconditioner is not positive definite: <r,z> = {value:e} at iteration {iteration}")]
    NotPositiveDefinite { iteration: usize, value: f64 },

    #[error("penalty parameter alpha = {alpha} fails the coercivity check")]
    NotCoercive { alpha: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
