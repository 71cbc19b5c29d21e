use thiserror::Error;

/// Errors raised by the solver toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("matrix is not positive definite (eigenvalue {0:e})")]
    Definiteness(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("mesh generation failed: inverted element at cell {cell}")]
    InvertedElement { cell: usize },
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("singular matrix: zero pivot at column {index}")]
    SingularMatrix { index: usize },
    #[error("shift rejected: {0}")]
    ShiftRejected(String),
    #[error("incomplete root search for order {order}: argument principle counts {expected}, found {found}")]
    IncompleteSearch {
        order: usize,
        expected: usize,
        found: usize,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
