use thiserror::Error;

/// Errors raised by the numerical and physical layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has {found} entries, shape requires {expected}")]
    EntryCount { expected: usize, found: usize },

    #[error("matrix dimensions must be positive and at most {max}, got {rows}x{cols}")]
    BadShape {
        rows: usize,
        cols: usize,
        max: usize,
    },

    #[error("non-finite entry")]
    NonFinite,

    #[error("not hermitian: max deviation {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("not positive semidefinite: min eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("trace must be 1, got {trace}")]
    Trace { trace: f64 },

    #[error("not normalized: norm {norm}")]
    Norm { norm: f64 },

    #[error("measurement elements do not sum to identity: max deviation {deviation:e}")]
    Completeness { deviation: f64 },

    #[error("{name} = {value} outside range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("zero vector cannot be normalized")]
    ZeroVector,

    #[error("need at least {required} states, got {found}")]
    TooFewStates { required: usize, found: usize },

    #[error("inapplicable: {0}")]
    Inapplicable(String),

    #[error("numerical failure: {0}")]
    NoConvergence(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
