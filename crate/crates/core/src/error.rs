use thiserror::Error;

/// Errors raised by geometry construction, parsing and evaluation.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("unknown geometry `{0}`")]
    UnknownGeometry(String),

    #[error("unknown suite `{0}`")]
    UnknownSuite(String),

    #[error("parameter `{name}` = {value} out of range: {reason}")]
    ParamOutOfRange {
        name: String,
        value: f64,
        reason: String,
    },

    #[error("unknown parameter `{name}` for geometry `{geometry}`")]
    UnknownParameter { geometry: String, name: String },

    #[error("singular metric at {point:?}")]
    SingularMetric { point: Vec<f64> },

    #[error("metric signature mismatch at {point:?}: expected {expected}")]
    SignatureMismatch { point: Vec<f64>, expected: String },

    #[error("point {point:?} outside the chart interior")]
    PointOutOfRange { point: Vec<f64> },

    #[error("valence mismatch: {0}")]
    ValenceMismatch(String),

    #[error("{line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("undeclared parameter `{name}` at {line}:{col}")]
    UndeclaredParameter { name: String, line: usize, col: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("backend unsupported: {0}")]
    Backend(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("quadrature unavailable: {0}")]
    Quadrature(String),

    #[error("non-convergence: {0}")]
    NonConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
