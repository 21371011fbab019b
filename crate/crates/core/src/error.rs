use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("resource limit exceeded: {what} needs {requested}, cap is {cap}")]
    Resource {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("unknown register `{0}`")]
    UnknownRegister(String),

    #[error("duplicate register `{0}`")]
    DuplicateRegister(String),

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("operator is not a projector (defect {defect:e})")]
    NotProjector { defect: f64 },

    #[error("operator is not Hermitian (defect {defect:e})")]
    NonHermitian { defect: f64 },

    #[error("operator is not a valid POVM element: {0}")]
    InvalidPovm(String),

    #[error("gentle-measurement bound violated: distance {distance} > sqrt({epsilon})")]
    GentleBoundViolated { distance: f64, epsilon: f64 },

    #[error("unknown flag set `{0}`")]
    UnknownFlagSet(String),

    #[error("unknown oracle slot `{0}`")]
    UnknownOracle(String),

    #[error("oracle width overflow: {0}")]
    WidthOverflow(String),

    #[error("security parameter must be even, got {0}")]
    OddLambda(usize),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
