use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by callers that need to map failures onto
/// process exit codes or report columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("time {t} s outside reference range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("observation {index}: {source}")]
    AtObservation {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("calibration for sensor '{expected}' applied to sensor '{found}'")]
    SensorMismatch { expected: String, found: String },

    #[error("calibration slope is zero for sensor '{0}'; cannot invert")]
    ZeroSlope(String),

    #[error("singular kriging system: observations {first} and {second} coincide under a zero nugget")]
    CoincidentPoints { first: usize, second: usize },

    #[error("singular linear system (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },

    #[error("ill-conditioned kriging system: {0}")]
    IllConditioned(String),

    #[error("covariance factorization failed after jitter {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("no observations within the neighborhood radius")]
    NoNeighbors,

    #[error("non-finite objective: {0}")]
    NonFinite(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at(index: usize, source: Error) -> Self {
        Error::AtObservation {
            index,
            source: Box::new(source),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter(_) => ErrorClass::Config,
            Error::Singular { .. }
            | Error::CoincidentPoints { .. }
            | Error::Factorization { .. }
            | Error::NonFinite(_)
            | Error::IllConditioned(_)
            | Error::DegenerateDesign(_)
            | Error::ZeroSlope(_) => ErrorClass::Numerical,
            Error::AtObservation { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }
}
