use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("pair ({i}, {j}) at distance {r:e} is inside the singularity guard")]
    Singularity { i: usize, j: usize, r: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for ladder of {len} temperatures")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("non-finite force at t = {t}")]
    NonFiniteForce { t: f64, x: Vec<f64> },

    #[error("at step {step}: {source}")]
    AtStep {
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate proportion for temperature {k}: w = {w}; lengthen the trajectory")]
    DegenerateProportion { k: usize, w: f64 },

    #[error("at adaptation iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sum of physical-temperature weights is zero")]
    DegenerateWeights,

    #[error("no samples fell inside the histogram range")]
    EmptyHistogram,

    #[error("density vanishes at x = {x}, temperature {k} where equilibrium is positive")]
    ZeroDensity { x: f64, k: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
