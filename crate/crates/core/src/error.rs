use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for {len} examples")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("power iteration did not converge in {iterations} iterations (last estimate {estimate})")]
    NotConverged { estimate: f64, iterations: usize },

    #[error("{0} loss is not smooth")]
    NonSmooth(&'static str),

    #[error("non-finite stochastic gradient at example {index}")]
    NonFiniteGradient { index: usize },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("line search exceeded {doublings} doublings (estimate {estimate})")]
    LineSearch { doublings: u32, estimate: f64 },

    #[error("dataset lacks {0}")]
    MissingCertificate(&'static str),

    #[error("full gradient vanishes (norm² {0:e}); growth ratio undefined")]
    VanishingGradient(f64),

    #[error("every sampled point is at interpolation; no growth ratio available")]
    AllInterpolating,

    #[error("all grid candidates diverged; final losses {0:?}")]
    AllDiverged(Vec<(f64, f64)>),

    #[error("rejection sampling gave up after {0} consecutive rejections; use a smaller margin")]
    RejectionLimit(u64),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("expected exactly two distinct labels, found {0:?}")]
    Labels(Vec<f64>),

    #[error("row {0} has zero norm")]
    ZeroRow(usize),

    #[error("not enough points above the loss floor for a rate fit ({found} < {required})")]
    InsufficientRows { found: usize, required: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user configuration rather than a failure
    /// during a run.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::InvalidArgument(_)
            | Error::InvalidSchedule(_)
            | Error::MissingCertificate(_)
            | Error::NonSmooth(_) => true,
            Error::Context { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
