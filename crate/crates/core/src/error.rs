use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid noise channel: {0}")]
    InvalidChannel(String),

    #[error("probe count must be at least 1")]
    ZeroProbes,

    #[error("grid size must be at least 2, got {0}")]
    GridTooSmall(usize),

    #[error("support interval [{lo}, {hi}] contains no grid point")]
    EmptySupport { lo: f64, hi: f64 },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    /// Every weight vanished after a Bayes update: the observed outcome has
    /// zero likelihood on the whole support.
    #[error("degenerate posterior: outcome has zero likelihood on the support")]
    DegeneratePosterior,

    #[error("circular mean undefined: resultant length {0:e} is zero")]
    UndefinedMean(f64),

    #[error("Holevo variance is infinite: sharpness {0:e} is zero")]
    InfiniteVariance(f64),

    #[error("policy step {k} out of range 1..={n}")]
    StepOutOfRange { k: usize, n: usize },

    #[error("policy covers {policy} probes but {requested} were requested")]
    PolicyTooShort { policy: usize, requested: usize },

    #[error("invalid swarm configuration: {0}")]
    InvalidPsoConfig(String),

    #[error("at least {min} runs are required, got {got}")]
    TooFewRuns { min: usize, got: usize },

    #[error("outcome sequence is empty")]
    EmptyOutcomes,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Csv(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
