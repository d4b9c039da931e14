use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("model needs at least one class and matching rate vectors (got {lambda} arrival rates, {mu} service rates)")]
    ClassCount { lambda: usize, mu: usize },

    #[error("rate for class {class} must be positive and finite, got {value}")]
    NonPositiveRate { class: usize, value: f64 },

    #[error("unstable system: total load {load} >= 1")]
    Unstable { load: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("cycle exceeded the safety cap of {cap} events")]
    CycleLengthExceeded { cap: u64 },

    #[error("denominator has no target-class jobs")]
    EmptyDenominator,

    #[error("weighted sample is empty")]
    EmptySample,

    #[error("quantile threshold is not resolvable: {0}")]
    Unresolvable(String),

    #[error("batch {batch} has no target-class jobs or an empty denominator")]
    BatchTooSmall { batch: usize },

    #[error("no cycle contains a job of the target class")]
    NoTargetJobs,

    #[error("no elite sample above level {gamma}")]
    DegenerateElite { gamma: f64 },

    #[error("cross-entropy level stalled at {gamma} for {iterations} iterations")]
    NoProgress { gamma: f64, iterations: usize },

    #[error("cross-entropy search hit the iteration cap ({0})")]
    IterationCap(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ClassCount { .. }
            | Error::NonPositiveRate { .. }
            | Error::Unstable { .. }
            | Error::Config(_)
            | Error::Io(_) => 2,
            Error::CycleLengthExceeded { .. } => 4,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
