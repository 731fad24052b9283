use std::path::PathBuf;

/// Errors raised anywhere in the simulator and harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate lattice: side {side} < 3 makes x+eps and x-eps coincide")]
    DegenerateLattice { side: usize },

    #[error("lattice too large: {side}^{dim} sites overflows the index range")]
    LatticeOverflow { dim: usize, side: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("Bernoulli parameter {value} > 1 at site {site} (infeasible initial law)")]
    ParameterExceedsOne { site: usize, value: f64 },

    #[error("density profile is invalid: {0}")]
    InvalidProfile(String),

    #[error("no particles: the exclusion dynamics has no events to draw")]
    EmptySystem,

    #[error("event budget of {budget} exhausted at t = {time} after {events} events")]
    Budget { budget: u64, events: u64, time: f64 },

    #[error("counter overflow on directed edge {edge}")]
    CounterOverflow { edge: usize },

    #[error("pathwise identity violated: {0}")]
    PathwiseViolation(String),

    #[error("dual points must be pairwise distinct sites")]
    DuplicatePoints,

    #[error(
        "exact oracle handles k <= 2 with at most {limit} states; k = {k} needs {states} ordered tuples, use the Monte-Carlo estimator instead"
    )]
    StateSpaceTooLarge { k: usize, states: u128, limit: usize },

    #[error("at least {needed} samples required, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("sample variance is zero")]
    DegenerateSample,

    #[error("regime infeasible: Bernoulli parameter {value} > 1 at site {site} (n = {n})")]
    InfeasibleRegime { n: usize, site: usize, value: f64 },

    #[error("parameter out of range: {0}")]
    Range(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("replica {id} failed: {source}")]
    Replica {
        id: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
