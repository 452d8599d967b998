//! Error type shared across the crate.

/// Errors produced by model construction, particle propagation and EM.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Every initial particle received zero weight.
    #[error("degenerate initialization: all initial particle weights are zero")]
    DegenerateInitialization,

    /// Every particle weight underflowed to zero at the given time step,
    /// which signals a model/data mismatch rather than a recoverable state.
    #[error("particle weights collapsed to zero at time {time}")]
    WeightCollapse { time: usize },

    #[error("non-finite particle weight at time {time}")]
    NonFiniteWeight { time: usize },

    #[error("degenerate sufficient statistics: {0}")]
    DegenerateStatistics(String),

    #[error("time index mismatch: expected {expected}, got {got}")]
    TimeMismatch { expected: usize, got: usize },

    #[error("lag window underflow: term {term} not covered by window starting at {start}")]
    WindowUnderflow { term: usize, start: usize },

    #[error("EM iteration {iteration} failed: {source}")]
    EmIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
