use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry in input")]
    NonFinite,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("premise violated: {0}")]
    PremiseViolated(String),

    #[error("rank condition failed{}: {lhs} vs {rhs}", step_suffix(*.step))]
    RankConditionFailed {
        step: Option<usize>,
        lhs: usize,
        rhs: usize,
    },

    #[error("information condition failed{}: {lhs} vs {rhs}", step_suffix(*.step))]
    InformationConditionFailed {
        step: Option<usize>,
        lhs: f64,
        rhs: f64,
    },

    #[error("inconsistent marginals: {0}")]
    InconsistentMarginals(String),

    #[error("no selector rows reach the required rank: {0}")]
    RankDeficientSelection(String),

    #[error("map is not completely positive and trace preserving: {0}")]
    NotCptp(String),

    #[error("serialization: {0}")]
    Serialization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn step_suffix(step: Option<usize>) -> String {
    match step {
        Some(k) => format!(" at step k={k}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
