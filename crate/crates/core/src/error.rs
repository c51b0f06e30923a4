use alloc::string::String;

use crate::data::WalkingCondition;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("autoregressive coefficient {0} is outside (-1, 1)")]
    PhiOutOfRange(f64),

    #[error("scale parameter must be positive and finite, got {0}")]
    NonPositiveScale(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("participant {participant}: missing condition {condition}")]
    MissingCondition {
        participant: String,
        condition: WalkingCondition,
    },

    #[error("participant {participant}, condition {condition}: {detail}")]
    SeriesOrder {
        participant: String,
        condition: WalkingCondition,
        detail: String,
    },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("invalid prior for {parameter}: {detail}")]
    InvalidPrior { parameter: String, detail: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("conditional precision of beta is not positive definite")]
    SingularPrecision,

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("non-finite state in chain {chain} at iteration {iteration}: {state}")]
    NonFinite {
        chain: usize,
        iteration: usize,
        state: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unknown parameter {0}")]
    UnknownParameter(String),

    #[error("posterior draws do not belong to this series: {0}")]
    Mismatch(String),

    #[error("empty input")]
    Empty,
}
