//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A CSV row that cannot be parsed into the declared schema.
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    /// Ragged panel: individuals disagree on T, K, or period coverage.
    #[error("inconsistent panel: {0}")]
    InconsistentPanel(String),

    /// The (T, p) combination does not satisfy the identification requirement.
    #[error("identification requires T >= p + 2, got T = {t}, p = {p}")]
    IdentificationError { t: usize, p: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A specialized evaluator was called on data of the wrong shape.
    #[error("wrong shape: {0}")]
    WrongShape(String),

    /// The conditioning event has probability zero under the spec.
    #[error("conditioning event has zero probability")]
    ZeroConditioningEvent,

    /// Exhaustive enumeration would exceed the hard cap on path count.
    #[error("enumeration of {paths} paths exceeds the cap of {cap}")]
    EnumerationCap { paths: u64, cap: u64 },

    /// The objective carries no identifying information (no informative blocks).
    #[error("degenerate objective: no informative blocks")]
    DegenerateObjective,

    /// Optimizer failed to reach the gradient tolerance.
    #[error("optimizer did not converge within {iterations} iterations (|grad|_inf = {gradient_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("singular Hessian")]
    SingularHessian,

    #[error("moment Jacobian is rank deficient")]
    RankDeficientMoments,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid configuration: {0}")]
    Config(String),
}
