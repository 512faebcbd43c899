//! Filler-particle prediction models and surprisal GAMs.

pub mod concordance;
pub mod dataset;
pub mod gam;
pub mod logistic;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("column '{column}' is constant; z-score undefined")]
    ConstantColumn { column: String },
    #[error("complete separation on predictor '{predictor}'")]
    Separation { predictor: String },
    #[error("fit did not converge after {iterations} iterations (objective trace: {trace:?})")]
    NonConvergence { iterations: usize, trace: Vec<f64> },
    #[error("outcome has a single class ({n} observations)")]
    SingleClass { n: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("fits are on different observations ({a} vs {b})")]
    MismatchedObservations { a: usize, b: usize },
    #[error("need at least {min} points, got {n}")]
    TooFewPoints { n: usize, min: usize },
    #[error("degenerate x range [{min}, {max}]")]
    DegenerateRange { min: f64, max: f64 },
    #[error("non-finite value in {what}")]
    NonFinite { what: String },
    #[error("singular system in {what}")]
    Singular { what: String },
    #[error("no observations for {0}")]
    Empty(String),
}

pub type Result<T> = std::result::Result<T, StatsError>;
