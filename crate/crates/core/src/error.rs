use thiserror::Error;

use crate::market::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("undefined ratio: good {good} has nonpositive price {price}")]
    UndefinedRatio { good: usize, price: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid market: {}", format_violations(.0))]
    InvalidMarket(Vec<Violation>),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("convex solver did not converge after {iterations} iterations (duality gap {gap:e})")]
    NotConverged {
        iterations: usize,
        gap: f64,
        last_prices: Vec<f64>,
    },

    #[error("solver disagreement: max price gap {max_gap:e} exceeds {bound:e} (convex {convex:?}, descent {descent:?})")]
    Disagreement {
        max_gap: f64,
        bound: f64,
        convex: Vec<f64>,
        descent: Vec<f64>,
    },

    #[error("clearing price could not be certified: {0}")]
    Uncertified(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no feasible point in the scanned window; widen bounds")]
    NoFeasiblePoint,

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("out of scope: {0}")]
    OutOfScope(String),

    #[error("challenger outcome {index} is not feasible")]
    InfeasibleChallenger { index: usize },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
