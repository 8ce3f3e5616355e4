use thiserror::Error;

/// One row of the ε-table produced by the regularization limit.
pub type EpsRow = (f64, f64);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("time {time} is not aligned with a grid of step {step}")]
    OffGrid { time: f64, step: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    /// Non-degeneracy assumption on Σ_t violated.
    #[error("singular Gram matrix at t = {t}: det = {det:e}")]
    SingularGram { t: f64, det: f64 },

    #[error("degenerate Gaussian (σ = 0) with a discontinuous payoff at t = {t}")]
    Degenerate { t: f64 },

    #[error("ε-sequence failed the Cauchy test")]
    NonConvergent { table: Vec<EpsRow> },

    #[error("SDE integration diverged at step {step} (state {state})")]
    IntegrationDiverged { step: usize, state: f64 },

    #[error("polynomial growth gate violated on path {path}: |H| = {value:e} > bound {bound:e}")]
    GrowthViolation { path: usize, value: f64, bound: f64 },

    #[error("internal numerical error: {0}")]
    Internal(String),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
