use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown model `{name}`; valid names: {valid}")]
    UnknownModel { name: String, valid: String },

    #[error("unknown compartment `{0}`")]
    UnknownCompartment(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("integration failed after {steps} steps; last good time {last_t}")]
    IntegrationFailure { steps: usize, last_t: f64 },

    #[error("solution blew up at t = {t}")]
    BlowUp { t: f64 },

    #[error("invalid time grid: {0}")]
    Grid(String),

    #[error("ingestion error at line {line}: {msg}")]
    Ingestion { line: usize, msg: String },

    #[error("dates are not strictly increasing at line {line}")]
    Ordering { line: usize },

    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Divergence { iteration: usize, loss: f64 },

    #[error("objective is not finite at the starting point")]
    BadStart,

    #[error("least-squares stalled at maximum damping; best sse {best_sse}")]
    Stall { best_x: Vec<f64>, best_sse: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
