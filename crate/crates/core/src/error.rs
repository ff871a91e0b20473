use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("startup quadrature failed on [{lo:e}, {hi:e}]: {detail}")]
    Startup { lo: f64, hi: f64, detail: String },

    #[error("step size underflow at r = {r} (u = {u:e}, u' = {du:e})")]
    StepUnderflow { r: f64, u: f64, du: f64 },

    #[error("non-finite state at r = {r}: {detail}")]
    NonFinite { r: f64, detail: String },

    #[error("no bracket found: {0}")]
    NoBracket(String),

    #[error("classification flip-flop in [{lo}, {hi}] after {iterations} bisections; rescan with a finer grid")]
    FlipFlop { lo: f64, hi: f64, iterations: usize },

    #[error("tail reconstruction failed: {0}")]
    Tail(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
