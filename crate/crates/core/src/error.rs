use thiserror::Error;

/// Errors produced by the numerical kernels, solvers and parsers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DragonError {
    /// Argument outside the mathematical domain of a function (poles, divergent series).
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller-supplied data violates a documented precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// A numerical routine could not reach its accuracy target.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A time stepper produced a non-finite state.
    #[error("solve diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },

    /// The order set cannot be converted to a single-order chain.
    #[error("unsupported order {order}: {reason} (use the Grünwald-Letnikov backend instead)")]
    UnsupportedOrder { order: f64, reason: String },

    /// Random-walk configuration cannot be simulated as given.
    #[error("invalid walk configuration: {0}")]
    Config(String),

    /// Text input could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T, E = DragonError> = std::result::Result<T, E>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(DragonError::Input(msg.into()))
}
