use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate impedance: {0}")]
    DegenerateImpedance(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("no convergence after {iterations} iterations: {context}")]
    NoConvergence { iterations: usize, context: String },

    /// The polarized loop denominator vanished; the chosen polarizing
    /// current carries no usable reactive information.
    #[error("singular loop: |denominator| = {0:e}")]
    SingularLoop(f64),

    #[error("unsupported: {0}")]
    UnsupportedType(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unit mismatch: {0}")]
    Unit(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
