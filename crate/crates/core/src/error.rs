use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("parameter out of range: {0}")]
    Domain(String),

    #[error("degenerate parameters: p + eta = 0")]
    DegenerateParameter,

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    Bracketing { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("protocol failure: {0}")]
    Protocol(String),
}

pub type Result<T> = std::result::Result<T, Error>;
