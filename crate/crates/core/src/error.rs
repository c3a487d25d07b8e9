use thiserror::Error;

use crate::prior::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("quadrature did not reach relative tolerance {target:e} (achieved {achieved:e} with {nodes} nodes)")]
    Quadrature {
        target: f64,
        achieved: f64,
        nodes: usize,
    },

    #[error("integrand still within {nats} nats of its maximum at the scan boundary {boundary}")]
    Truncation { nats: f64, boundary: f64 },

    #[error("prior assumption violated: {0}")]
    Assumption(Violation),

    #[error("posterior over tau underflowed (max log-weight {max_log_weight})")]
    PosteriorUnderflow { max_log_weight: f64 },

    #[error("negative oracle threshold c^2 = {c2} for p = {p}, psi2 = {psi2}")]
    NegativeThreshold { c2: f64, p: f64, psi2: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("configuration invalid:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("{path}:{line}: {message}")]
    Csv {
        path: String,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
