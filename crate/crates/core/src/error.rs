use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("unknown mode label `{0}`")]
    UnknownMode(String),

    #[error("excitation block N={0} is empty")]
    EmptyBlock(usize),

    #[error("integrator failed at t={t}: {reason}")]
    Integrator { t: f64, reason: String },

    #[error("{what} did not converge: {reason}")]
    NonConvergence { what: String, reason: String },

    #[error("near-singular denominator {value:e} at k1={k1}, k2={k2}")]
    NearSingular { k1: f64, k2: f64, value: f64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("window clipping: {0}")]
    WindowClipping(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("zero-norm {0}")]
    ZeroNorm(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Integrator { .. }
                | Error::NonConvergence { .. }
                | Error::NearSingular { .. }
                | Error::WindowClipping(_)
                | Error::ZeroNorm(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
