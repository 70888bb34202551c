use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("argument out of supported range: {0}")]
    Range(String),

    #[error("result overflows double precision: {0}")]
    Overflow(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("window error: {0}")]
    Window(String),

    #[error("edge leak {fraction:.3e} exceeds threshold {threshold:.1e} at t = {t}")]
    Leak { t: f64, fraction: f64, threshold: f64 },

    #[error("no convergence after {iterations} iterations: {what}")]
    NoConvergence { what: String, iterations: usize },

    #[error("state has zero norm")]
    ZeroState,

    #[error("degenerate profile: {0}")]
    Degenerate(String),

    #[error("insufficient samples: need {need}, got {got}")]
    InsufficientSamples { need: usize, got: usize },

    #[error("no local maximum on the requested side of the profile")]
    NoMaximum,
}

impl Error {
    /// True for failures of the numerics themselves, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Overflow(_)
                | Error::Leak { .. }
                | Error::NoConvergence { .. }
                | Error::ZeroState
                | Error::Degenerate(_)
                | Error::NoMaximum
        )
    }
}
