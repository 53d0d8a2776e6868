//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Parameter validation failure; names the violated condition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-oscillatory regime: {0}")]
    NonOscillatoryRegime(String),

    #[error("time {t} outside [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("event stall: {count} near-coincident events before t = {t}")]
    EventStall { count: u64, t: f64 },

    #[error("infinite resetting: pulse onset {delta} sits on the unstable rapid cycle")]
    InfiniteResetting { delta: f64 },

    #[error("amplitude {a} below threshold a1 = {a1}")]
    BelowThreshold { a: f64, a1: f64 },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("no return to the limit cycle within {horizon} time units")]
    NoReturn { horizon: f64 },
}

impl Error {
    /// True for errors caused by caller input rather than internal failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::NonOscillatoryRegime(_)
                | Error::OutOfRange { .. }
                | Error::BelowThreshold { .. }
                | Error::Undefined(_)
                | Error::Infeasible(_)
                | Error::InfiniteResetting { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}

pub(crate) fn positive_finite(name: &str, v: f64) -> Result<()> {
    require(v.is_finite() && v > 0.0, || format!("{name} must be finite and > 0 (got {v})"))
}
