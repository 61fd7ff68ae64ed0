use thiserror::Error;

/// Errors raised by the simulation and statistics routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid chain state {0}: excursion steps require a state >= 2")]
    InvalidState(u64),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("population size reached the cap of {cap} types at time {time}")]
    PopulationCap { cap: usize, time: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Rejects NaN, infinities and values `<= 0`.
pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {value}")))
    }
}
