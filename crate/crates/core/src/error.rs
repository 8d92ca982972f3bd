use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input value is outside its physical or mathematical domain.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// The fringe slope used to convert fraction noise into phase noise is zero.
    #[error("degenerate fringe slope: cannot convert fraction variance to phase variance")]
    DegenerateSlope,

    /// A truncated Fock space is too small for the state it has to hold.
    #[error("Fock cutoff n_max = {n_max} is inadequate: population {population:.3e} at the cutoff level")]
    Cutoff { n_max: usize, population: f64 },

    /// Input data is empty or malformed.
    #[error("invalid data: {0}")]
    Data(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite, got {value}")))
    }
}

pub(crate) fn ensure_non_negative(name: &'static str, value: f64) -> Result<()> {
    ensure_finite(name, value)?;
    if value < 0.0 {
        return Err(Error::param(name, format!("must be >= 0, got {value}")));
    }
    Ok(())
}
