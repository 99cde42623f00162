use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Hilbert layout: {0}")]
    InvalidLayout(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("time {t:e} s outside [{start:e}, {end:e}] s")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },

    #[error("Bessel argument {0} outside the validated domain |x| <= 20")]
    BesselDomain(f64),

    #[error("Fock truncation breached: population {population:e} in the top two levels at t = {t:e} s")]
    FockTruncation { population: f64, t: f64 },

    #[error("step size underflow at t = {t:e} s (dt = {dt:e} s)")]
    StepUnderflow { t: f64, dt: f64 },

    #[error("model `{model}` does not support {reason}")]
    UnsupportedModel { model: &'static str, reason: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("{context}: {source}")]
    AtPoint {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// Attach a description of the sweep point that produced the error.
    pub fn at(self, context: impl Into<String>) -> Self {
        Error::AtPoint { context: context.into(), source: Box::new(self) }
    }

    /// Innermost error, skipping sweep-point context.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtPoint { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
