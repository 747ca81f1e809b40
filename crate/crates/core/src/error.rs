use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A value failed validation (non-finite, non-positive, wrong length, ...).
    InvalidInput(String),
    /// A state of charge or abscissa left the range where a curve or schedule is defined.
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
        /// Sample index within the profile, when the failure happened during a simulation.
        index: Option<usize>,
    },
    /// Least-squares system is rank deficient or numerically singular.
    Conditioning(String),
    /// Intervals overlap, have gaps or are in the wrong order.
    Structure(String),
    /// Rejection sampling ran out of attempts.
    Sampling { parameter: String, attempts: usize },
    /// Every Morris run for one (interval, parameter) cell was invalid.
    EmptyCell { interval: String, parameter: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn at_index(self, k: usize) -> Self {
        match self {
            Error::OutOfRange {
                what,
                value,
                lo,
                hi,
                index: None,
            } => Error::OutOfRange {
                what,
                value,
                lo,
                hi,
                index: Some(k),
            },
            other => other,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::OutOfRange {
                what,
                value,
                lo,
                hi,
                index,
            } => {
                write!(f, "{what} {value} outside [{lo}, {hi}]")?;
                if let Some(k) = index {
                    write!(f, " at sample {k}")?;
                }
                Ok(())
            }
            Error::Conditioning(msg) => write!(f, "ill-conditioned least-squares problem: {msg}"),
            Error::Structure(msg) => write!(f, "malformed interval structure: {msg}"),
            Error::Sampling {
                parameter,
                attempts,
            } => write!(
                f,
                "could not draw a positive value for {parameter} in {attempts} attempts; \
                 the standard deviation is too large relative to the mean, consider truncating it"
            ),
            Error::EmptyCell {
                interval,
                parameter,
            } => write!(
                f,
                "no valid Morris runs for parameter {parameter} in interval {interval}"
            ),
        }
    }
}

impl core::error::Error for Error {}
