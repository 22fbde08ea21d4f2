use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates a type invariant. `field` is the dotted path.
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("invalid input: {0}")]
    Input(String),

    /// No lattice configuration satisfies the requested inequalities.
    #[error("lattice synthesis infeasible: {0}")]
    Synthesis(String),

    /// The plant state left the finite floats.
    #[error("numeric escape at step {step}: state became {value}")]
    NumericEscape { step: u64, value: f64 },

    #[error("encoder and decoder bin indices disagree at step {step}: {encoder} vs {decoder}")]
    FeedbackMismatch { step: u64, encoder: i64, decoder: i64 },

    #[error("chain is reducible; communicating classes: {classes:?}")]
    Reducible { classes: Vec<Vec<usize>> },

    #[error("target set is unreachable from states {states:?}")]
    Unreachable { states: Vec<usize> },

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by the inputs themselves (bad values, a chain
    /// the requested analysis does not apply to, an oversized enumeration)
    /// rather than a failed computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::Input(_)
                | Error::Io(_)
                | Error::Reducible { .. }
                | Error::Unreachable { .. }
                | Error::EnumerationTooLarge(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
