use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// Errors are grouped by the exit-code class the CLI maps them to; see
/// [`Error::exit_code`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value {value} at abscissa {at}")]
    NonFinite { at: f64, value: f64 },

    #[error("integral appears divergent: tails still above tolerance at half-width {halfwidth}")]
    Divergent { halfwidth: f64 },

    #[error("exponent overflow at abscissa {at}")]
    Overflow { at: f64 },

    #[error("target {target} not bracketed: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    Bracket { target: f64, f_lo: f64, f_hi: f64 },

    #[error("tail evaluation failed at {at}: {reason}")]
    Tail { at: f64, reason: String },

    #[error("simulation exploded at step {step} (state {state})")]
    Explosion { step: usize, state: f64 },

    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(vec![msg.into()])
    }

    pub fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }

    /// Process exit code for the CLI: 2 validation, 3 numerical divergence,
    /// 4 simulation explosion, 1 anything else (i/o).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Precondition(_) | Error::Parse(_) | Error::Bracket { .. } => 2,
            Error::NonFinite { .. } | Error::Divergent { .. } | Error::Overflow { .. } | Error::Tail { .. } => 3,
            Error::Explosion { .. } => 4,
            Error::Io { .. } => 1,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}
