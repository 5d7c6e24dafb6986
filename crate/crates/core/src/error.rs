use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown quantity symbol `{0}`")]
    UnknownSymbol(String),

    #[error("duplicate quantity symbol `{0}`")]
    DuplicateSymbol(String),

    #[error("repeating quantities do not span the dimensions of `{target}`")]
    SingularSystem { target: String },

    #[error("repeating set is invalid: {0}")]
    InvalidRepeating(String),

    #[error("invalid random effect: {0}")]
    InvalidEffect(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("root finding did not converge after {iterations} iterations ({context})")]
    ConvergenceFailure {
        iterations: usize,
        context: String,
    },

    #[error("step size control failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("no start with finite likelihood after {attempts} attempts")]
    InitializationFailure { attempts: usize },

    #[error("simulation budget exhausted: {accepted} of {requested} failing draws after {attempts} attempts")]
    BudgetExhausted {
        requested: usize,
        accepted: usize,
        attempts: usize,
    },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("{path}: row {row} (line {line}): {message}")]
    Validation {
        path: String,
        row: usize,
        line: u64,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnknownSymbol(_) => "unknown_symbol",
            Error::DuplicateSymbol(_) => "duplicate_symbol",
            Error::SingularSystem { .. } => "singular_system",
            Error::InvalidRepeating(_) => "invalid_repeating",
            Error::InvalidEffect(_) => "invalid_effect",
            Error::Domain(_) => "domain_error",
            Error::InvalidInput(_) => "invalid_input",
            Error::ConvergenceFailure { .. } => "convergence_failure",
            Error::StepFailure { .. } => "step_failure",
            Error::InitializationFailure { .. } => "initialization_failure",
            Error::BudgetExhausted { .. } => "budget_exhausted",
            Error::Parse { .. } => "parse_error",
            Error::Validation { .. } => "validation_error",
            Error::Config(_) => "config_error",
            Error::Io { .. } => "io_error",
            Error::Csv(_) => "csv_error",
            Error::Json(_) => "json_error",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
