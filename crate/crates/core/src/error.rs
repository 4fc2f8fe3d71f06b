use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty window: {0}")]
    EmptyWindow(&'static str),

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("training diverged for window t = {t}: {source}")]
    WindowDiverged {
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("series too short: {len} rows, need at least {required}")]
    SeriesTooShort { len: usize, required: usize },

    #[error("empty curve")]
    EmptyCurve,

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("integration failed at step {step}: non-finite state")]
    Integration { step: usize },

    #[error("generator failed: {0}")]
    Generator(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used by the CLI on failure.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Shape(_) => "shape",
            Error::EmptyWindow(_) => "empty_window",
            Error::TrainingDiverged { .. } | Error::WindowDiverged { .. } => "diverged",
            Error::SeriesTooShort { .. } => "series_too_short",
            Error::EmptyCurve => "empty_curve",
            Error::UndefinedMetric(_) => "undefined_metric",
            Error::Integration { .. } => "integration",
            Error::Generator(_) => "generator",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
