//! Error type shared across the library.

use std::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug)]
pub enum Error {
    /// Invalid configuration or arguments violating a documented precondition
    /// (dimension mismatches, non-positive-definite weights, bad thresholds).
    Config(String),
    /// The requested quantity is undefined at the given point
    /// (e.g. a decay rate at the origin).
    Domain(String),
    /// A simulation produced a non-finite derivative or state; carries the
    /// offending state vector.
    Simulation { message: String, state: Vec<f64> },
    /// Training diverged or produced a non-finite loss; locates the epoch
    /// and batch where it happened.
    Training {
        message: String,
        epoch: usize,
        batch: usize,
    },
    /// The baseline solver failed (e.g. the Riccati iteration did not
    /// converge within its iteration budget).
    Baseline(String),
    /// An evaluation-level contract was violated (e.g. an iteration round
    /// produced a controller with too small a region of attraction).
    Eval(String),
    /// Filesystem failure, tagged with the path involved.
    Io {
        path: String,
        source: std::io::Error,
    },
    /// A persisted document (checkpoint, dataset, config) failed to parse;
    /// the message includes position diagnostics where available.
    Parse { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(path: &std::path::Path, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.display().to_string(),
            message: message.into(),
        }
    }

    /// True when the underlying cause is a missing file.
    pub fn is_not_found(&self) -> bool {
        matches!(self, Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "config: {msg}"),
            Error::Domain(msg) => write!(f, "domain: {msg}"),
            Error::Simulation { message, state } => {
                write!(f, "simulation: {message} at state {state:?}")
            }
            Error::Training {
                message,
                epoch,
                batch,
            } => write!(f, "training: {message} (epoch {epoch}, batch {batch})"),
            Error::Baseline(msg) => write!(f, "baseline: {msg}"),
            Error::Eval(msg) => write!(f, "eval: {msg}"),
            Error::Io { path, source } => write!(f, "io: {path}: {source}"),
            Error::Parse { path, message } => write!(f, "parse: {path}: {message}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
