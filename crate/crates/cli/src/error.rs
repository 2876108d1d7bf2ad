//! Failure handling: every error maps to one stderr line with a stable
//! class tag and a process exit code, so scripts can branch on failures
//! without scraping prose.

use std::fmt;
use std::path::PathBuf;

use lyapctl_core::Error as CoreError;

pub type Result<T> = std::result::Result<T, CliError>;

/// Everything a command can fail with.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration; the message begins with the offending
    /// field path ("train.lr: must be positive").
    Config(String),
    /// A file the command needs does not exist.
    Missing { path: PathBuf, hint: &'static str },
    /// Failure reported by the library.
    Core(CoreError),
}

impl CliError {
    /// Stable machine-readable class printed inside `error[...]`.
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Missing { .. } => "missing-file",
            CliError::Core(e) => {
                if e.is_not_found() {
                    return "missing-file";
                }
                match e {
                    CoreError::Config(_) => "config",
                    CoreError::Domain(_) => "domain",
                    CoreError::Simulation { .. } => "simulation",
                    CoreError::Training { .. } => "training",
                    CoreError::Baseline(_) => "baseline",
                    CoreError::Eval(_) => "eval",
                    CoreError::Io { .. } => "io",
                    CoreError::Parse { .. } => "parse",
                }
            }
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.class() {
            "config" => 2,
            "missing-file" => 3,
            _ => 1,
        }
    }

    pub fn missing(path: PathBuf, hint: &'static str) -> Self {
        CliError::Missing { path, hint }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "error[config]: {msg}"),
            CliError::Missing { path, hint } => {
                if hint.is_empty() {
                    write!(f, "error[missing-file]: {}", path.display())
                } else {
                    write!(f, "error[missing-file]: {} ({hint})", path.display())
                }
            }
            CliError::Core(e) => write!(f, "error[{}]: {}", self.class(), e),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

/// Wraps a filesystem error with the path it happened on, promoting
/// missing files to their dedicated class.
pub fn io_err(path: &std::path::Path, source: std::io::Error) -> CliError {
    if source.kind() == std::io::ErrorKind::NotFound {
        CliError::Missing { path: path.to_path_buf(), hint: "" }
    } else {
        CliError::Core(CoreError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_class() {
        let cfg = CliError::Config("train.lr: must be positive".to_string());
        assert_eq!(cfg.class(), "config");
        assert_eq!(cfg.exit_code(), 2);

        let missing = CliError::missing(PathBuf::from("out/pi.json"), "run train first");
        assert_eq!(missing.class(), "missing-file");
        assert_eq!(missing.exit_code(), 3);

        let sim = CliError::Core(CoreError::Simulation {
            message: "non-finite state".to_string(),
            state: vec![f64::NAN],
        });
        assert_eq!(sim.class(), "simulation");
        assert_eq!(sim.exit_code(), 1);

        let nf = io_err(
            std::path::Path::new("gone.csv"),
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        );
        assert_eq!(nf.exit_code(), 3);
    }

    #[test]
    fn core_not_found_is_promoted_to_missing_file() {
        let e = CliError::Core(CoreError::Io {
            path: "x.json".to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "gone"),
        });
        assert_eq!(e.class(), "missing-file");
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn messages_are_single_lines() {
        let samples = [
            CliError::Config("schema: expected \"lyapctl-config-v1\"".to_string()),
            CliError::missing(PathBuf::from("out/roa_summary.json"), "run roa first"),
            CliError::Core(CoreError::Baseline("riccati iteration diverged".to_string())),
        ];
        for e in &samples {
            let line = e.to_string();
            assert!(!line.contains('\n'), "multi-line error: {line:?}");
            assert!(line.starts_with("error["), "missing class tag: {line:?}");
        }
    }
}
