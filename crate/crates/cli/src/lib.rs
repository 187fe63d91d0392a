//! Batch front end: expands JSON configs into runs, verifier sweeps and
//! round-count tables, and writes their CSV/JSON artifacts.

pub mod commands;
pub mod config;

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILED: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] unified_prox::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use unified_prox::Error as E;
        match self {
            CliError::Io(_) | CliError::Config(_) => EXIT_USAGE,
            CliError::Core(e) => match e {
                E::Diverged { .. } => EXIT_DIVERGED,
                E::Preset { .. } | E::InvalidTriple(_) | E::SingleAgent | E::ChebyshevUndefined => EXIT_FAILED,
                _ => EXIT_USAGE,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        use unified_prox::Error as E;
        match self {
            CliError::Io(_) => "io",
            CliError::Config(_) => "config",
            CliError::Core(e) => match e {
                E::Diverged { .. } => "diverged",
                E::Preset { .. } | E::InvalidTriple(_) | E::SingleAgent | E::ChebyshevUndefined => "assumption_violation",
                E::Io(_) => "io",
                _ => "invalid_input",
            },
        }
    }
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    /// Why the check failed, when it did.
    pub reason: Option<String>,
}

impl Outcome {
    fn passed() -> Self {
        Outcome { pass: true, reason: None }
    }

    fn failed(reason: impl Into<String>) -> Self {
        Outcome { pass: false, reason: Some(reason.into()) }
    }
}

#[derive(Serialize)]
struct Reason<'a> {
    exit: i32,
    kind: &'a str,
    reason: &'a str,
}

/// Single-line JSON diagnostic for stderr.
pub fn reason_line(exit: i32, kind: &str, reason: &str) -> String {
    serde_json::to_string(&Reason { exit, kind, reason }).expect("plain strings serialize")
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(CliError::Io("x".into()).exit_code(), EXIT_USAGE);
        let diverged = unified_prox::Error::Diverged { iter: 3, iterate: "z", value: f64::NAN };
        assert_eq!(CliError::from(diverged).exit_code(), EXIT_DIVERGED);
        let broken = unified_prox::Error::InvalidTriple("ATotalMass".into());
        assert_eq!(CliError::from(broken).exit_code(), EXIT_FAILED);
        assert_eq!(CliError::from(unified_prox::Error::Parse("bad".into())).exit_code(), EXIT_USAGE);
    }

    #[test]
    fn reason_is_one_json_line() {
        let line = reason_line(2, "assumption_violation", "line one\nline two");
        assert!(!line.contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["exit"], 2);
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.csv");
        write_atomic(&path, b"a").unwrap();
        write_atomic(&path, b"b").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "b");
        assert_eq!(std::fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
