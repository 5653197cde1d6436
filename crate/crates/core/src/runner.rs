//! File-level driver: run a scenario into an output directory, and compare
//! two logs for replay.

use std::fs;
use std::io;
use std::path::Path;

use crate::scenario::{LoadError, ScenarioConfig};
use crate::simnet::{run, RunReport, SimError};

pub const LOG_FILE: &str = "run.log";
pub const REPORT_FILE: &str = "report";
pub const RESOLVER_FILE: &str = "resolver.dump";

/// Process exit status for a finished run.
pub const EXIT_OK: i32 = 0;
/// An audit was violated or the scenario raised a runtime error.
pub const EXIT_VIOLATION: i32 = 1;
/// The scenario did not parse or validate.
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Invalid(#[from] SimError),
    #[error("cannot write output: {0}")]
    Io(#[from] io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Load(LoadError::Io(_)) | RunError::Io(_) => EXIT_VIOLATION,
            RunError::Load(_) | RunError::Invalid(_) => EXIT_INVALID,
        }
    }
}

pub struct Execution {
    pub report: RunReport,
    pub exit_code: i32,
}

/// Runs `cfg` with `seed` (the scenario's own seed when `None`) and writes
/// the log, report and resolver dump into `out`.
pub fn execute(cfg: &ScenarioConfig, seed: Option<u64>, out: &Path) -> Result<Execution, RunError> {
    let r = run(cfg, seed.unwrap_or(cfg.seed))?;
    fs::create_dir_all(out)?;
    fs::write(out.join(LOG_FILE), &r.log)?;
    fs::write(out.join(REPORT_FILE), r.report.to_json())?;
    fs::write(out.join(RESOLVER_FILE), &r.resolver_dump)?;
    let exit_code = if r.report.passed() { EXIT_OK } else { EXIT_VIOLATION };
    Ok(Execution { report: r.report, exit_code })
}

/// Loads a scenario file and executes it.
pub fn execute_file(path: &Path, seed: Option<u64>, out: &Path) -> Result<Execution, RunError> {
    execute(&ScenarioConfig::load(path)?, seed, out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LogDiff {
    Identical,
    /// First differing line, 1-based.
    Divergent { line: usize, a: String, b: String },
    /// One log is a strict prefix of the other; `line` is the first line
    /// present in only one of them.
    MissingTail { line: usize },
}

pub fn replay_diff(a: &str, b: &str) -> LogDiff {
    let (mut la, mut lb) = (a.lines(), b.lines());
    let mut line = 1;
    loop {
        match (la.next(), lb.next()) {
            (None, None) => return LogDiff::Identical,
            (Some(x), Some(y)) if x == y => line += 1,
            (Some(x), Some(y)) => return LogDiff::Divergent { line, a: x.to_owned(), b: y.to_owned() },
            _ => return LogDiff::MissingTail { line },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diff_cases() {
        assert_eq!(replay_diff("a\nb\n", "a\nb\n"), LogDiff::Identical);
        assert_eq!(replay_diff("a\nb\n", "a\nc\n"), LogDiff::Divergent { line: 2, a: "b".into(), b: "c".into() });
        assert_eq!(replay_diff("a\n", "a\nb\n"), LogDiff::MissingTail { line: 2 });
    }
}
