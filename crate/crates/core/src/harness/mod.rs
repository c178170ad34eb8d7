//! Phase III: build and run one generated test, keeping the raw tool log
//! and a JSONL summary next to each other.

mod reports;
mod run;

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{detect_descriptor, BuildSystem};

pub use reports::summarize_reports;
pub use run::{run_test, HarnessOptions, Toolchain, ToolchainConfig, DEFAULT_BUILD_TIMEOUT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildOutcome {
    Compiled,
    CompileFailed,
    ToolFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestOutcome {
    Passed,
    Failed,
    Errored,
    Skipped,
    NotRun,
    CommandFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Error,
    Skipped,
    CommandFailure,
}

/// One line of the machine-readable summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    #[serde(rename = "class")]
    pub test_class: String,
    #[serde(rename = "method")]
    pub test_method: String,
    pub status: Status,
    pub first_failure_line: Option<String>,
    pub exception_type: Option<String>,
    pub duration_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub pair_id: String,
    pub task_id: String,
    pub build_outcome: BuildOutcome,
    pub test_outcome: TestOutcome,
    /// Relative to the pair workspace.
    pub raw_log_path: String,
    pub summary_path: String,
    /// Exit status of the last command run; -1 when none finished.
    pub exit_code: i32,
}

/// Build system of an app directory, judged by its descriptor files.
pub fn detect_build(app_root: &Path) -> BuildSystem {
    detect_descriptor(app_root)
}

/// Summary for builds without XML reports.
pub fn exit_code_summary(exit_code: i32, test_class: &str, test_method: &str) -> SummaryEntry {
    let (status, line) = if exit_code == 0 {
        (Status::Pass, None)
    } else {
        (Status::CommandFailure, Some(format!("CommandFailure: test command exited with status {exit_code}")))
    };
    SummaryEntry {
        test_class: test_class.to_string(),
        test_method: test_method.to_string(),
        status,
        first_failure_line: line,
        exception_type: None,
        duration_s: None,
    }
}

pub fn to_jsonl(entries: &[SummaryEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("summary entries serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str) -> io::Result<Vec<SummaryEntry>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)))
        .collect()
}

/// Overall outcome of a compiled run.
pub fn outcome_of(entries: &[SummaryEntry]) -> TestOutcome {
    let any = |s: Status| entries.iter().any(|e| e.status == s);
    if entries.is_empty() {
        TestOutcome::CommandFailure
    } else if any(Status::Fail) {
        TestOutcome::Failed
    } else if any(Status::Error) {
        TestOutcome::Errored
    } else if any(Status::CommandFailure) {
        TestOutcome::CommandFailure
    } else if entries.iter().all(|e| e.status == Status::Skipped) {
        TestOutcome::Skipped
    } else {
        TestOutcome::Passed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;
    use tempfile::TempDir;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code_summary(0, "A", "m").status, Status::Pass);
        assert_eq!(exit_code_summary(1, "A", "m").status, Status::CommandFailure);
        let e = exit_code_summary(137, "A", "m");
        assert_eq!(e.status, Status::CommandFailure);
        assert!(e.first_failure_line.unwrap().contains("137"));
    }

    #[test]
    fn jsonl_emits_nulls_and_round_trips() {
        let e = exit_code_summary(0, "p.A", "m");
        let text = to_jsonl(std::slice::from_ref(&e));
        assert_eq!(
            text,
            "{\"class\":\"p.A\",\"method\":\"m\",\"status\":\"pass\",\"first_failure_line\":null,\"exception_type\":null,\"duration_s\":null}\n"
        );
        assert_eq!(parse_jsonl(&text).unwrap(), vec![e]);
    }

    #[test]
    fn detects_build_files() {
        let dir = TempDir::new().unwrap();
        assert_eq!(detect_build(dir.path()), BuildSystem::Plain);
        fs::write(dir.path().join("build.gradle.kts"), "").unwrap();
        assert_eq!(detect_build(dir.path()), BuildSystem::Gradle);
        fs::write(dir.path().join("pom.xml"), "").unwrap();
        assert_eq!(detect_build(dir.path()), BuildSystem::Maven);
    }

    #[test]
    fn outcome_precedence() {
        let mk = |s| SummaryEntry {
            status: s,
            ..exit_code_summary(0, "A", "m")
        };
        assert_eq!(outcome_of(&[mk(Status::Pass), mk(Status::Fail)]), TestOutcome::Failed);
        assert_eq!(outcome_of(&[mk(Status::Skipped)]), TestOutcome::Skipped);
        assert_eq!(outcome_of(&[mk(Status::Skipped), mk(Status::Pass)]), TestOutcome::Passed);
        assert_eq!(outcome_of(&[mk(Status::Error)]), TestOutcome::Errored);
        assert_eq!(outcome_of(&[]), TestOutcome::CommandFailure);
    }
}
