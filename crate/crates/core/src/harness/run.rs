use std::fs::{self, File};
use std::io::{self, Write};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use tracing::{debug, info};
use walkdir::WalkDir;

use super::{
    exit_code_summary, outcome_of, summarize_reports, to_jsonl, BuildOutcome, ExecutionRecord, Status, SummaryEntry,
    TestOutcome,
};
use crate::corpus::{BuildSystem, ProgramPair};
use crate::process::{self, display_argv, Exit};
use crate::testgen::TestFile;
use crate::workspace::{rel_string, write_json, PairWorkspace, COPY_EXCLUDES};

pub const DEFAULT_BUILD_TIMEOUT: Duration = Duration::from_secs(10 * 60);

/// How to build and run one test with one build system. Each step is an
/// argv template run in the working copy; a step exiting nonzero ends
/// the run.
///
/// Placeholders: `{class}` (qualified), `{simple_class}`, `{method}`,
/// `{test_file}`, `{mvn}`, `{gradle}`, `{classpath}`, `{junit_console}`,
/// and `{sources}`, which must stand alone and expands to every Java
/// source file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Toolchain {
    pub steps: Vec<Vec<String>>,
    /// Where XML reports land, relative to the app root.
    #[serde(default)]
    pub report_dirs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToolchainConfig {
    pub maven: Toolchain,
    pub gradle: Toolchain,
    pub plain: Toolchain,
}

fn argv(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

impl Default for ToolchainConfig {
    fn default() -> Self {
        Self {
            maven: Toolchain {
                steps: vec![argv(&[
                    "{mvn}",
                    "-B",
                    "test",
                    "-Dtest={class}#{method}",
                    "-DfailIfNoTests=false",
                    "-Dsurefire.failIfNoSpecifiedTests=false",
                ])],
                report_dirs: vec!["target/surefire-reports".into()],
            },
            gradle: Toolchain {
                steps: vec![argv(&["{gradle}", "test", "--tests", "{class}.{method}"])],
                report_dirs: vec!["build/test-results/test".into()],
            },
            plain: Toolchain {
                steps: vec![
                    argv(&["javac", "-d", "target/pov-classes", "-cp", "{classpath}", "{sources}"]),
                    argv(&[
                        "java",
                        "-jar",
                        "{junit_console}",
                        "--class-path",
                        "target/pov-classes:{classpath}",
                        "--select-method",
                        "{class}#{method}",
                    ]),
                ],
                report_dirs: vec![],
            },
        }
    }
}

impl ToolchainConfig {
    pub fn for_system(&self, build: BuildSystem) -> &Toolchain {
        match build {
            BuildSystem::Maven => &self.maven,
            BuildSystem::Gradle => &self.gradle,
            BuildSystem::Plain => &self.plain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarnessOptions {
    pub timeout: Duration,
    pub toolchains: ToolchainConfig,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        Self {
            timeout: DEFAULT_BUILD_TIMEOUT,
            toolchains: ToolchainConfig::default(),
        }
    }
}

fn sorted_files(root: &Path, sub: &str, ext: &str) -> Vec<String> {
    let base = root.join(sub);
    let walker = WalkDir::new(&base).sort_by_file_name().into_iter().filter_entry(|e| {
        e.depth() == 0 || !(e.file_type().is_dir() && COPY_EXCLUDES.contains(&e.file_name().to_string_lossy().as_ref()))
    });
    walker
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == ext))
        .map(|e| rel_string(e.path().strip_prefix(root).expect("under root")))
        .collect()
}

fn expand(step: &[String], work: &Path, test: &TestFile) -> Vec<String> {
    let jars = sorted_files(work, "lib", "jar");
    let classpath = if jars.is_empty() { ".".to_string() } else { jars.join(":") };
    let console = jars
        .iter()
        .find(|j| j.rsplit('/').next().is_some_and(|n| n.starts_with("junit-platform-console-standalone")))
        .cloned()
        .unwrap_or_else(|| "junit-platform-console-standalone.jar".into());
    let mvn = if work.join("mvnw").is_file() { "./mvnw" } else { "mvn" };
    let gradle = if work.join("gradlew").is_file() { "./gradlew" } else { "gradle" };
    let mut out = Vec::new();
    for arg in step {
        if arg == "{sources}" {
            out.extend(sorted_files(work, "", "java"));
            continue;
        }
        out.push(
            arg.replace("{class}", &test.qualified_class())
                .replace("{simple_class}", &test.class_name)
                .replace("{method}", &test.method_name)
                .replace("{test_file}", &test.rel_path)
                .replace("{mvn}", mvn)
                .replace("{gradle}", gradle)
                .replace("{classpath}", &classpath)
                .replace("{junit_console}", &console),
        );
    }
    out
}

fn compile_error_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(concat!(
            r"(?m)^(?:\S.*\.java:\d+: error: .*",
            r"|\[ERROR\] .*\.java:\[\d+,\d+\].*",
            r"|\[ERROR\] COMPILATION ERROR.*",
            r"|> Task :\w*[cC]ompile\w*Java FAILED",
            r"|.*Compilation failed; see the compiler error output.*)$"
        ))
        .expect("valid regex")
    })
}

/// First compiler diagnostic in a build log, if any.
pub(crate) fn first_compile_error(log: &str) -> Option<String> {
    compile_error_re().find(log).map(|m| m.as_str().trim().to_string())
}

fn failure_entry(test: &TestFile, line: String) -> SummaryEntry {
    SummaryEntry {
        test_class: test.qualified_class(),
        test_method: test.method_name.clone(),
        status: Status::CommandFailure,
        first_failure_line: Some(line),
        exception_type: None,
        duration_s: None,
    }
}

/// Build and run `test` inside `worktree` and write
/// `logs/<task>.{txt,summary.jsonl,record.json}`.
pub fn run_test(
    pair: &ProgramPair,
    test: &TestFile,
    worktree: &Path,
    pws: &PairWorkspace,
    task_id: &str,
    opts: &HarnessOptions,
) -> io::Result<ExecutionRecord> {
    let toolchain = opts.toolchains.for_system(pair.build_system);
    let report_dirs: Vec<String> =
        if pair.report_dirs.is_empty() { toolchain.report_dirs.clone() } else { pair.report_dirs.clone() };
    for d in &report_dirs {
        let p = worktree.join(d);
        if p.exists() {
            fs::remove_dir_all(&p)?;
        }
    }

    fs::create_dir_all(pws.logs())?;
    let log_path = pws.logs().join(format!("{task_id}.txt"));
    let summary_path = pws.logs().join(format!("{task_id}.summary.jsonl"));
    let mut log = File::create(&log_path)?;

    let mut exit_code = -1;
    let mut tool_failure: Option<String> = None;
    for step in &toolchain.steps {
        if step.is_empty() {
            continue;
        }
        let argv = expand(step, worktree, test);
        writeln!(log, "$ {}", display_argv(&argv))?;
        debug!(task = task_id, argv = %display_argv(&argv), "build step");
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..]).current_dir(worktree);
        match process::run_logged(&mut cmd, &mut log, None, opts.timeout) {
            Err(e) => {
                let msg = format!("cannot run `{}`: {e}", argv[0]);
                writeln!(log, "{msg}")?;
                tool_failure = Some(msg);
                break;
            }
            Ok(Exit::TimedOut) => {
                let msg = format!("build step timed out after {}s", opts.timeout.as_secs());
                writeln!(log, "{msg}")?;
                tool_failure = Some(msg);
                break;
            }
            Ok(Exit::Signal) => {
                let msg = "build step killed by a signal".to_string();
                writeln!(log, "{msg}")?;
                tool_failure = Some(msg);
                break;
            }
            Ok(Exit::Code(c)) => {
                exit_code = c;
                if c != 0 {
                    break;
                }
            }
        }
    }
    drop(log);
    let log_text = String::from_utf8_lossy(&fs::read(&log_path)?).into_owned();

    let reports: Vec<SummaryEntry> = report_dirs
        .iter()
        .flat_map(|d| summarize_reports(&worktree.join(d), &test.qualified_class(), Some(&test.method_name)))
        .collect();

    let (build_outcome, test_outcome, entries) = if let Some(msg) = tool_failure {
        (BuildOutcome::ToolFailure, TestOutcome::NotRun, vec![failure_entry(test, msg)])
    } else if let Some(line) = first_compile_error(&log_text) {
        (BuildOutcome::CompileFailed, TestOutcome::NotRun, vec![failure_entry(test, line)])
    } else if !reports.is_empty() {
        (BuildOutcome::Compiled, outcome_of(&reports), reports)
    } else if pair.build_system == BuildSystem::Plain || exit_code == 0 {
        let e = exit_code_summary(exit_code, &test.qualified_class(), &test.method_name);
        (BuildOutcome::Compiled, outcome_of(std::slice::from_ref(&e)), vec![e])
    } else {
        let msg = format!("CommandFailure: build exited with status {exit_code} and wrote no test report");
        (BuildOutcome::ToolFailure, TestOutcome::NotRun, vec![failure_entry(test, msg)])
    };
    fs::write(&summary_path, to_jsonl(&entries))?;

    let record = ExecutionRecord {
        pair_id: pair.pair_id.clone(),
        task_id: task_id.to_string(),
        build_outcome,
        test_outcome,
        raw_log_path: pws.relative(&log_path),
        summary_path: pws.relative(&summary_path),
        exit_code,
    };
    write_json(&pws.logs().join(format!("{task_id}.record.json")), &record)?;
    info!(task = task_id, build = ?record.build_outcome, test = ?record.test_outcome, "execution done");
    Ok(record)
}
