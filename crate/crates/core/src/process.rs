//! Child processes with combined output captured to a file and a
//! wall-clock limit.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::process::{Child, Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Code(i32),
    /// Killed by a signal (no exit code).
    Signal,
    TimedOut,
}

impl Exit {
    pub fn code(self) -> Option<i32> {
        match self {
            Exit::Code(c) => Some(c),
            _ => None,
        }
    }

    pub fn success(self) -> bool {
        self == Exit::Code(0)
    }
}

const POLL: Duration = Duration::from_millis(20);

fn wait_with_deadline(child: &mut Child, timeout: Duration) -> io::Result<Option<ExitStatus>> {
    let start = Instant::now();
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok(Some(status));
        }
        if start.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Ok(None);
        }
        thread::sleep(POLL.min(timeout.saturating_sub(start.elapsed())).max(Duration::from_millis(1)));
    }
}

fn to_exit(status: Option<ExitStatus>) -> Exit {
    match status {
        None => Exit::TimedOut,
        Some(s) => s.code().map_or(Exit::Signal, Exit::Code),
    }
}

/// Run `cmd` with stdout and stderr appended to `log`. Spawn failures
/// are returned as errors; timeouts kill the child.
pub fn run_logged(cmd: &mut Command, log: &mut File, stdin: Option<&str>, timeout: Duration) -> io::Result<Exit> {
    log.flush()?;
    cmd.stdout(Stdio::from(log.try_clone()?))
        .stderr(Stdio::from(log.try_clone()?))
        .stdin(if stdin.is_some() { Stdio::piped() } else { Stdio::null() });
    let mut child = cmd.spawn()?;
    feed_stdin(&mut child, stdin);
    let status = wait_with_deadline(&mut child, timeout)?;
    Ok(to_exit(status))
}

/// Run `cmd` with stdout to `out_path` and stderr to `err_path`.
pub fn run_split(
    cmd: &mut Command,
    out_path: &Path,
    err_path: &Path,
    stdin: Option<&str>,
    timeout: Duration,
) -> io::Result<Exit> {
    let out = File::create(out_path)?;
    let err = File::create(err_path)?;
    cmd.stdout(Stdio::from(out))
        .stderr(Stdio::from(err))
        .stdin(if stdin.is_some() { Stdio::piped() } else { Stdio::null() });
    let mut child = cmd.spawn()?;
    feed_stdin(&mut child, stdin);
    let status = wait_with_deadline(&mut child, timeout)?;
    Ok(to_exit(status))
}

fn feed_stdin(child: &mut Child, stdin: Option<&str>) {
    if let (Some(text), Some(mut pipe)) = (stdin, child.stdin.take()) {
        let text = text.to_string();
        // A child that exits early closes the pipe; that is not our error.
        thread::spawn(move || {
            let _ = pipe.write_all(text.as_bytes());
        });
    }
}

/// Render an argv for logs.
pub fn display_argv(argv: &[String]) -> String {
    argv.iter()
        .map(|a| {
            if a.is_empty() || a.chars().any(|c| c.is_whitespace() || c == '\'' || c == '"') {
                format!("'{}'", a.replace('\'', "'\\''"))
            } else {
                a.clone()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;
    use std::fs;
    use tempfile::TempDir;

    #[test]
    fn captures_both_streams_and_code() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("log.txt");
        let mut log = File::create(&path).unwrap();
        writeln!(log, "$ header").unwrap();
        let exit = run_logged(
            Command::new("sh").args(["-c", "echo out; echo err 1>&2; exit 3"]),
            &mut log,
            None,
            Duration::from_secs(10),
        )
        .unwrap();
        assert_eq!(exit, Exit::Code(3));
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("$ header\n"));
        assert!(text.contains("out\n") && text.contains("err\n"));
    }

    #[test]
    fn timeout_kills_child() {
        let dir = TempDir::new().unwrap();
        let mut log = File::create(dir.path().join("log.txt")).unwrap();
        let start = Instant::now();
        let exit = run_logged(
            Command::new("sh").args(["-c", "echo partial; sleep 5"]),
            &mut log,
            None,
            Duration::from_millis(300),
        )
        .unwrap();
        assert_eq!(exit, Exit::TimedOut);
        assert!(start.elapsed() < Duration::from_secs(4));
        assert!(fs::read_to_string(dir.path().join("log.txt")).unwrap().contains("partial"));
    }

    #[test]
    fn missing_program_is_spawn_error() {
        let dir = TempDir::new().unwrap();
        let mut log = File::create(dir.path().join("log.txt")).unwrap();
        let err = run_logged(&mut Command::new("definitely-not-a-tool-xyz"), &mut log, None, Duration::from_secs(1));
        assert!(err.is_err());
    }

    #[test]
    fn stdin_is_fed() {
        let dir = TempDir::new().unwrap();
        let out = dir.path().join("o");
        let err = dir.path().join("e");
        let exit = run_split(&mut Command::new("cat"), &out, &err, Some("hello"), Duration::from_secs(5)).unwrap();
        assert!(exit.success());
        assert_eq!(fs::read_to_string(out).unwrap(), "hello");
    }

    #[test]
    fn argv_quoting() {
        assert_eq!(display_argv(&["a".into(), "b c".into(), "".into()]), "a 'b c' ''");
    }
}
