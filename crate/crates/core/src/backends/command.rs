use std::fs::{self, File};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Duration;

use tracing::debug;

use super::{
    ensure_parent, AgentBackend, AgentRequest, BackendDescriptor, BackendError, BackendKind, InvocationLimiter,
    LlmBackend, LlmRequest,
};
use crate::process::{self, Exit};

/// Variables always passed to backend processes.
const BASE_ENV: [&str; 6] = ["PATH", "HOME", "LANG", "LC_ALL", "TMPDIR", "USER"];

/// Subprocess adapter for any CLI agent or LLM reachable via a command
/// template.
#[derive(Debug, Clone)]
pub struct CommandBackend {
    desc: BackendDescriptor,
    limiter: Arc<InvocationLimiter>,
}

impl CommandBackend {
    pub fn new(desc: BackendDescriptor, limiter: Arc<InvocationLimiter>) -> Result<Self, BackendError> {
        desc.validate()?;
        Ok(Self { desc, limiter })
    }

    pub fn descriptor(&self) -> &BackendDescriptor {
        &self.desc
    }
}

fn expand(desc: &BackendDescriptor, prompt_file: &Path, workdir: Option<&Path>, key: &str) -> Vec<String> {
    desc.launch
        .iter()
        .map(|a| {
            let mut a = a.replace("{prompt_file}", &prompt_file.display().to_string());
            if let Some(w) = workdir {
                a = a.replace("{workdir}", &w.display().to_string());
            }
            a.replace("{task_key}", key)
        })
        .collect()
}

fn command(desc: &BackendDescriptor, argv: &[String]) -> Command {
    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..]).env_clear();
    for var in BASE_ENV.iter().copied().chain(desc.env_passthrough.iter().map(String::as_str)) {
        if let Ok(v) = std::env::var(var) {
            cmd.env(var, v);
        }
    }
    cmd
}

/// Launch an agent in `workdir` and stream its combined output into the
/// transcript file. The transcript is left on disk on every path,
/// including launch failure and timeout.
pub fn invoke_agent(
    desc: &BackendDescriptor,
    key: &str,
    prompt: &str,
    prompt_file: &Path,
    workdir: &Path,
    transcript_path: &Path,
    timeout: Duration,
) -> Result<String, BackendError> {
    if desc.kind != BackendKind::Agent {
        return Err(BackendError::WrongKind(BackendKind::Agent));
    }
    ensure_parent(transcript_path)?;
    let mut log = File::create(transcript_path)?;
    let argv = expand(desc, prompt_file, Some(workdir), key);
    debug!(backend = %desc.name, key, argv = %process::display_argv(&argv), "launching agent");
    let mut cmd = command(desc, &argv);
    cmd.current_dir(workdir);
    let stdin = desc.prompt_on_stdin.then_some(prompt);
    let exit = process::run_logged(&mut cmd, &mut log, stdin, timeout).map_err(|source| BackendError::Launch {
        command: argv[0].clone(),
        source,
    })?;
    drop(log);
    let transcript = String::from_utf8_lossy(&fs::read(transcript_path)?).into_owned();
    match exit {
        Exit::TimedOut => Err(BackendError::Timeout(timeout)),
        // The agent's own exit status is data; the transcript tells the story.
        _ => Ok(transcript),
    }
}

/// One stateless exchange with an LLM command; stdout is the response.
pub fn invoke_llm(
    desc: &BackendDescriptor,
    key: &str,
    prompt: &str,
    prompt_file: &Path,
    transcript_path: &Path,
    timeout: Duration,
) -> Result<String, BackendError> {
    if desc.kind != BackendKind::Llm {
        return Err(BackendError::WrongKind(BackendKind::Llm));
    }
    ensure_parent(transcript_path)?;
    let err_path = transcript_path.with_extension("stderr.txt");
    let argv = expand(desc, prompt_file, None, key);
    let mut cmd = command(desc, &argv);
    let stdin = desc.prompt_on_stdin.then_some(prompt);
    let result = process::run_split(&mut cmd, transcript_path, &err_path, stdin, timeout);
    if err_path.metadata().is_ok_and(|m| m.len() == 0) {
        let _ = fs::remove_file(&err_path);
    }
    let exit = match result {
        Ok(exit) => exit,
        Err(source) => {
            if !transcript_path.exists() {
                File::create(transcript_path)?;
            }
            return Err(BackendError::Launch {
                command: argv[0].clone(),
                source,
            });
        }
    };
    match exit {
        Exit::Code(0) => Ok(String::from_utf8_lossy(&fs::read(transcript_path)?).into_owned()),
        Exit::Code(code) => Err(BackendError::NonZeroExit { code }),
        Exit::Signal => Err(BackendError::NonZeroExit { code: -1 }),
        Exit::TimedOut => Err(BackendError::Timeout(timeout)),
    }
}

impl AgentBackend for CommandBackend {
    fn name(&self) -> &str {
        &self.desc.name
    }

    fn run_agent(&self, req: &AgentRequest<'_>) -> Result<String, BackendError> {
        let _permit = self.limiter.acquire();
        invoke_agent(
            &self.desc,
            req.key,
            req.prompt,
            req.prompt_file,
            req.workdir,
            req.transcript_path,
            req.timeout,
        )
    }
}

impl LlmBackend for CommandBackend {
    fn name(&self) -> &str {
        &self.desc.name
    }

    fn complete(&self, req: &LlmRequest<'_>) -> Result<String, BackendError> {
        let _permit = self.limiter.acquire();
        invoke_llm(&self.desc, req.key, req.prompt, req.prompt_file, req.transcript_path, req.timeout)
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;
    use crate::backends::markers;
    use tempfile::TempDir;

    fn desc(kind: BackendKind, launch: &[&str]) -> BackendDescriptor {
        BackendDescriptor {
            kind,
            name: "test".into(),
            launch: launch.iter().map(|s| s.to_string()).collect(),
            transcript_convention: markers::CONVENTION.into(),
            env_passthrough: vec![],
            prompt_on_stdin: false,
        }
    }

    #[test]
    fn agent_copies_canned_test_and_transcript_matches() {
        let dir = TempDir::new().unwrap();
        let work = dir.path().join("work");
        fs::create_dir_all(&work).unwrap();
        let prompt_file = dir.path().join("prompt.txt");
        fs::write(&prompt_file, "do it").unwrap();
        let script = "mkdir -p \"$1/src/test\" && echo 'class T {}' > \"$1/src/test/T.java\" && printf 'wrote test\\n'";
        let d = desc(BackendKind::Agent, &["sh", "-c", script, "agent", "{workdir}", "{prompt_file}"]);
        let transcript = dir.path().join("t.txt");
        let out = invoke_agent(&d, "k", "do it", &prompt_file, &work, &transcript, Duration::from_secs(10)).unwrap();
        assert_eq!(out, "wrote test\n");
        assert_eq!(fs::read_to_string(&transcript).unwrap(), out);
        assert!(work.join("src/test/T.java").is_file());
    }

    #[test]
    fn command_not_found_names_command() {
        let dir = TempDir::new().unwrap();
        let d = desc(BackendKind::Agent, &["no-such-agent-cli", "{workdir}", "{prompt_file}"]);
        let transcript = dir.path().join("t.txt");
        let err = invoke_agent(&d, "k", "p", &dir.path().join("p"), dir.path(), &transcript, Duration::from_secs(1))
            .unwrap_err();
        match err {
            BackendError::Launch { command, .. } => assert_eq!(command, "no-such-agent-cli"),
            other => panic!("{other:?}"),
        }
        assert!(transcript.is_file());
    }

    #[test]
    fn timeout_keeps_partial_transcript() {
        let dir = TempDir::new().unwrap();
        let d = desc(BackendKind::Agent, &["sh", "-c", "echo partial; sleep 5", "{workdir}", "{prompt_file}"]);
        let transcript = dir.path().join("t.txt");
        let err = invoke_agent(&d, "k", "p", &dir.path().join("p"), dir.path(), &transcript, Duration::from_millis(300))
            .unwrap_err();
        assert!(matches!(err, BackendError::Timeout(_)));
        assert_eq!(fs::read_to_string(&transcript).unwrap(), "partial\n");
    }

    #[test]
    fn llm_reads_stdin_and_returns_stdout() {
        let dir = TempDir::new().unwrap();
        let mut d = desc(BackendKind::Llm, &["sh", "-c", "cat; echo; echo done", "{prompt_file}"]);
        d.prompt_on_stdin = true;
        let transcript = dir.path().join("r.txt");
        let out = invoke_llm(&d, "k", "question", &dir.path().join("p"), &transcript, Duration::from_secs(5)).unwrap();
        assert_eq!(out, "question\ndone\n");
        assert!(!dir.path().join("r.stderr.txt").exists());
    }

    #[test]
    fn llm_empty_response_and_failures() {
        let dir = TempDir::new().unwrap();
        let transcript = dir.path().join("r.txt");
        let d = desc(BackendKind::Llm, &["true", "{prompt_file}"]);
        assert_eq!(invoke_llm(&d, "k", "q", Path::new("p"), &transcript, Duration::from_secs(5)).unwrap(), "");
        let d = desc(BackendKind::Llm, &["sh", "-c", "echo boom >&2; exit 4", "{prompt_file}"]);
        assert!(matches!(
            invoke_llm(&d, "k", "q", Path::new("p"), &transcript, Duration::from_secs(5)),
            Err(BackendError::NonZeroExit { code: 4 })
        ));
        assert_eq!(fs::read_to_string(dir.path().join("r.stderr.txt")).unwrap(), "boom\n");
        let d = desc(BackendKind::Llm, &["sh", "-c", "sleep 5", "{prompt_file}"]);
        assert!(matches!(
            invoke_llm(&d, "k", "q", Path::new("p"), &transcript, Duration::from_millis(200)),
            Err(BackendError::Timeout(_))
        ));
    }

    #[test]
    fn wrong_kind_rejected() {
        let d = desc(BackendKind::Llm, &["true", "{prompt_file}"]);
        let err = invoke_agent(&d, "k", "p", Path::new("p"), Path::new("."), Path::new("/tmp/x"), Duration::from_secs(1));
        assert!(matches!(err, Err(BackendError::WrongKind(BackendKind::Agent))));
    }
}
