//! Agent and LLM backends.
//!
//! A backend is either a command template launched as a subprocess
//! ([`CommandBackend`]) or a scripted replay of canned data
//! ([`ScriptedBackend`]). Both implement [`AgentBackend`] and
//! [`LlmBackend`]; the pipeline only sees the traits.
//!
//! Agent transcripts must delimit each generate/execute/critique round
//! with the marker lines in [`markers`] so attempts can be counted.

mod command;
mod config;
mod limiter;
mod scripted;

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use command::{invoke_agent, invoke_llm, CommandBackend};
pub use config::{load_backends, BackendConfigError, Backends};
pub use limiter::{InvocationLimiter, Permit};
pub use scripted::{scripted_backend, ScriptedBackend, ScriptError};

/// Transcript round delimiters, one per line.
pub mod markers {
    pub const GENERATE: &str = "[[pov:generate]]";
    pub const EXECUTE: &str = "[[pov:execute]]";
    pub const CRITIQUE: &str = "[[pov:critique]]";
    /// Version tag of the transcript convention above.
    pub const CONVENTION: &str = "pov-rounds/1";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Agent,
    Llm,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Agent => "agent",
            BackendKind::Llm => "llm",
        })
    }
}

/// A command-line backend. `launch` is an argv template; `{prompt_file}`,
/// `{workdir}` and `{task_key}` are substituted per invocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    pub name: String,
    pub launch: Vec<String>,
    #[serde(default = "default_convention")]
    pub transcript_convention: String,
    /// Extra environment variables passed through to the process.
    #[serde(default)]
    pub env_passthrough: Vec<String>,
    /// Also feed the prompt on stdin.
    #[serde(default)]
    pub prompt_on_stdin: bool,
}

fn default_convention() -> String {
    markers::CONVENTION.to_string()
}

impl BackendDescriptor {
    pub fn validate(&self) -> Result<(), BackendError> {
        let has = |p: &str| self.launch.iter().any(|a| a.contains(p));
        if self.launch.is_empty() {
            return Err(BackendError::Descriptor(format!("backend `{}` has an empty launch command", self.name)));
        }
        if !has("{prompt_file}") && !self.prompt_on_stdin {
            return Err(BackendError::Descriptor(format!(
                "backend `{}` launch template must reference {{prompt_file}}",
                self.name
            )));
        }
        if self.kind == BackendKind::Agent && !has("{workdir}") {
            return Err(BackendError::Descriptor(format!(
                "agent backend `{}` launch template must reference {{workdir}}",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("invalid backend descriptor: {0}")]
    Descriptor(String),
    #[error("failed to launch `{command}`: {source}")]
    Launch {
        command: String,
        #[source]
        source: io::Error,
    },
    #[error("backend timed out after {0:?}")]
    Timeout(Duration),
    #[error("backend exited with status {code}")]
    NonZeroExit { code: i32 },
    #[error("no scripted entry for task `{0}`")]
    Unmatched(String),
    #[error("scripted failure for `{key}`: {message}")]
    Scripted { key: String, message: String },
    #[error("backend does not support {0} invocations")]
    WrongKind(BackendKind),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One agent session.
#[derive(Debug, Clone)]
pub struct AgentRequest<'a> {
    /// Stable task key, e.g. `demo-a/task-1`.
    pub key: &'a str,
    pub prompt: &'a str,
    /// Where the prompt has been written.
    pub prompt_file: &'a Path,
    pub workdir: &'a Path,
    /// Always written, even on failure.
    pub transcript_path: &'a Path,
    pub timeout: Duration,
}

/// One stateless LLM exchange.
#[derive(Debug, Clone)]
pub struct LlmRequest<'a> {
    pub key: &'a str,
    pub prompt: &'a str,
    pub prompt_file: &'a Path,
    pub transcript_path: &'a Path,
    pub timeout: Duration,
}

pub trait AgentBackend: Send + Sync {
    fn name(&self) -> &str;
    /// Run the agent to completion and return its transcript.
    fn run_agent(&self, req: &AgentRequest<'_>) -> Result<String, BackendError>;
}

pub trait LlmBackend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, req: &LlmRequest<'_>) -> Result<String, BackendError>;
}

pub fn prompt_sha256(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

pub(crate) fn ensure_parent(path: &Path) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(())
}

pub(crate) fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc(kind: BackendKind, launch: &[&str]) -> BackendDescriptor {
        BackendDescriptor {
            kind,
            name: "x".into(),
            launch: launch.iter().map(|s| s.to_string()).collect(),
            transcript_convention: default_convention(),
            env_passthrough: vec![],
            prompt_on_stdin: false,
        }
    }

    #[test]
    fn descriptor_placeholders() {
        assert!(desc(BackendKind::Llm, &["llm", "-f", "{prompt_file}"]).validate().is_ok());
        assert!(desc(BackendKind::Llm, &["llm"]).validate().is_err());
        assert!(desc(BackendKind::Agent, &["agent", "{prompt_file}"]).validate().is_err());
        assert!(desc(BackendKind::Agent, &["agent", "--cd={workdir}", "{prompt_file}"]).validate().is_ok());
        assert!(desc(BackendKind::Agent, &[]).validate().is_err());
    }
}
