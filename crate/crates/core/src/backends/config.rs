use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use super::{
    markers, resolve, scripted_backend, AgentBackend, BackendDescriptor, BackendError, BackendKind, CommandBackend,
    InvocationLimiter, LlmBackend, ScriptError,
};

#[derive(Debug, Error)]
pub enum BackendConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("[{table}]: {message}")]
    Invalid { table: &'static str, message: String },
    #[error("[{table}]: {source}")]
    Descriptor {
        table: &'static str,
        #[source]
        source: BackendError,
    },
    #[error("[{table}]: {source}")]
    Script {
        table: &'static str,
        #[source]
        source: ScriptError,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    agent: RawBackend,
    llm: RawBackend,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBackend {
    name: Option<String>,
    scripted: Option<PathBuf>,
    launch: Option<Vec<String>>,
    #[serde(default)]
    env_passthrough: Vec<String>,
    #[serde(default)]
    prompt_on_stdin: bool,
    transcript_convention: Option<String>,
}

/// The agent and LLM a pipeline run talks to.
#[derive(Clone)]
pub struct Backends {
    pub agent: Arc<dyn AgentBackend>,
    pub llm: Arc<dyn LlmBackend>,
}

impl fmt::Debug for Backends {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Backends")
            .field("agent", &self.agent.name())
            .field("llm", &self.llm.name())
            .finish()
    }
}

enum Built {
    Command(CommandBackend),
    Scripted(super::ScriptedBackend),
}

fn build(
    table: &'static str,
    kind: BackendKind,
    raw: RawBackend,
    base: &Path,
    limiter: &Arc<InvocationLimiter>,
) -> Result<Built, BackendConfigError> {
    match (raw.scripted, raw.launch) {
        (Some(dir), None) => scripted_backend(&resolve(base, &dir))
            .map(Built::Scripted)
            .map_err(|source| BackendConfigError::Script { table, source }),
        (None, Some(launch)) => {
            let desc = BackendDescriptor {
                kind,
                name: raw.name.unwrap_or_else(|| launch.first().cloned().unwrap_or_default()),
                launch,
                transcript_convention: raw.transcript_convention.unwrap_or_else(|| markers::CONVENTION.to_string()),
                env_passthrough: raw.env_passthrough,
                prompt_on_stdin: raw.prompt_on_stdin,
            };
            CommandBackend::new(desc, Arc::clone(limiter))
                .map(Built::Command)
                .map_err(|source| BackendConfigError::Descriptor { table, source })
        }
        _ => Err(BackendConfigError::Invalid {
            table,
            message: "give exactly one of `scripted` or `launch`".into(),
        }),
    }
}

/// Read a backends file with `[agent]` and `[llm]` tables. Relative
/// paths are resolved against the file's directory.
pub fn load_backends(path: &Path, limiter: Arc<InvocationLimiter>) -> Result<Backends, BackendConfigError> {
    let text = fs::read_to_string(path).map_err(|source| BackendConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let raw: RawConfig = toml::from_str(&text).map_err(|e| BackendConfigError::Syntax {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let agent: Arc<dyn AgentBackend> = match build("agent", BackendKind::Agent, raw.agent, base, &limiter)? {
        Built::Command(c) => Arc::new(c),
        Built::Scripted(s) => Arc::new(s),
    };
    let llm: Arc<dyn LlmBackend> = match build("llm", BackendKind::Llm, raw.llm, base, &limiter)? {
        Built::Command(c) => Arc::new(c),
        Built::Scripted(s) => Arc::new(s),
    };
    Ok(Backends { agent, llm })
}
