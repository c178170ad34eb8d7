use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Component, Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use super::{ensure_parent, prompt_sha256, AgentBackend, AgentRequest, BackendError, LlmBackend, LlmRequest};

pub const SCRIPT_FILE: &str = "script.toml";

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("script entry {index}: {message}")]
    Entry { index: usize, message: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScript {
    #[serde(default)]
    name: Option<String>,
    #[serde(default, rename = "entry")]
    entries: Vec<RawEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    key: Option<String>,
    prompt_sha256: Option<String>,
    transcript: Option<String>,
    transcript_file: Option<PathBuf>,
    response: Option<String>,
    response_file: Option<PathBuf>,
    error: Option<String>,
    #[serde(default)]
    drop: Vec<FileDrop>,
}

/// Copy `from` (relative to the script dir) to `to` (relative to the
/// agent's working directory).
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDrop {
    pub from: PathBuf,
    pub to: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    output: String,
    error: Option<String>,
    drops: Vec<(Vec<u8>, PathBuf)>,
}

/// Replays canned transcripts, responses and file drops. Holds no
/// mutable state, so the same key always behaves the same way.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    name: String,
    by_key: BTreeMap<String, Entry>,
    by_hash: BTreeMap<String, Entry>,
}

fn is_relative_inside(p: &Path) -> bool {
    !p.as_os_str().is_empty() && p.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir))
}

fn read_text(dir: &Path, rel: &Path) -> Result<Vec<u8>, ScriptError> {
    let path = dir.join(rel);
    fs::read(&path).map_err(|source| ScriptError::Io { path, source })
}

/// Load `script.toml` from `script_dir`. All referenced files are read
/// up front so later invocations cannot fail on a missing script file.
pub fn scripted_backend(script_dir: &Path) -> Result<ScriptedBackend, ScriptError> {
    let path = script_dir.join(SCRIPT_FILE);
    let text = fs::read_to_string(&path).map_err(|source| ScriptError::Io { path: path.clone(), source })?;
    let raw: RawScript = toml::from_str(&text).map_err(|e| ScriptError::Syntax {
        path: path.clone(),
        message: e.to_string(),
    })?;

    let mut backend = ScriptedBackend {
        name: raw.name.unwrap_or_else(|| "scripted".to_string()),
        by_key: BTreeMap::new(),
        by_hash: BTreeMap::new(),
    };
    for (index, e) in raw.entries.into_iter().enumerate() {
        let bad = |message: &str| ScriptError::Entry {
            index,
            message: message.to_string(),
        };
        let sources = [
            e.transcript.is_some(),
            e.transcript_file.is_some(),
            e.response.is_some(),
            e.response_file.is_some(),
        ];
        if sources.iter().filter(|b| **b).count() > 1 {
            return Err(bad("give at most one of transcript, transcript_file, response, response_file"));
        }
        let output = match (e.transcript.or(e.response), e.transcript_file.or(e.response_file)) {
            (Some(s), _) => s,
            (None, Some(f)) => String::from_utf8_lossy(&read_text(script_dir, &f)?).into_owned(),
            (None, None) => String::new(),
        };
        let mut drops = Vec::new();
        for d in e.drop {
            if !is_relative_inside(&d.to) || !is_relative_inside(&d.from) {
                return Err(bad("drop paths must be relative and stay inside their root"));
            }
            drops.push((read_text(script_dir, &d.from)?, d.to));
        }
        let entry = Entry {
            output,
            error: e.error,
            drops,
        };
        match (e.key, e.prompt_sha256) {
            (Some(k), None) => {
                if backend.by_key.insert(k.clone(), entry).is_some() {
                    return Err(bad(&format!("duplicate key `{k}`")));
                }
            }
            (None, Some(h)) => {
                if backend.by_hash.insert(h.to_ascii_lowercase(), entry).is_some() {
                    return Err(bad(&format!("duplicate prompt hash `{h}`")));
                }
            }
            _ => return Err(bad("exactly one of key or prompt_sha256 is required")),
        }
    }
    Ok(backend)
}

impl ScriptedBackend {
    pub fn name(&self) -> &str {
        &self.name
    }

    fn lookup(&self, key: &str, prompt: &str) -> Option<&Entry> {
        self.by_key.get(key).or_else(|| self.by_hash.get(&prompt_sha256(prompt)))
    }

    fn replay(&self, key: &str, prompt: &str, transcript: &Path, workdir: Option<&Path>) -> Result<String, BackendError> {
        ensure_parent(transcript)?;
        let Some(entry) = self.lookup(key, prompt) else {
            fs::write(transcript, "")?;
            return Err(BackendError::Unmatched(key.to_string()));
        };
        if let Some(dir) = workdir {
            for (bytes, to) in &entry.drops {
                let dst = dir.join(to);
                ensure_parent(&dst)?;
                fs::write(dst, bytes)?;
            }
        }
        fs::write(transcript, &entry.output)?;
        match &entry.error {
            Some(message) => Err(BackendError::Scripted {
                key: key.to_string(),
                message: message.clone(),
            }),
            None => Ok(entry.output.clone()),
        }
    }
}

impl AgentBackend for ScriptedBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn run_agent(&self, req: &AgentRequest<'_>) -> Result<String, BackendError> {
        self.replay(req.key, req.prompt, req.transcript_path, Some(req.workdir))
    }
}

impl LlmBackend for ScriptedBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, req: &LlmRequest<'_>) -> Result<String, BackendError> {
        self.replay(req.key, req.prompt, req.transcript_path, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;
    use tempfile::TempDir;

    fn setup(script: &str) -> (TempDir, ScriptedBackend) {
        let dir = TempDir::new().unwrap();
        let s = dir.path().join("script");
        fs::create_dir_all(s.join("files")).unwrap();
        fs::write(s.join("files/PovTest.java"), "class PovTest {}\n").unwrap();
        fs::write(s.join("t1.txt"), "[[pov:generate]]\ncompiles: yes\n").unwrap();
        fs::write(s.join(SCRIPT_FILE), script).unwrap();
        let b = scripted_backend(&s).unwrap();
        (dir, b)
    }

    const SCRIPT: &str = r#"
name = "mock"

[[entry]]
key = "demo-a/task-1"
transcript_file = "t1.txt"

[[entry.drop]]
from = "files/PovTest.java"
to = "src/test/java/PovTest.java"

[[entry]]
key = "demo-a/task-2"
transcript = "gave up\n"
error = "agent crashed"

[[entry]]
prompt_sha256 = "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
response = "judgment: triggered\n"
"#;

    fn run(b: &ScriptedBackend, dir: &Path, key: &str) -> (Result<String, BackendError>, String) {
        let work = dir.join("work");
        fs::create_dir_all(&work).unwrap();
        let t = dir.join(format!("out/{}.txt", key.replace('/', "_")));
        let r = b.run_agent(&AgentRequest {
            key,
            prompt: "p",
            prompt_file: Path::new("p"),
            workdir: &work,
            transcript_path: &t,
            timeout: Duration::from_secs(1),
        });
        (r, fs::read_to_string(t).unwrap())
    }

    #[test]
    fn replays_transcript_and_drops_file() {
        let (dir, b) = setup(SCRIPT);
        assert_eq!(AgentBackend::name(&b), "mock");
        let (r, t) = run(&b, dir.path(), "demo-a/task-1");
        assert_eq!(r.unwrap(), "[[pov:generate]]\ncompiles: yes\n");
        assert_eq!(t, "[[pov:generate]]\ncompiles: yes\n");
        assert_eq!(
            fs::read_to_string(dir.path().join("work/src/test/java/PovTest.java")).unwrap(),
            "class PovTest {}\n"
        );
    }

    #[test]
    fn same_key_twice_is_identical() {
        let (dir, b) = setup(SCRIPT);
        let first = run(&b, dir.path(), "demo-a/task-1");
        let second = run(&b, dir.path(), "demo-a/task-1");
        assert_eq!(first.1, second.1);
        assert_eq!(first.0.unwrap(), second.0.unwrap());
    }

    #[test]
    fn unknown_key_is_unmatched_with_empty_transcript() {
        let (dir, b) = setup(SCRIPT);
        let (r, t) = run(&b, dir.path(), "demo-z/task-9");
        assert!(matches!(r, Err(BackendError::Unmatched(k)) if k == "demo-z/task-9"));
        assert_eq!(t, "");
    }

    #[test]
    fn scripted_error_still_writes_transcript() {
        let (dir, b) = setup(SCRIPT);
        let (r, t) = run(&b, dir.path(), "demo-a/task-2");
        assert!(matches!(r, Err(BackendError::Scripted { .. })));
        assert_eq!(t, "gave up\n");
    }

    #[test]
    fn llm_keyed_by_prompt_hash() {
        let (dir, b) = setup(SCRIPT);
        let t = dir.path().join("r.txt");
        let out = b
            .complete(&LlmRequest {
                key: "whatever",
                prompt: "hello",
                prompt_file: Path::new("p"),
                transcript_path: &t,
                timeout: Duration::from_secs(1),
            })
            .unwrap();
        assert_eq!(out, "judgment: triggered\n");
    }

    #[test]
    fn malformed_scripts_rejected() {
        let dir = TempDir::new().unwrap();
        let check = |script: &str| {
            fs::write(dir.path().join(SCRIPT_FILE), script).unwrap();
            scripted_backend(dir.path()).unwrap_err()
        };
        assert!(matches!(check("[[entry]]\ntranscript = \"x\"\n"), ScriptError::Entry { .. }));
        assert!(matches!(check("[[entry]]\nkey = \"a\"\nbogus = 1\n"), ScriptError::Syntax { .. }));
        assert!(matches!(
            check("[[entry]]\nkey = \"a\"\n[[entry.drop]]\nfrom = \"x\"\nto = \"../escape\"\n"),
            ScriptError::Entry { .. }
        ));
        assert!(matches!(check("[[entry]]\nkey = \"a\"\ntranscript_file = \"nope.txt\"\n"), ScriptError::Io { .. }));
        assert!(matches!(
            check("[[entry]]\nkey = \"a\"\n[[entry]]\nkey = \"a\"\n"),
            ScriptError::Entry { index: 1, .. }
        ));
    }
}
