use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracing::{info, warn};
use walkdir::WalkDir;

use super::{count_attempts, parse_self_critique, render_generation_prompt, SelfCritique, TaskSpec};
use crate::backends::{AgentBackend, AgentRequest};
use crate::corpus::ProgramPair;
use crate::javasrc;
use crate::workspace::{fresh_copy, read_json, rel_string, write_json, PairWorkspace, COPY_EXCLUDES};

pub const DEFAULT_TASK_TIMEOUT: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationOptions {
    pub timeout: Duration,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        Self {
            timeout: DEFAULT_TASK_TIMEOUT,
        }
    }
}

/// The test an agent left behind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestFile {
    /// Relative to the app root.
    pub rel_path: String,
    pub package: Option<String>,
    pub class_name: String,
    pub method_name: String,
}

impl TestFile {
    pub fn qualified_class(&self) -> String {
        match &self.package {
            Some(p) => format!("{p}.{}", self.class_name),
            None => self.class_name.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSession {
    pub task: TaskSpec,
    pub prompt_text: String,
    /// Paths below are relative to the pair workspace.
    pub prompt_path: String,
    pub transcript_path: String,
    pub worktree: String,
    pub attempts: u32,
    pub critique: SelfCritique,
    pub test_file: Option<TestFile>,
    /// Files outside the test tree were added, changed or removed.
    pub modified_sources: bool,
    /// App-relative paths the agent touched, sorted.
    pub changed_files: Vec<String>,
    /// Backend failure, if any.
    pub error: Option<String>,
    /// Stored under the runtime directory, not in the session file.
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Serialize, Deserialize)]
struct Timing {
    wall_time_s: f64,
}

type Snapshot = BTreeMap<String, String>;

fn snapshot(root: &Path) -> io::Result<Snapshot> {
    let mut out = Snapshot::new();
    let walker = WalkDir::new(root).sort_by_file_name().into_iter().filter_entry(|e| {
        e.depth() == 0 || !(e.file_type().is_dir() && COPY_EXCLUDES.contains(&e.file_name().to_string_lossy().as_ref()))
    });
    for entry in walker {
        let entry = entry.map_err(io::Error::other)?;
        if entry.file_type().is_file() {
            let rel = rel_string(entry.path().strip_prefix(root).expect("walkdir stays under root"));
            out.insert(rel, hex::encode(Sha256::digest(fs::read(entry.path())?)));
        }
    }
    Ok(out)
}

fn find_test(worktree: &Path, candidates: &[&String]) -> Option<TestFile> {
    for rel in candidates.iter().filter(|r| r.ends_with(".java")) {
        let Ok(src) = fs::read_to_string(worktree.join(rel.as_str())) else { continue };
        let file = javasrc::scan(&src);
        if let Some(m) = file.methods.iter().find(|m| m.annotations.iter().any(|a| a == "Test")) {
            return Some(TestFile {
                rel_path: rel.to_string(),
                package: file.package.clone(),
                class_name: m.enclosing_type.clone(),
                method_name: m.name.clone(),
            });
        }
    }
    None
}

fn session_path(pws: &PairWorkspace, task_id: &str) -> PathBuf {
    pws.task_dir(task_id).join("session.json")
}

fn timing_path(pws: &PairWorkspace, task_id: &str) -> PathBuf {
    pws.runtime().join(format!("{task_id}.generate.json"))
}

pub fn save_session(pws: &PairWorkspace, session: &GenerationSession) -> io::Result<()> {
    write_json(&session_path(pws, &session.task.task_id), session)?;
    write_json(
        &timing_path(pws, &session.task.task_id),
        &Timing {
            wall_time_s: session.wall_time_s,
        },
    )
}

pub fn load_session(pws: &PairWorkspace, task_id: &str) -> io::Result<GenerationSession> {
    let mut s: GenerationSession = read_json(&session_path(pws, task_id))?;
    if let Ok(t) = read_json::<Timing>(&timing_path(pws, task_id)) {
        s.wall_time_s = t.wall_time_s;
    }
    Ok(s)
}

/// Run one Phase II task in a fresh copy of the app and persist the
/// session. Backend failures are recorded in the session, not returned.
pub fn run_generation(
    task: &TaskSpec,
    pair: &ProgramPair,
    agent: &dyn AgentBackend,
    pws: &PairWorkspace,
    opts: &GenerationOptions,
) -> io::Result<GenerationSession> {
    let prompt = render_generation_prompt(task).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    let worktree = pws.worktree(&task.task_id);
    fresh_copy(&pair.app_root, &worktree)?;
    let prompt_file = pws.prompts().join(format!("{}.generate.txt", task.task_id));
    fs::create_dir_all(pws.prompts())?;
    fs::write(&prompt_file, &prompt)?;
    let transcript_path = pws.transcripts().join(format!("{}.txt", task.task_id));

    let before = snapshot(&worktree)?;
    let key = task.key();
    let start = Instant::now();
    let result = agent.run_agent(&AgentRequest {
        key: &key,
        prompt: &prompt,
        prompt_file: &prompt_file,
        workdir: &worktree,
        transcript_path: &transcript_path,
        timeout: opts.timeout,
    });
    let wall_time_s = start.elapsed().as_secs_f64();
    let after = snapshot(&worktree)?;

    let (transcript, error) = match result {
        Ok(t) => (t, None),
        Err(e) => {
            warn!(task = %key, error = %e, "agent session failed");
            let t = fs::read(&transcript_path).map(|b| String::from_utf8_lossy(&b).into_owned()).unwrap_or_default();
            (t, Some(e.to_string()))
        }
    };
    if !transcript_path.exists() {
        fs::write(&transcript_path, &transcript)?;
    }

    let mut changed: Vec<String> = after
        .iter()
        .filter(|(k, v)| before.get(*k) != Some(v))
        .map(|(k, _)| k.clone())
        .chain(before.keys().filter(|k| !after.contains_key(*k)).cloned())
        .collect();
    changed.sort();
    let tree = format!("{}/", pair.build_system.test_tree());
    let modified_sources = changed.iter().any(|p| !p.starts_with(&tree));
    // Prefer brand-new test files over edited ones.
    let mut candidates: Vec<&String> =
        changed.iter().filter(|p| p.starts_with(&tree) && !before.contains_key(*p) && after.contains_key(*p)).collect();
    candidates.extend(changed.iter().filter(|p| p.starts_with(&tree) && before.contains_key(*p) && after.contains_key(*p)));
    let test_file = find_test(&worktree, &candidates);

    let session = GenerationSession {
        task: task.clone(),
        prompt_text: prompt,
        prompt_path: pws.relative(&prompt_file),
        transcript_path: pws.relative(&transcript_path),
        worktree: pws.relative(&worktree),
        attempts: count_attempts(&transcript).max(1),
        critique: parse_self_critique(&transcript),
        test_file,
        modified_sources,
        changed_files: changed,
        error,
        wall_time_s,
    };
    save_session(pws, &session)?;
    info!(task = %key, attempts = session.attempts, test = session.test_file.is_some(), "generation done");
    Ok(session)
}
