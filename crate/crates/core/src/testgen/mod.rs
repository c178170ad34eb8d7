//! Phase II: PoV test generation by a coding agent.

mod prompt;
mod session;

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::markers;
use crate::callpath::CallPath;
use crate::corpus::ProgramPair;
use crate::signature::MethodSignature;

pub use prompt::{
    check_generation_prompt, render_generation_prompt, PromptCheck, EXPECTATION_LABELS, INDEPENDENCE_LABELS,
    PAYLOAD_LABELS, RULE_LABELS, STEP_LABELS,
};
pub use session::{
    load_session, run_generation, save_session, GenerationOptions, GenerationSession, TestFile, DEFAULT_TASK_TIMEOUT,
};

/// The nine inputs of one generation task, plus its identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub pair_id: String,
    /// `task-N`, unique within the pair.
    pub task_id: String,
    pub sink_method: MethodSignature,
    pub source_method: MethodSignature,
    pub client_rel_path: String,
    pub call_path: CallPath,
    pub vuln_id: String,
    pub vulnerable_api_list: Vec<MethodSignature>,
    pub affected_versions: String,
    pub test_function_name: String,
    pub test_function_source: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaskError {
    #[error("call path is not verified")]
    Unverified,
    #[error("call path has no nodes")]
    EmptyPath,
    #[error("source method does not match the first call-path node")]
    SourceMismatch,
    #[error("sink `{0}` is not in the vulnerable API list")]
    UnknownSink(String),
}

impl TaskSpec {
    /// Build a task from a verified path of `pair`.
    pub fn new(pair: &ProgramPair, task_id: impl Into<String>, path: &CallPath) -> Result<Self, TaskError> {
        let src = path.source().ok_or(TaskError::EmptyPath)?;
        let task = TaskSpec {
            pair_id: pair.pair_id.clone(),
            task_id: task_id.into(),
            sink_method: path.sink.clone(),
            source_method: src.method_signature.clone(),
            client_rel_path: src.file_rel_path.clone(),
            call_path: path.clone(),
            vuln_id: pair.vulnerability.vuln_id.clone(),
            vulnerable_api_list: pair.vulnerability.vulnerable_api_list.clone(),
            affected_versions: pair.vulnerability.affected_versions.clone(),
            test_function_name: pair.exemplar.test_function_name.clone(),
            test_function_source: pair.exemplar.test_source.clone(),
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        if !self.call_path.verification.is_verified() {
            return Err(TaskError::Unverified);
        }
        let src = self.call_path.source().ok_or(TaskError::EmptyPath)?;
        if !src.method_signature.same_as(&self.source_method) {
            return Err(TaskError::SourceMismatch);
        }
        if !self.vulnerable_api_list.iter().any(|s| s.same_as(&self.sink_method)) {
            return Err(TaskError::UnknownSink(self.sink_method.to_string()));
        }
        Ok(())
    }

    /// Backend key, e.g. `demo-a/task-1`.
    pub fn key(&self) -> String {
        format!("{}/{}", self.pair_id, self.task_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Claim {
    Yes,
    No,
    #[default]
    Unknown,
}

impl Claim {
    pub fn as_str(self) -> &'static str {
        match self {
            Claim::Yes => "yes",
            Claim::No => "no",
            Claim::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The agent's own final verdict on its test.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SelfCritique {
    pub compiled_claim: Claim,
    pub demonstrated_claim: Claim,
    /// Transcript lines the claims were read from.
    pub raw_text: String,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Phase {
    Generate,
    Execute,
    Critique,
}

fn phase_of(line: &str) -> Option<Phase> {
    match line.trim() {
        markers::GENERATE => Some(Phase::Generate),
        markers::EXECUTE => Some(Phase::Execute),
        markers::CRITIQUE => Some(Phase::Critique),
        _ => None,
    }
}

fn looks_like_test(transcript: &str) -> bool {
    transcript.contains("@Test")
}

/// Number of generate/execute/critique rounds in a transcript. Each
/// maximal run of markers in phase order is one round; a transcript
/// without markers but with test code counts as one round.
pub fn count_attempts(transcript: &str) -> u32 {
    let mut rounds = 0;
    let mut last: Option<Phase> = None;
    for phase in transcript.lines().filter_map(phase_of) {
        if last.is_none_or(|prev| phase <= prev) {
            rounds += 1;
        }
        last = Some(phase);
    }
    if rounds == 0 && looks_like_test(transcript) {
        1
    } else {
        rounds
    }
}

fn claim_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(compiles|triggers)\s*:\s*\**\s*(yes|no)\b").expect("valid regex"))
}

/// The last `compiles:` and `triggers:` claims in the transcript.
pub fn parse_self_critique(transcript: &str) -> SelfCritique {
    let mut compiled = (Claim::Unknown, None);
    let mut demonstrated = (Claim::Unknown, None);
    for (idx, line) in transcript.lines().enumerate() {
        for cap in claim_re().captures_iter(line) {
            let claim = if cap[2].eq_ignore_ascii_case("yes") { Claim::Yes } else { Claim::No };
            if cap[1].eq_ignore_ascii_case("compiles") {
                compiled = (claim, Some(idx));
            } else {
                demonstrated = (claim, Some(idx));
            }
        }
    }
    let mut lines: Vec<usize> = [compiled.1, demonstrated.1].into_iter().flatten().collect();
    lines.sort_unstable();
    lines.dedup();
    let all: Vec<&str> = transcript.lines().collect();
    let raw_text = lines.iter().map(|&i| all[i].trim()).collect::<Vec<_>>().join("\n");
    SelfCritique {
        compiled_claim: compiled.0,
        demonstrated_claim: demonstrated.0,
        raw_text,
    }
}
