use std::fs;
use std::io;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{parse_verdict, render_assessment_prompt, AssessmentInput, Confidence, Judgment, Verdict};
use crate::backends::{LlmBackend, LlmRequest};
use crate::workspace::{read_json, write_json, PairWorkspace};

pub const DEFAULT_JUDGE_RETRIES: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JudgeOptions {
    pub retries: u32,
    pub log_budget: usize,
    pub timeout: Duration,
}

impl Default for JudgeOptions {
    fn default() -> Self {
        Self {
            retries: DEFAULT_JUDGE_RETRIES,
            log_budget: super::DEFAULT_LOG_BUDGET,
            timeout: Duration::from_secs(10 * 60),
        }
    }
}

/// A persisted verdict with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub pair_id: String,
    pub task_id: String,
    pub verdict: Verdict,
    /// Failed backend calls before the one that answered.
    pub retries: u32,
    /// Every backend call failed.
    pub tool_failure: bool,
    pub error: Option<String>,
    pub prompt_path: String,
    pub response_path: String,
}

fn verdict_path(pws: &PairWorkspace, task_id: &str) -> PathBuf {
    pws.verdicts().join(format!("{task_id}.json"))
}

pub fn load_verdict(pws: &PairWorkspace, task_id: &str) -> io::Result<VerdictRecord> {
    read_json(&verdict_path(pws, task_id))
}

/// Ask the LLM for a verdict on one task and persist it as
/// `verdicts/<task>.json`.
pub fn judge(
    input: &AssessmentInput,
    llm: &dyn LlmBackend,
    pws: &PairWorkspace,
    task_id: &str,
    opts: &JudgeOptions,
) -> io::Result<VerdictRecord> {
    let prompt = render_assessment_prompt(input, opts.log_budget);
    fs::create_dir_all(pws.prompts())?;
    fs::create_dir_all(pws.verdicts())?;
    let prompt_file = pws.prompts().join(format!("{task_id}.assess.txt"));
    fs::write(&prompt_file, &prompt)?;
    let response_path = pws.verdicts().join(format!("{task_id}.response.txt"));
    let key = format!("{}/{task_id}/judge", pws.pair_id);

    let mut last_error = None;
    let mut outcome = None;
    for attempt in 0..=opts.retries {
        match llm.complete(&LlmRequest {
            key: &key,
            prompt: &prompt,
            prompt_file: &prompt_file,
            transcript_path: &response_path,
            timeout: opts.timeout,
        }) {
            Ok(text) => {
                outcome = Some((attempt, text));
                break;
            }
            Err(e) => {
                warn!(task = %key, attempt, error = %e, "judge call failed");
                last_error = Some(e.to_string());
            }
        }
    }

    let record = match outcome {
        Some((retries, text)) => VerdictRecord {
            pair_id: pws.pair_id.clone(),
            task_id: task_id.to_string(),
            verdict: parse_verdict(&text),
            retries,
            tool_failure: false,
            error: None,
            prompt_path: pws.relative(&prompt_file),
            response_path: pws.relative(&response_path),
        },
        None => VerdictRecord {
            pair_id: pws.pair_id.clone(),
            task_id: task_id.to_string(),
            verdict: Verdict::new(
                Judgment::Unknown,
                Confidence::Low,
                format!("tool_failure: {}", last_error.as_deref().unwrap_or("no response")),
            ),
            retries: opts.retries,
            tool_failure: true,
            error: last_error,
            prompt_path: pws.relative(&prompt_file),
            response_path: pws.relative(&response_path),
        },
    };
    write_json(&verdict_path(pws, task_id), &record)?;
    Ok(record)
}
