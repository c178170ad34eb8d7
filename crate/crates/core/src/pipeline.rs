//! Phase drivers shared by the CLI subcommands. All state lives in the
//! workspace; each phase reads what the previous one wrote.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::assess::{judge, load_assessment_input, load_verdict, JudgeOptions};
use crate::backends::{AgentRequest, Backends};
use crate::callpath::{parse_agent_paths, render_callpath_prompt, sample_tasks, verify_path, CallPath, PathsFile};
use crate::corpus::{Manifest, ProgramPair};
use crate::harness::{run_test, BuildOutcome, ExecutionRecord, HarnessOptions};
use crate::metrics::{compute, emit_report, load_labels, CallPathStats, Labels, TaskOutcome};
use crate::testgen::{load_session, run_generation, Claim, GenerationOptions, TaskSpec, TestFile};
use crate::workspace::{fresh_copy, init_workspace, read_json, write_json, PairWorkspace};

pub const TOOL_NAME: &str = "povgen";

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub workspace: PathBuf,
    pub seed: u64,
    pub max_parallel: usize,
    pub task_timeout: Duration,
    pub harness: HarnessOptions,
    pub judge: JudgeOptions,
    /// Task filter: `task-N` or `pair/task-N`. Empty means all.
    pub only: Vec<String>,
    pub labels: Option<PathBuf>,
}

impl PipelineOptions {
    pub fn new(workspace: impl Into<PathBuf>) -> Self {
        Self {
            workspace: workspace.into(),
            seed: crate::callpath::DEFAULT_SEED,
            max_parallel: 4,
            task_timeout: crate::testgen::DEFAULT_TASK_TIMEOUT,
            harness: HarnessOptions::default(),
            judge: JudgeOptions::default(),
            only: Vec::new(),
            labels: None,
        }
    }

    fn selects(&self, pair_id: &str, task_id: &str) -> bool {
        self.only.is_empty() || self.only.iter().any(|o| o == task_id || *o == format!("{pair_id}/{task_id}"))
    }
}

/// What a phase did. Any failure makes the CLI exit with status 2.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhaseReport {
    pub completed: usize,
    pub failures: Vec<String>,
}

impl PhaseReport {
    fn absorb(&mut self, r: Result<usize, String>) {
        match r {
            Ok(n) => self.completed += n,
            Err(e) => self.failures.push(e),
        }
    }

    fn merge(&mut self, other: PhaseReport) {
        self.completed += other.completed;
        self.failures.extend(other.failures);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SinkSummary {
    pub index: usize,
    pub sink: String,
    pub paths_file: String,
    pub transcript: String,
    pub reported: usize,
    pub verified: usize,
    pub error: Option<String>,
}

/// `tests/tasks.json`: the Phase I result for one pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisFile {
    pub pair_id: String,
    pub seed: u64,
    pub sinks: Vec<SinkSummary>,
    pub tasks: Vec<TaskSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub task_id: String,
    pub attempts: u32,
    pub compiled_claim: Claim,
    pub demonstrated_claim: Claim,
    pub test_file: Option<String>,
    pub modified_sources: bool,
    pub error: Option<String>,
}

/// `report/outcomes.json`: the per-task inputs to the metrics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomesFile {
    pub outcomes: Vec<TaskOutcome>,
    /// Tasks left out of the metrics for lack of a ground-truth label.
    pub unlabeled: Vec<String>,
    pub callpaths: CallPathStats,
}

fn pool(max_parallel: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(max_parallel.max(1))
        .build()
        .expect("thread pool")
}

fn tasks_path(pws: &PairWorkspace) -> PathBuf {
    pws.tests().join("tasks.json")
}

fn required<T: serde::de::DeserializeOwned>(path: &Path, ws: &Path) -> Result<T, String> {
    if !path.exists() {
        let shown = path.strip_prefix(ws).unwrap_or(path);
        return Err(format!("missing {}", shown.display()));
    }
    read_json(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn workspaces(manifest: &Manifest, opts: &PipelineOptions) -> io::Result<Vec<(ProgramPair, PairWorkspace)>> {
    manifest
        .pairs
        .iter()
        .map(|p| Ok((p.clone(), init_workspace(p, &opts.workspace)?)))
        .collect()
}

fn analyze_pair(pair: &ProgramPair, pws: &PairWorkspace, backends: &Backends, opts: &PipelineOptions) -> Result<usize, String> {
    let mut sinks = Vec::new();
    let mut verified: Vec<CallPath> = Vec::new();
    let mut errors = Vec::new();
    for (i, sink) in pair.vulnerability.vulnerable_api_list.iter().enumerate() {
        let k = i + 1;
        let prompt = render_callpath_prompt(pair, sink).map_err(|e| e.to_string())?;
        let prompt_file = pws.prompts().join(format!("callpath-{k}.prompt.txt"));
        fs::write(&prompt_file, &prompt).map_err(|e| e.to_string())?;
        let workdir = pws.prompts().join(format!("callpath-{k}.worktree"));
        fresh_copy(&pair.app_root, &workdir).map_err(|e| e.to_string())?;
        let transcript_path = pws.transcripts().join(format!("callpath-{k}.txt"));
        let key = format!("{}/callpath/{k}", pair.pair_id);
        let result = backends.agent.run_agent(&AgentRequest {
            key: &key,
            prompt: &prompt,
            prompt_file: &prompt_file,
            workdir: &workdir,
            transcript_path: &transcript_path,
            timeout: opts.task_timeout,
        });
        let (transcript, error) = match result {
            Ok(t) => (t, None),
            Err(e) => {
                warn!(key = %key, error = %e, "call-path analysis failed");
                errors.push(format!("{key}: {e}"));
                (fs::read_to_string(&transcript_path).unwrap_or_default(), Some(e.to_string()))
            }
        };
        let parsed = parse_agent_paths(&transcript, pair);
        let mut seen = BTreeSet::new();
        let mut paths = Vec::new();
        for p in parsed.paths {
            if seen.insert(p.identity()) {
                paths.push(verify_path(&p, &pair.app_root).map_err(|e| e.to_string())?);
            }
        }
        let ok = paths.iter().filter(|p| p.verification.is_verified()).count();
        verified.extend(paths.iter().filter(|p| p.verification.is_verified()).cloned());
        let paths_file = pws.prompts().join(format!("callpath-{k}.paths.json"));
        write_json(
            &paths_file,
            &PathsFile {
                sink: sink.clone(),
                paths: paths.clone(),
                diagnostics: parsed.diagnostics,
            },
        )
        .map_err(|e| e.to_string())?;
        sinks.push(SinkSummary {
            index: k,
            sink: sink.to_string(),
            paths_file: pws.relative(&paths_file),
            transcript: pws.relative(&transcript_path),
            reported: paths.len(),
            verified: ok,
            error,
        });
    }

    let tasks = sample_tasks(&verified, opts.seed)
        .iter()
        .enumerate()
        .map(|(i, p)| TaskSpec::new(pair, format!("task-{}", i + 1), p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| format!("{}: {e}", pair.pair_id))?;
    let n = tasks.len();
    write_json(
        &tasks_path(pws),
        &AnalysisFile {
            pair_id: pair.pair_id.clone(),
            seed: opts.seed,
            sinks,
            tasks,
        },
    )
    .map_err(|e| e.to_string())?;
    info!(pair = %pair.pair_id, tasks = n, "analysis done");
    if errors.is_empty() {
        Ok(n)
    } else {
        Err(errors.join("; "))
    }
}

/// Phase I: locate and screen call paths, then sample one task per
/// source method.
pub fn analyze(manifest: &Manifest, backends: &Backends, opts: &PipelineOptions) -> io::Result<PhaseReport> {
    let pairs = workspaces(manifest, opts)?;
    let results: Vec<Result<usize, String>> = pool(opts.max_parallel).install(|| {
        pairs
            .par_iter()
            .map(|(pair, pws)| analyze_pair(pair, pws, backends, opts).map_err(|e| format!("{}: {e}", pair.pair_id)))
            .collect()
    });
    let mut report = PhaseReport::default();
    results.into_iter().for_each(|r| report.absorb(r));
    Ok(report)
}

fn load_tasks(pairs: &[(ProgramPair, PairWorkspace)], opts: &PipelineOptions) -> (Vec<(usize, TaskSpec)>, PhaseReport) {
    let mut report = PhaseReport::default();
    let mut tasks = Vec::new();
    for (i, (pair, pws)) in pairs.iter().enumerate() {
        match required::<AnalysisFile>(&tasks_path(pws), &opts.workspace) {
            Ok(a) => tasks.extend(
                a.tasks
                    .into_iter()
                    .filter(|t| opts.selects(&pair.pair_id, &t.task_id))
                    .map(|t| (i, t)),
            ),
            Err(e) => report.failures.push(format!("{}: {e}", pair.pair_id)),
        }
    }
    (tasks, report)
}

fn write_session_index(pair: &ProgramPair, pws: &PairWorkspace, opts: &PipelineOptions) -> Result<(), String> {
    let analysis: AnalysisFile = required(&tasks_path(pws), &opts.workspace)?;
    let index: Vec<SessionSummary> = analysis
        .tasks
        .iter()
        .filter_map(|t| load_session(pws, &t.task_id).ok())
        .map(|s| SessionSummary {
            task_id: s.task.task_id.clone(),
            attempts: s.attempts,
            compiled_claim: s.critique.compiled_claim,
            demonstrated_claim: s.critique.demonstrated_claim,
            test_file: s.test_file.as_ref().map(|t| t.rel_path.clone()),
            modified_sources: s.modified_sources,
            error: s.error.clone(),
        })
        .collect();
    write_json(&pws.tests().join("sessions.json"), &index).map_err(|e| format!("{}: {e}", pair.pair_id))
}

/// Phase II: one agent session per task.
pub fn generate(manifest: &Manifest, backends: &Backends, opts: &PipelineOptions) -> io::Result<PhaseReport> {
    let pairs = workspaces(manifest, opts)?;
    let (tasks, mut report) = load_tasks(&pairs, opts);
    let gen = GenerationOptions {
        timeout: opts.task_timeout,
    };
    let results: Vec<Result<usize, String>> = pool(opts.max_parallel).install(|| {
        tasks
            .par_iter()
            .map(|(i, task)| {
                let (pair, pws) = &pairs[*i];
                match run_generation(task, pair, backends.agent.as_ref(), pws, &gen) {
                    Ok(s) if s.error.is_some() => Err(format!("{}: {}", task.key(), s.error.unwrap_or_default())),
                    Ok(_) => Ok(1),
                    Err(e) => Err(format!("{}: {e}", task.key())),
                }
            })
            .collect()
    });
    results.into_iter().for_each(|r| report.absorb(r));
    for (pair, pws) in &pairs {
        if tasks_path(pws).exists() {
            if let Err(e) = write_session_index(pair, pws, opts) {
                report.failures.push(e);
            }
        }
    }
    Ok(report)
}

fn record_path(pws: &PairWorkspace, task_id: &str) -> PathBuf {
    pws.logs().join(format!("{task_id}.record.json"))
}

fn session_test(pws: &PairWorkspace, task: &TaskSpec, ws: &Path) -> Result<Option<(TestFile, PathBuf)>, String> {
    let path = pws.task_dir(&task.task_id).join("session.json");
    if !path.exists() {
        return Err(format!("{}: missing {}", task.key(), path.strip_prefix(ws).unwrap_or(&path).display()));
    }
    let s = load_session(pws, &task.task_id).map_err(|e| format!("{}: {e}", task.key()))?;
    Ok(s.test_file.map(|t| (t, pws.root.join(&s.worktree))))
}

/// Phase III: build and run each generated test.
pub fn execute(manifest: &Manifest, opts: &PipelineOptions) -> io::Result<PhaseReport> {
    let pairs = workspaces(manifest, opts)?;
    let (tasks, mut report) = load_tasks(&pairs, opts);
    let results: Vec<Result<usize, String>> = pool(opts.max_parallel).install(|| {
        tasks
            .par_iter()
            .map(|(i, task)| {
                let (pair, pws) = &pairs[*i];
                match session_test(pws, task, &opts.workspace)? {
                    None => {
                        info!(task = %task.key(), "no test file; nothing to run");
                        Ok(0)
                    }
                    Some((test, worktree)) => run_test(pair, &test, &worktree, pws, &task.task_id, &opts.harness)
                        .map(|_| 1)
                        .map_err(|e| format!("{}: {e}", task.key())),
                }
            })
            .collect()
    });
    results.into_iter().for_each(|r| report.absorb(r));
    Ok(report)
}

/// Phase IV: ask the judge about every executed test.
pub fn assess(manifest: &Manifest, backends: &Backends, opts: &PipelineOptions) -> io::Result<PhaseReport> {
    let pairs = workspaces(manifest, opts)?;
    let (tasks, mut report) = load_tasks(&pairs, opts);
    let results: Vec<Result<usize, String>> = pool(opts.max_parallel).install(|| {
        tasks
            .par_iter()
            .map(|(i, task)| {
                let (pair, pws) = &pairs[*i];
                let Some((test, worktree)) = session_test(pws, task, &opts.workspace)? else {
                    return Ok(0);
                };
                let record: ExecutionRecord = required(&record_path(pws, &task.task_id), &opts.workspace)
                    .map_err(|e| format!("{}: {e}", task.key()))?;
                let input = load_assessment_input(pair, pws, &worktree, &test, &record)
                    .map_err(|e| format!("{}: {e}", task.key()))?;
                let v = judge(&input, backends.llm.as_ref(), pws, &task.task_id, &opts.judge)
                    .map_err(|e| format!("{}: {e}", task.key()))?;
                match v.error {
                    Some(e) if v.tool_failure => Err(format!("{}: judge failed: {e}", task.key())),
                    _ => Ok(1),
                }
            })
            .collect()
    });
    results.into_iter().for_each(|r| report.absorb(r));
    Ok(report)
}

struct PairOutcomes {
    outcomes: Vec<TaskOutcome>,
    unlabeled: Vec<String>,
    stats: CallPathStats,
}

fn collect_pair(pair: &ProgramPair, pws: &PairWorkspace, labels: &Labels, opts: &PipelineOptions) -> Result<PairOutcomes, String> {
    let analysis: AnalysisFile = required(&tasks_path(pws), &opts.workspace)?;
    let mut stats = CallPathStats::default();
    let mut sources: BTreeSet<String> = BTreeSet::new();
    for s in &analysis.sinks {
        stats.reported += s.reported as u64;
        stats.correct += s.verified as u64;
        let file: PathsFile = required(&pws.root.join(&s.paths_file), &opts.workspace)?;
        for p in file.paths.iter().filter(|p| p.verification.is_verified()) {
            if let Some(src) = p.source() {
                sources.insert(crate::signature::strip_ws(&src.method_signature.to_string()));
            }
        }
    }
    for k in labels.known_entry_points.iter().filter(|k| k.pair == pair.pair_id) {
        stats.known_relevant += 1;
        if sources.contains(&crate::signature::strip_ws(&k.method.to_string())) {
            stats.found_relevant += 1;
        }
    }

    let mut outcomes = Vec::new();
    let mut unlabeled = Vec::new();
    for task in analysis.tasks.iter().filter(|t| opts.selects(&pair.pair_id, &t.task_id)) {
        let key = task.key();
        let Some(label) = labels.by_task.get(&key) else {
            unlabeled.push(key);
            continue;
        };
        let session = load_session(pws, &task.task_id).ok();
        let record: Option<ExecutionRecord> = read_json(&record_path(pws, &task.task_id)).ok();
        let verdict = load_verdict(pws, &task.task_id).ok().map(|v| v.verdict);
        let compiled = label
            .compiled
            .unwrap_or_else(|| record.as_ref().is_some_and(|r| r.build_outcome == BuildOutcome::Compiled));
        outcomes.push(TaskOutcome {
            task_id: key,
            path_length: task.call_path.length,
            attack_category: pair.vulnerability.attack_category,
            compiled: compiled || label.demonstrated,
            demonstrated: label.demonstrated,
            critique: session.as_ref().map(|s| s.critique.clone()).unwrap_or_default(),
            verdict,
            attempts: session.map_or(0, |s| s.attempts),
        });
    }
    Ok(PairOutcomes {
        outcomes,
        unlabeled,
        stats,
    })
}

fn add_stats(a: &mut CallPathStats, b: CallPathStats) {
    a.reported += b.reported;
    a.correct += b.correct;
    a.known_relevant += b.known_relevant;
    a.found_relevant += b.found_relevant;
}

fn write_report(dir: &Path, outcomes: Vec<TaskOutcome>, unlabeled: Vec<String>, stats: CallPathStats) -> io::Result<()> {
    let report = compute(&outcomes, Some(stats));
    emit_report(&report, TOOL_NAME, dir)?;
    write_json(
        &dir.join("outcomes.json"),
        &OutcomesFile {
            outcomes,
            unlabeled,
            callpaths: stats,
        },
    )
}

/// Metrics per pair and over the whole manifest.
pub fn report(manifest: &Manifest, opts: &PipelineOptions) -> io::Result<PhaseReport> {
    let pairs = workspaces(manifest, opts)?;
    let mut phase = PhaseReport::default();
    let label_path = opts.labels.clone().or_else(|| manifest.labels.clone());
    let labels = match &label_path {
        Some(p) => match load_labels(p) {
            Ok(l) => l,
            Err(e) => {
                phase.failures.push(e.to_string());
                return Ok(phase);
            }
        },
        None => {
            warn!("no labels file; every task is unlabeled");
            Labels::default()
        }
    };

    let mut all = Vec::new();
    let mut all_unlabeled = Vec::new();
    let mut all_stats = CallPathStats::default();
    for (pair, pws) in &pairs {
        match collect_pair(pair, pws, &labels, opts) {
            Ok(p) => {
                write_report(&pws.report(), p.outcomes.clone(), p.unlabeled.clone(), p.stats)?;
                all.extend(p.outcomes);
                all_unlabeled.extend(p.unlabeled);
                add_stats(&mut all_stats, p.stats);
                phase.completed += 1;
            }
            Err(e) => phase.failures.push(format!("{}: {e}", pair.pair_id)),
        }
    }
    if !all_unlabeled.is_empty() {
        warn!(count = all_unlabeled.len(), "tasks without labels were left out of the metrics");
    }
    write_report(&opts.workspace.join("report"), all, all_unlabeled, all_stats)?;
    Ok(phase)
}

/// All four phases and the report, in order. Later phases still run
/// after failures in earlier ones, on whatever was produced.
pub fn run_all(manifest: &Manifest, backends: &Backends, opts: &PipelineOptions) -> io::Result<PhaseReport> {
    let mut total = PhaseReport::default();
    total.merge(analyze(manifest, backends, opts)?);
    total.merge(generate(manifest, backends, opts)?);
    total.merge(execute(manifest, opts)?);
    total.merge(assess(manifest, backends, opts)?);
    total.merge(report(manifest, opts)?);
    Ok(total)
}
