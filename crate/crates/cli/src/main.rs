use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{ArgGroup, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use tracing_subscriber::EnvFilter;

use povgen_core::backends::{load_backends, Backends, InvocationLimiter};
use povgen_core::corpus::{load_manifest, Manifest};
use povgen_core::harness::ToolchainConfig;
use povgen_core::pipeline::{self, PhaseReport, PipelineOptions};

#[derive(Parser, Debug)]
#[command(name = "povgen", version, about = "Generate and assess proof-of-vulnerability tests for Java projects")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct GlobalArgs {
    /// TOML file supplying defaults for any flag, plus `[toolchain.*]` tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Corpus manifest.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Backend configuration (`[agent]` and `[llm]` tables).
    #[arg(long, global = true)]
    backends: Option<PathBuf>,
    /// Output workspace directory.
    #[arg(long, global = true)]
    workspace: Option<PathBuf>,
    /// Seed for tie-breaking when sampling call paths.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Concurrent tasks and backend invocations.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    max_parallel: Option<u64>,
    /// Agent session timeout in seconds.
    #[arg(long, global = true)]
    task_timeout: Option<u64>,
    /// Build and test timeout in seconds.
    #[arg(long, global = true)]
    build_timeout: Option<u64>,
    /// Bytes of build log passed to the judge.
    #[arg(long, global = true)]
    log_budget: Option<usize>,
    /// Extra judge calls after a backend failure.
    #[arg(long, global = true)]
    judge_retries: Option<u32>,
    /// Ground-truth labels for the report (overrides the manifest's).
    #[arg(long, global = true)]
    labels: Option<PathBuf>,
    /// Restrict to these tasks (`task-N` or `pair/task-N`). Repeatable.
    #[arg(long, global = true)]
    only: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Find call paths from application methods to vulnerable APIs.
    Analyze,
    /// Ask the agent to write a test for each sampled path.
    Generate,
    /// Build and run the generated tests.
    Execute,
    /// Ask the judge whether each test demonstrated the vulnerability.
    Assess,
    /// Compute metrics and write report tables.
    Report,
    /// Run several phases in sequence.
    #[command(group(ArgGroup::new("span").required(true).args(["all", "through"])))]
    Run {
        /// Every phase, then the report.
        #[arg(long)]
        all: bool,
        /// Stop after this phase.
        #[arg(long, value_enum)]
        through: Option<Phase>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
enum Phase {
    Analyze,
    Generate,
    Execute,
    Assess,
    Report,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    manifest: Option<PathBuf>,
    backends: Option<PathBuf>,
    workspace: Option<PathBuf>,
    seed: Option<u64>,
    max_parallel: Option<u64>,
    task_timeout: Option<u64>,
    build_timeout: Option<u64>,
    log_budget: Option<usize>,
    judge_retries: Option<u32>,
    labels: Option<PathBuf>,
    #[serde(default)]
    only: Vec<String>,
    #[serde(default)]
    toolchain: Option<ToolchainConfig>,
}

fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let mut cfg: ConfigFile = toml::from_str(&text).with_context(|| format!("config {} is not valid", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for p in [&mut cfg.manifest, &mut cfg.backends, &mut cfg.workspace, &mut cfg.labels]
        .into_iter()
        .flatten()
    {
        *p = base.join(&*p);
    }
    Ok(cfg)
}

struct Settings {
    manifest: PathBuf,
    backends: Option<PathBuf>,
    opts: PipelineOptions,
}

fn settings(g: GlobalArgs) -> Result<Settings> {
    let cfg = match &g.config {
        Some(p) => load_config(p)?,
        None => ConfigFile::default(),
    };
    let manifest = g
        .manifest
        .or(cfg.manifest)
        .context("no manifest given; pass --manifest or set it in --config")?;
    let workspace = g.workspace.or(cfg.workspace).unwrap_or_else(|| PathBuf::from("pov-workspace"));
    let mut opts = PipelineOptions::new(workspace);
    if let Some(s) = g.seed.or(cfg.seed) {
        opts.seed = s;
    }
    if let Some(n) = g.max_parallel.or(cfg.max_parallel) {
        anyhow::ensure!(n >= 1, "max_parallel must be at least 1");
        opts.max_parallel = n as usize;
    }
    if let Some(t) = g.task_timeout.or(cfg.task_timeout) {
        opts.task_timeout = Duration::from_secs(t);
    }
    if let Some(t) = g.build_timeout.or(cfg.build_timeout) {
        opts.harness.timeout = Duration::from_secs(t);
    }
    if let Some(tc) = cfg.toolchain {
        opts.harness.toolchains = tc;
    }
    if let Some(b) = g.log_budget.or(cfg.log_budget) {
        opts.judge.log_budget = b;
    }
    if let Some(r) = g.judge_retries.or(cfg.judge_retries) {
        opts.judge.retries = r;
    }
    opts.labels = g.labels.or(cfg.labels);
    opts.only = if g.only.is_empty() { cfg.only } else { g.only };
    Ok(Settings {
        manifest,
        backends: g.backends.or(cfg.backends),
        opts,
    })
}

fn backends(s: &Settings) -> Result<Backends> {
    let path = s
        .backends
        .as_ref()
        .context("no backend configuration given; pass --backends or set it in --config")?;
    let limiter = InvocationLimiter::new(s.opts.max_parallel);
    Ok(load_backends(path, limiter)?)
}

fn run_phase(phase: Phase, manifest: &Manifest, s: &Settings, b: Option<&Backends>) -> Result<PhaseReport> {
    let need = || b.context("backends were not loaded");
    let o = &s.opts;
    Ok(match phase {
        Phase::Analyze => pipeline::analyze(manifest, need()?, o)?,
        Phase::Generate => pipeline::generate(manifest, need()?, o)?,
        Phase::Execute => pipeline::execute(manifest, o)?,
        Phase::Assess => pipeline::assess(manifest, need()?, o)?,
        Phase::Report => pipeline::report(manifest, o)?,
    })
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Analyze => "analyze",
        Phase::Generate => "generate",
        Phase::Execute => "execute",
        Phase::Assess => "assess",
        Phase::Report => "report",
    }
}

fn run(cli: Cli) -> Result<bool> {
    let s = settings(cli.global)?;
    let phases: Vec<Phase> = match cli.command {
        Command::Analyze => vec![Phase::Analyze],
        Command::Generate => vec![Phase::Generate],
        Command::Execute => vec![Phase::Execute],
        Command::Assess => vec![Phase::Assess],
        Command::Report => vec![Phase::Report],
        Command::Run { through, .. } => {
            let last = through.unwrap_or(Phase::Report);
            Phase::value_variants().iter().copied().filter(|p| *p <= last).collect()
        }
    };
    let manifest = load_manifest(&s.manifest)?;
    let needs_backends = phases
        .iter()
        .any(|p| matches!(p, Phase::Analyze | Phase::Generate | Phase::Assess));
    let b = if needs_backends { Some(backends(&s)?) } else { None };

    let mut ok = true;
    for phase in phases {
        let r = run_phase(phase, &manifest, &s, b.as_ref())?;
        for f in &r.failures {
            eprintln!("povgen {}: {f}", phase_name(phase));
        }
        eprintln!(
            "povgen {}: {} done, {} failed",
            phase_name(phase),
            r.completed,
            r.failures.len()
        );
        ok &= r.failures.is_empty();
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            eprint!("{text}");
            if !text.contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(2);
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("POVGEN_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("povgen: {e:#}");
            ExitCode::from(2)
        }
    }
}
