mod config;
mod sources;

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use jitflow_core::continual::{write_metrics_csv, write_predictions_csv, write_steps_jsonl};
use jitflow_core::corpus::{self, project_stats, total_stats, write_corpus, CorpusIndex};
use jitflow_core::learner::{ExternalLearner, LearnerCommand};
use jitflow_core::llmbridge::{self, build_prompt, ChatClient, Job, ResponseStore};
use jitflow_core::localization::{aggregate, write_report_csv, LegacyTopK};
use jitflow_core::synth::{self, SynthConfig};
use jitflow_core::{run, Commit, LearnerHandle, MetricOptions, ProjectStats, RunMode};
use serde::Serialize;
use serde_json::json;

use config::{ExperimentConfig, ReportFormat};
use sources::{load_rankings, read_positive_hits, RankingSource};

#[derive(Parser)]
#[command(
    name = "jitflow",
    version,
    about = "Latency-aware continual JIT defect prediction and line-level localization scoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convert a raw distribution (CSV metrics + optional diff JSONL) or a canonical corpus into a canonical corpus
    Ingest(IngestArgs),
    /// Print per-project defect-inducing / clean counts
    Stats { corpus: PathBuf },
    /// Within-project continual run
    RunWp(RunArgs),
    /// Cross-project continual run
    RunCp(RunArgs),
    /// Score line rankings with Recall@20%, Effort@20%, IFA and Top-k
    EvalLoc(EvalArgs),
    /// Export false positives and false negatives of line rankings
    ExtractErrors(ExtractArgs),
    /// Print the localization prompt for one commit
    Prompt {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        commit: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-score recorded model responses
    Replay(ReplayArgs),
    /// Query a chat-completions endpoint and record its responses
    Localize(LocalizeArgs),
    /// Write a seeded synthetic corpus
    Synth(SynthArgs),
    /// Serve the external-learner protocol on stdin/stdout with the builtin learner
    #[command(hide = true)]
    ServeLearner {
        #[arg(long, default_value_t = 1024)]
        dim: usize,
    },
}

#[derive(Args)]
struct IngestArgs {
    /// Metrics CSV or canonical corpus (.jsonl)
    input: PathBuf,
    /// Line-level diffs keyed by commit hash (raw input only)
    #[arg(long)]
    diffs: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Target project
    #[arg(long)]
    project: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    batch_commits: Option<usize>,
    #[arg(long)]
    latency_days: Option<u32>,
    #[arg(long)]
    fading: Option<f64>,
    /// `builtin` or an external learner command line
    #[arg(long)]
    learner: Option<String>,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// JSONL rankings: {"commit_id", "entries":[{"file"?, "line", "content"?, "score"}]}
    #[arg(long, conflicts_with = "responses")]
    rankings: Option<PathBuf>,
    /// Directory of recorded model responses
    #[arg(long)]
    responses: Option<PathBuf>,
    #[arg(long, requires = "responses")]
    model: Option<String>,
    #[arg(long, default_value_t = 0)]
    run_index: u32,
    /// Run predictions CSV; only correctly predicted positives are scored
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Extra Top-k cut-off
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long, value_enum, default_value_t = LegacyMode::Capped)]
    legacy_top_k: LegacyMode,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum LegacyMode {
    Capped,
    Literal,
}

impl From<LegacyMode> for LegacyTopK {
    fn from(m: LegacyMode) -> Self {
        match m {
            LegacyMode::Capped => LegacyTopK::Capped,
            LegacyMode::Literal => LegacyTopK::Literal,
        }
    }
}

#[derive(Args, Serialize)]
struct ExtractArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, conflicts_with = "responses")]
    rankings: Option<PathBuf>,
    #[arg(long)]
    responses: Option<PathBuf>,
    #[arg(long, requires = "responses")]
    model: Option<String>,
    #[arg(long, default_value_t = 0)]
    run_index: u32,
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Lowest score a clean line needs to count as a false positive
    #[arg(long, default_value_t = 1.0)]
    min_score: f64,
    /// Also write seeded random samples of this size
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ReplayArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value_t = 0)]
    run_index: u32,
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long, value_enum, default_value_t = LegacyMode::Capped)]
    legacy_top_k: LegacyMode,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LocalizeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: PathBuf,
    /// Response store directory
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Omit to keep the provider default
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_concurrent: Option<usize>,
    /// Environment variable holding the API key
    #[arg(long)]
    api_key_env: Option<String>,
    /// Repetitions per commit
    #[arg(long, default_value_t = 1)]
    runs: u32,
    /// Commit ids (comma separated); defaults to every defect-inducing commit
    #[arg(long, value_delimiter = ',')]
    commits: Vec<String>,
    /// Restrict to correctly predicted positives of a run
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    commits_per_project: usize,
    #[arg(long, value_delimiter = ',', default_value = "alpha,beta")]
    projects: Vec<String>,
}

/// Failures that exit with status 2 and a usage line.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn existing(path: &Path, what: &str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path.to_path_buf())
    } else {
        Err(UsageError(format!("{what} `{}` does not exist", path.display())).into())
    }
}

fn subcommand_name(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::Ingest(_) => "ingest",
        Cmd::Stats { .. } => "stats",
        Cmd::RunWp(_) => "run-wp",
        Cmd::RunCp(_) => "run-cp",
        Cmd::EvalLoc(_) => "eval-loc",
        Cmd::ExtractErrors(_) => "extract-errors",
        Cmd::Prompt { .. } => "prompt",
        Cmd::Replay(_) => "replay",
        Cmd::Localize(_) => "localize",
        Cmd::Synth(_) => "synth",
        Cmd::ServeLearner { .. } => "serve-learner",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let name = subcommand_name(&cli.command);
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}\n");
            let mut root = Cli::command();
            root.build();
            if let Some(sub) = root.find_subcommand_mut(name) {
                eprintln!("{}", sub.render_usage());
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Ingest(a) => cmd_ingest(a),
        Cmd::Stats { corpus } => {
            let commits = read_corpus(&corpus)?;
            print_stats(&mut io::stdout().lock(), &project_stats(&commits))?;
            Ok(())
        }
        Cmd::RunWp(a) => cmd_run(RunMode::Wp, a),
        Cmd::RunCp(a) => cmd_run(RunMode::Cp, a),
        Cmd::EvalLoc(a) => cmd_eval_loc(a),
        Cmd::ExtractErrors(a) => cmd_extract_errors(a),
        Cmd::Prompt {
            corpus,
            commit,
            out,
        } => cmd_prompt(&corpus, &commit, out.as_deref()),
        Cmd::Replay(a) => cmd_replay(a),
        Cmd::Localize(a) => cmd_localize(a),
        Cmd::Synth(a) => cmd_synth(a),
        Cmd::ServeLearner { dim } => {
            let stdin = io::stdin();
            jitflow_core::learner::external::serve(stdin.lock(), io::stdout().lock(), dim)?;
            Ok(())
        }
    }
}

fn read_corpus(path: &Path) -> Result<Vec<Commit>> {
    let path = existing(path, "corpus")?;
    let ingested =
        corpus::ingest(&path).with_context(|| format!("reading corpus {}", path.display()))?;
    for w in &ingested.warnings {
        log::warn!("{w}");
    }
    Ok(ingested.commits)
}

fn print_stats<W: Write>(w: &mut W, stats: &[ProjectStats]) -> io::Result<()> {
    writeln!(
        w,
        "{:<28} {:>10} {:>10} {:>8}",
        "project", "defective", "clean", "ratio"
    )?;
    let total = total_stats(stats);
    for s in stats.iter().chain(std::iter::once(&total)) {
        writeln!(
            w,
            "{:<28} {:>10} {:>10} {:>7.2}%",
            s.project,
            s.defect_inducing_count,
            s.clean_count,
            s.ratio * 100.0
        )?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let input = existing(&a.input, "input")?;
    let is_csv = input
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let ingested = if is_csv {
        let features =
            File::open(&input).with_context(|| format!("opening {}", input.display()))?;
        let diffs = match &a.diffs {
            Some(p) => Some(File::open(existing(p, "diffs file")?)?),
            None => None,
        };
        corpus::raw::convert(features, diffs).context("converting raw distribution")?
    } else {
        if a.diffs.is_some() {
            bail!(UsageError("--diffs only applies to CSV input".into()));
        }
        corpus::ingest(&input).context("reading canonical corpus")?
    };
    for w in &ingested.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(out) = &a.out {
        let mut w = create(out)?;
        write_corpus(&mut w, &ingested.commits)?;
        w.flush()?;
    }
    print_stats(&mut io::stdout().lock(), &project_stats(&ingested.commits))?;
    Ok(())
}

fn resolve_run_config(mode: RunMode, a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(
        a.config
            .as_deref()
            .map(|p| existing(p, "config"))
            .transpose()?
            .as_deref(),
    )?;
    if let Some(c) = &a.corpus {
        cfg.corpus = Some(c.clone());
    }
    if let Some(o) = &a.out {
        cfg.out = Some(o.clone());
    }
    if let Some(s) = a.seed {
        cfg.seed = Some(s);
    }
    if let Some(l) = &a.learner {
        cfg.learner = l.clone();
    }
    if let Some(p) = &a.project {
        cfg.run.project = p.clone();
    }
    if let Some(b) = a.batch_commits {
        cfg.run.batch_commits = b;
    }
    if let Some(d) = a.latency_days {
        cfg.run.latency.waiting_days = d;
    }
    if let Some(f) = a.fading {
        cfg.run.fading_factor = f;
    }
    cfg.run.mode = mode;
    let Some(seed) = cfg.seed else {
        bail!(UsageError(
            "a seed is required (--seed or `seed` in the config file)".into()
        ));
    };
    cfg.run.seed = seed;
    if cfg.corpus.is_none() {
        bail!(UsageError(
            "no corpus given (--corpus or `corpus` in the config file)".into()
        ));
    }
    if cfg.out.is_none() {
        bail!(UsageError(
            "no output directory given (--out or `out` in the config file)".into()
        ));
    }
    if cfg.run.project.is_empty() {
        bail!(UsageError(
            "no project given (--project or `run.project` in the config file)".into()
        ));
    }
    cfg.run.validate()?;
    Ok(cfg)
}

fn open_learner(spec: &str, dim: usize) -> Result<LearnerHandle> {
    if spec == "builtin" {
        return Ok(LearnerHandle::builtin(dim));
    }
    let command = LearnerCommand::parse(spec)?;
    let child = ExternalLearner::spawn(command).map_err(|e| match e {
        jitflow_core::Error::LearnerUnavailable {
            message,
            diagnostic,
        } => anyhow!("{message}: {diagnostic}"),
        other => other.into(),
    })?;
    Ok(LearnerHandle::External(child))
}

fn cmd_run(mode: RunMode, a: RunArgs) -> Result<()> {
    let cfg = resolve_run_config(mode, &a)?;
    let corpus_path = cfg.corpus.clone().expect("checked");
    let out = cfg.out.clone().expect("checked");
    let commits = read_corpus(&corpus_path)?;
    let mut learner = open_learner(&cfg.learner, cfg.run.joint_dim())?;
    let output = run(&commits, &cfg.run, &mut learner).map_err(|e| match e {
        jitflow_core::Error::LearnerUnavailable {
            message,
            diagnostic,
        } => {
            anyhow!("learner `{}` failed: {message}\n{diagnostic}", cfg.learner)
        }
        other => other.into(),
    })?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = create(&out.join("steps.jsonl"))?;
    write_steps_jsonl(&mut w, &output.steps)?;
    w.flush()?;
    if cfg.wants(ReportFormat::Csv) {
        let mut w = create(&out.join("metrics.csv"))?;
        write_metrics_csv(&mut w, &output.steps)?;
        w.flush()?;
        let mut w = create(&out.join("predictions.csv"))?;
        write_predictions_csv(&mut w, &output.predictions)?;
        w.flush()?;
    }
    let summary = output.summary();
    write_json(
        &out.join("summary.json"),
        &json!({
            "config": cfg,
            "summary": summary,
            "audit": output.audit,
        }),
    )?;
    let m = summary.final_metrics;
    println!(
        "{} {}: scored {} commits, {} steps ({} skipped); R0 {:.4} R1 {:.4} G-Mean {:.4} |R1-R0| {:.4}",
        if mode == RunMode::Wp { "WP" } else { "CP" },
        summary.project,
        summary.commits_scored,
        summary.steps,
        summary.skipped_steps,
        m.r0,
        m.r1,
        m.gmean,
        m.abs_diff
    );
    if !output.audit.violations.is_empty() {
        bail!(
            "latency audit found {} violations; see summary.json",
            output.audit.violations.len()
        );
    }
    Ok(())
}

fn ranking_source(
    rankings: &Option<PathBuf>,
    responses: &Option<PathBuf>,
    model: &Option<String>,
    run_index: u32,
) -> Result<RankingSource> {
    match (rankings, responses) {
        (Some(r), None) => Ok(RankingSource::Rankings(existing(r, "rankings file")?)),
        (None, Some(d)) => Ok(RankingSource::Responses {
            dir: existing(d, "responses directory")?,
            model: model.clone(),
            run_index,
        }),
        _ => Err(UsageError("give exactly one of --rankings or --responses".into()).into()),
    }
}

fn positive_filter(predictions: &Option<PathBuf>) -> Result<Option<BTreeSet<String>>> {
    predictions
        .as_ref()
        .map(|p| read_positive_hits(&existing(p, "predictions file")?))
        .transpose()
}

fn write_loc_report<T: Serialize>(
    out: &Path,
    snapshot: &T,
    rankings: &[jitflow_core::CommitRanking],
    filter: Option<&BTreeSet<String>>,
    opts: &MetricOptions,
    warnings: &[String],
) -> Result<jitflow_core::LocalizationReport> {
    let report = aggregate(rankings, filter, opts);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_json(
        &out.join("report.json"),
        &json!({ "config": snapshot, "report": report, "warnings": warnings }),
    )?;
    let mut w = create(&out.join("report.csv"))?;
    write_report_csv(&mut w, &report)?;
    w.flush()?;
    match &report.means {
        Some(m) => println!(
            "{} commits: Top-5 {:.4} Top-10 {:.4} Recall@20% {:.4} Effort@20% {:.4} IFA {:.4}",
            report.rows.len(),
            m.top5,
            m.top10,
            m.recall_at_20,
            m.effort_at_20,
            m.ifa
        ),
        None => println!("no eligible commits"),
    }
    Ok(report)
}

fn cmd_eval_loc(a: EvalArgs) -> Result<()> {
    let commits = read_corpus(&a.corpus)?;
    let index = CorpusIndex::new(&commits);
    let source = ranking_source(&a.rankings, &a.responses, &a.model, a.run_index)?;
    let filter = positive_filter(&a.predictions)?;
    let (rankings, warnings) = load_rankings(&source, &index)?;
    let opts = MetricOptions {
        legacy: a.legacy_top_k.into(),
        extra_k: a.top_k,
        ..MetricOptions::default()
    };
    write_loc_report(&a.out, &a, &rankings, filter.as_ref(), &opts, &warnings)?;
    Ok(())
}

fn cmd_replay(a: ReplayArgs) -> Result<()> {
    let commits = read_corpus(&a.corpus)?;
    let index = CorpusIndex::new(&commits);
    let source = RankingSource::Responses {
        dir: existing(&a.responses, "responses directory")?,
        model: a.model.clone(),
        run_index: a.run_index,
    };
    let filter = positive_filter(&a.predictions)?;
    let (rankings, warnings) = load_rankings(&source, &index)?;
    let opts = MetricOptions {
        legacy: a.legacy_top_k.into(),
        extra_k: a.top_k,
        ..MetricOptions::default()
    };
    write_loc_report(&a.out, &a, &rankings, filter.as_ref(), &opts, &warnings)?;
    let mut w = create(&a.out.join("rankings.jsonl"))?;
    for r in &rankings {
        writeln!(w, "{}", serde_json::to_string(r)?)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_extract_errors(a: ExtractArgs) -> Result<()> {
    let commits = read_corpus(&a.corpus)?;
    let index = CorpusIndex::new(&commits);
    let source = ranking_source(&a.rankings, &a.responses, &a.model, a.run_index)?;
    let filter = positive_filter(&a.predictions)?;
    let (mut rankings, warnings) = load_rankings(&source, &index)?;
    if let Some(f) = &filter {
        rankings.retain(|r| f.contains(&r.commit_id));
    }
    let fp = llmbridge::extract_false_positives(&rankings, a.min_score);
    let fneg = llmbridge::extract_false_negatives(&rankings, &index);
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let write_cases = |name: &str, cases: &[llmbridge::ErrorCase]| -> Result<()> {
        let mut w = create(&a.out.join(name))?;
        llmbridge::write_cases_csv(&mut w, cases)?;
        w.flush()?;
        Ok(())
    };
    write_cases("false_positives.csv", &fp)?;
    write_cases("false_negatives.csv", &fneg)?;
    let mut sampled = None;
    if let Some(n) = a.sample_size {
        // independent streams for the two populations, both from one seed
        let fp_s = llmbridge::sample_cases(&fp, n, a.seed);
        let fn_s = llmbridge::sample_cases(&fneg, n, a.seed.wrapping_add(1));
        write_cases("false_positives_sample.csv", &fp_s)?;
        write_cases("false_negatives_sample.csv", &fn_s)?;
        sampled = Some((fp_s.len(), fn_s.len()));
    }
    write_json(
        &a.out.join("errors.json"),
        &json!({
            "config": a,
            "false_positives": fp.len(),
            "false_negatives": fneg.len(),
            "sampled": sampled.map(|(p, n)| json!({"false_positives": p, "false_negatives": n})),
            "warnings": warnings,
        }),
    )?;
    println!(
        "{} false positives, {} false negatives",
        fp.len(),
        fneg.len()
    );
    Ok(())
}

fn cmd_prompt(corpus: &Path, commit: &str, out: Option<&Path>) -> Result<()> {
    let commits = read_corpus(corpus)?;
    let index = CorpusIndex::new(&commits);
    let c = index
        .get(commit)
        .ok_or_else(|| anyhow!("commit `{commit}` is not in the corpus"))?;
    let prompt = build_prompt(c)?;
    match out {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(prompt.as_bytes())?;
            w.flush()?;
        }
        None => io::stdout().lock().write_all(prompt.as_bytes())?,
    }
    Ok(())
}

fn cmd_localize(a: LocalizeArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(
        a.config
            .as_deref()
            .map(|p| existing(p, "config"))
            .transpose()?
            .as_deref(),
    )?
    .endpoint;
    if let Some(u) = a.base_url {
        cfg.base_url = u;
    }
    if let Some(m) = a.model {
        cfg.model = m;
    }
    if a.temperature.is_some() {
        cfg.temperature = a.temperature;
    }
    if let Some(n) = a.max_concurrent {
        cfg.max_concurrent = n;
    }
    if a.api_key_env.is_some() {
        cfg.api_key_env = a.api_key_env;
    }
    let commits = read_corpus(&a.corpus)?;
    let index = CorpusIndex::new(&commits);
    let mut ids: Vec<String> = if !a.commits.is_empty() {
        a.commits.clone()
    } else if let Some(p) = &a.predictions {
        read_positive_hits(&existing(p, "predictions file")?)?
            .into_iter()
            .collect()
    } else {
        commits
            .iter()
            .filter(|c| c.is_defect_inducing)
            .map(|c| c.commit_id.clone())
            .collect()
    };
    ids.sort();
    ids.dedup();
    let store = ResponseStore::open(&a.store)?;
    let client = ChatClient::new(cfg)?;
    let mut jobs = Vec::new();
    for id in &ids {
        let c = index
            .get(id)
            .ok_or_else(|| anyhow!("commit `{id}` is not in the corpus"))?;
        let prompt = build_prompt(c)?;
        for run_index in 0..a.runs {
            if store
                .path_for(id, &client.config().model, run_index)
                .exists()
            {
                continue;
            }
            jobs.push(Job {
                commit_id: id.clone(),
                run_index,
                prompt: prompt.clone(),
            });
        }
    }
    let results = client.complete_all(&jobs);
    let mut failed = 0;
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(rec) => {
                store.save(&rec)?;
            }
            Err(e) => {
                failed += 1;
                eprintln!("{} run {}: {e}", job.commit_id, job.run_index);
            }
        }
    }
    println!(
        "{} requests, {} failed, store {}",
        jobs.len(),
        failed,
        store.dir().display()
    );
    if failed > 0 {
        bail!("{failed} requests failed");
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        projects: a.projects,
        commits_per_project: a.commits_per_project,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let commits = synth::generate(&cfg)?;
    let mut w = create(&a.out)?;
    write_corpus(&mut w, &commits)?;
    w.flush()?;
    print_stats(&mut io::stdout().lock(), &project_stats(&commits))?;
    Ok(())
}
