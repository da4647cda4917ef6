//! Within-project and cross-project continual runs: test-then-train over the
//! commit stream with latency-respecting training sets.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{fix_time_of, sort_chronologically, Commit, CorpusIndex, Timestamp};
use crate::error::{Error, Result};
use crate::learner::encode::{DEFAULT_LIFT_DIM, DEFAULT_SEMANTIC_DIM};
use crate::learner::{FeatureEncoder, FusedExample, LearnerHandle, TrainConfig};
use crate::prequential::{PrequentialState, StreamMetrics};
use crate::sampling::{resample, BoostFactors, OrbConfig, OrbState};
use crate::stream::{
    build_timeline, pool_label_at, visible_training_set, EventKind, LatencyConfig, PoolLabel,
    StreamState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Wp,
    Cp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub mode: RunMode,
    /// Project whose commits are scored (the target in CP mode).
    pub project: String,
    pub batch_commits: usize,
    pub latency: LatencyConfig,
    pub train: TrainConfig,
    pub orb: OrbConfig,
    pub seed: u64,
    pub fading_factor: f64,
    pub semantic_dim: usize,
    pub lift_dim: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: RunMode::Wp,
            project: String::new(),
            batch_commits: 50,
            latency: LatencyConfig::default(),
            train: TrainConfig::default(),
            orb: OrbConfig::default(),
            seed: 0,
            fading_factor: 0.99,
            semantic_dim: DEFAULT_SEMANTIC_DIM,
            lift_dim: DEFAULT_LIFT_DIM,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_commits == 0 {
            return Err(Error::Config("batch_commits must be at least 1".into()));
        }
        if !(self.fading_factor > 0.0 && self.fading_factor <= 1.0) {
            return Err(Error::Config(format!(
                "fading_factor {} is outside (0, 1]",
                self.fading_factor
            )));
        }
        if self.latency.waiting_days == 0 {
            return Err(Error::Config("waiting_days must be positive".into()));
        }
        if self.semantic_dim + self.lift_dim == 0 {
            return Err(Error::Config("feature dimensions are zero".into()));
        }
        self.train.validate()?;
        self.orb.validate()
    }

    pub fn joint_dim(&self) -> usize {
        self.semantic_dim + self.lift_dim
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step_index: usize,
    pub trigger_time: Timestamp,
    pub bootstrap: bool,
    /// Visible examples before resampling.
    pub train_set_size: usize,
    pub train_set_positives: usize,
    pub resampled_size: usize,
    pub boost: BoostFactors,
    pub metrics_after: StreamMetrics,
    /// True when the visible set was empty and the learner was left alone.
    pub skipped: bool,
    pub checkpoint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub commit_id: String,
    pub time: Timestamp,
    pub true_label: u8,
    pub predicted_label: u8,
    pub score: f64,
    pub checkpoint: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyAudit {
    pub steps_checked: usize,
    pub examples_checked: usize,
    pub violations: Vec<String>,
}

impl LatencyAudit {
    fn check(
        &mut self,
        c: &Commit,
        label: PoolLabel,
        now: Timestamp,
        latency: LatencyConfig,
        scored: Option<&HashSet<String>>,
    ) {
        self.examples_checked += 1;
        match label {
            PoolLabel::Negative if c.author_timestamp > now - latency.waiting_seconds() => {
                self.violations.push(format!(
                    "negative `{}` arrived at {} but trained on at {now}",
                    c.commit_id, c.author_timestamp
                ))
            }
            PoolLabel::Positive if fix_time_of(c).is_none_or(|f| f > now) => {
                self.violations.push(format!(
                    "positive `{}` trained on at {now} before its fix",
                    c.commit_id
                ))
            }
            _ => {}
        }
        if let Some(scored) = scored {
            if !scored.contains(&c.commit_id) {
                self.violations.push(format!(
                    "`{}` trained on at {now} before being scored",
                    c.commit_id
                ));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub config: RunConfig,
    pub learner: String,
    pub steps: Vec<StepRecord>,
    pub predictions: Vec<PredictionRecord>,
    pub final_metrics: StreamMetrics,
    pub audit: LatencyAudit,
}

/// Compact run result for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: RunMode,
    pub project: String,
    pub learner: String,
    pub commits_scored: usize,
    pub steps: usize,
    pub skipped_steps: usize,
    pub bootstrap_steps: usize,
    pub final_metrics: StreamMetrics,
    pub final_checkpoint: String,
    pub latency_violations: usize,
}

impl RunOutput {
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            mode: self.config.mode,
            project: self.config.project.clone(),
            learner: self.learner.clone(),
            commits_scored: self.predictions.len(),
            steps: self.steps.len(),
            skipped_steps: self.steps.iter().filter(|s| s.skipped).count(),
            bootstrap_steps: self.steps.iter().filter(|s| s.bootstrap).count(),
            final_metrics: self.final_metrics,
            final_checkpoint: self
                .steps
                .last()
                .map(|s| s.checkpoint.clone())
                .unwrap_or_default(),
            latency_violations: self.audit.violations.len(),
        }
    }
}

struct Runner<'l> {
    cfg: RunConfig,
    learner: &'l mut LearnerHandle,
    encoder: FeatureEncoder,
    rng: ChaCha8Rng,
    orb: OrbState,
    preq: PrequentialState,
    examples: HashMap<String, FusedExample>,
    scored: HashSet<String>,
    steps: Vec<StepRecord>,
    predictions: Vec<PredictionRecord>,
    audit: LatencyAudit,
}

impl<'l> Runner<'l> {
    fn new(cfg: &RunConfig, learner: &'l mut LearnerHandle) -> Result<Self> {
        cfg.validate()?;
        if let LearnerHandle::Builtin(l) = learner {
            if l.dim() != cfg.joint_dim() {
                return Err(Error::Config(format!(
                    "learner expects {} features but the encoder produces {}",
                    l.dim(),
                    cfg.joint_dim()
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let encoder = FeatureEncoder::new(cfg.semantic_dim, cfg.lift_dim, rng.random());
        Ok(Self {
            cfg: cfg.clone(),
            learner,
            encoder,
            rng,
            orb: OrbState::new(cfg.orb)?,
            preq: PrequentialState::new(cfg.fading_factor)?,
            examples: HashMap::new(),
            scored: HashSet::new(),
            steps: Vec::new(),
            predictions: Vec::new(),
            audit: LatencyAudit::default(),
        })
    }

    fn observe(&mut self, c: &Commit) -> Result<()> {
        let ex = self.encoder.encode_and_observe(c)?;
        self.examples.insert(c.commit_id.clone(), ex);
        Ok(())
    }

    /// Predicts with the current model, scores against ground truth, then
    /// keeps the encoding for later training.
    fn score(&mut self, c: &Commit) -> Result<()> {
        if self.scored.contains(&c.commit_id) {
            return Err(Error::Contract(format!(
                "commit `{}` scored twice",
                c.commit_id
            )));
        }
        let ex = self.encoder.encode_and_observe(c)?;
        let p = self
            .learner
            .predict(std::slice::from_ref(&ex))?
            .pop()
            .ok_or_else(|| Error::Contract("learner returned no prediction".into()))?;
        let truth = u8::from(c.is_defect_inducing);
        self.preq.update(truth, p.label);
        self.orb.observe_prediction(p.label);
        self.predictions.push(PredictionRecord {
            commit_id: c.commit_id.clone(),
            time: c.author_timestamp,
            true_label: truth,
            predicted_label: p.label,
            score: p.score,
            checkpoint: self.learner.checkpoint_id().to_string(),
        });
        self.scored.insert(c.commit_id.clone());
        self.examples.insert(c.commit_id.clone(), ex);
        Ok(())
    }

    fn train_step(
        &mut self,
        now: Timestamp,
        set: &[(&Commit, PoolLabel)],
        bootstrap: bool,
    ) -> Result<()> {
        let step_seed: u64 = self.rng.random();
        let boost = self.orb.boost_factors();
        self.audit.steps_checked += 1;
        let mut batch = Vec::with_capacity(set.len());
        for &(c, label) in set {
            let scored = (c.project == self.cfg.project).then_some(&self.scored);
            self.audit.check(c, label, now, self.cfg.latency, scored);
            let ex = self.examples.get(&c.commit_id).ok_or_else(|| {
                Error::Contract(format!(
                    "`{}` used for training before it arrived",
                    c.commit_id
                ))
            })?;
            batch.push((ex, label.as_u8()));
        }
        let positives = batch.iter().filter(|(_, l)| *l == 1).count();
        let resampled = resample(&batch, boost, step_seed);
        let skipped = resampled.is_empty();
        if !skipped {
            let labeled: Vec<FusedExample> = resampled
                .iter()
                .map(|(ex, l)| (*ex).clone().with_label(*l))
                .collect();
            self.learner.train(&labeled, &self.cfg.train)?;
        }
        self.steps.push(StepRecord {
            step_index: self.steps.len(),
            trigger_time: now,
            bootstrap,
            train_set_size: batch.len(),
            train_set_positives: positives,
            resampled_size: resampled.len(),
            boost,
            metrics_after: self.preq.snapshot(),
            skipped,
            checkpoint: self.learner.checkpoint_id().to_string(),
        });
        Ok(())
    }

    fn finish(self) -> RunOutput {
        RunOutput {
            learner: self.learner.kind().to_string(),
            final_metrics: self.preq.snapshot(),
            config: self.cfg,
            steps: self.steps,
            predictions: self.predictions,
            audit: self.audit,
        }
    }
}

fn sorted_copy(corpus: &[Commit], keep: impl Fn(&Commit) -> bool) -> Vec<Commit> {
    let mut v: Vec<Commit> = corpus.iter().filter(|c| keep(c)).cloned().collect();
    sort_chronologically(&mut v);
    v
}

fn check_mode(cfg: &RunConfig, want: RunMode) -> Result<()> {
    if cfg.mode != want {
        return Err(Error::Config(format!(
            "run config mode is {:?}, expected {want:?}",
            cfg.mode
        )));
    }
    Ok(())
}

/// Within-project run: replays the project's timeline, scoring each arrival
/// before it joins the queue and training every `batch_commits` arrivals on
/// the pool as it stands at that moment.
pub fn run_wp(
    corpus: &[Commit],
    cfg: &RunConfig,
    learner: &mut LearnerHandle,
) -> Result<RunOutput> {
    check_mode(cfg, RunMode::Wp)?;
    let commits = sorted_copy(corpus, |c| c.project == cfg.project);
    if commits.is_empty() {
        return Err(Error::Config(format!(
            "project `{}` has no commits in the corpus",
            cfg.project
        )));
    }
    let index = CorpusIndex::new(&commits);
    let events = build_timeline(&commits, cfg.latency)?;
    let mut runner = Runner::new(cfg, learner)?;
    let mut state = StreamState::default();
    for ev in &events {
        state.apply(ev)?;
        if ev.kind != EventKind::Arrival {
            continue;
        }
        let c = index
            .get(&ev.commit_id)
            .expect("timeline ids come from the corpus");
        runner.score(c)?;
        if state.arrivals % cfg.batch_commits == 0 {
            let set = visible_training_set(&state.pool, &index);
            runner.train_step(ev.at, &set, false)?;
        }
    }
    Ok(runner.finish())
}

/// Training set for a cross-project step at `now`: every pool-eligible target
/// commit, plus other-project commits that arrived in `(last_step, now]` and
/// are pool-eligible at `now`. Corpus order is kept.
pub fn assemble_cp_training_set<'a>(
    index: &CorpusIndex<'a>,
    target: &str,
    now: Timestamp,
    last_step: Option<Timestamp>,
    latency: LatencyConfig,
) -> Vec<(&'a Commit, PoolLabel)> {
    index
        .commits()
        .iter()
        .filter(|c| {
            c.project == target
                || (last_step.is_none_or(|l| c.author_timestamp > l) && c.author_timestamp <= now)
        })
        .filter_map(|c| pool_label_at(c, now, latency).map(|l| (c, l)))
        .collect()
}

/// Cross-project run. Before the target's first arrival a bootstrap step
/// trains on the other projects' history; afterwards each step adds the
/// other projects' commits since the previous step.
pub fn run_cp(
    corpus: &[Commit],
    cfg: &RunConfig,
    learner: &mut LearnerHandle,
) -> Result<RunOutput> {
    check_mode(cfg, RunMode::Cp)?;
    let all = sorted_copy(corpus, |_| true);
    let Some(first) = all.iter().find(|c| c.project == cfg.project) else {
        return Err(Error::Config(format!(
            "project `{}` has no commits in the corpus",
            cfg.project
        )));
    };
    let t0 = first.author_timestamp;
    let index = CorpusIndex::new(&all);
    let mut runner = Runner::new(cfg, learner)?;
    let mut last_step: Option<Timestamp> = None;
    let mut arrivals = 0usize;
    for c in &all {
        if c.project != cfg.project {
            runner.observe(c)?;
            continue;
        }
        if last_step.is_none() {
            let set = assemble_cp_training_set(&index, &cfg.project, t0, None, cfg.latency);
            if !set.is_empty() {
                runner.train_step(t0, &set, true)?;
            }
            last_step = Some(t0);
        }
        runner.score(c)?;
        arrivals += 1;
        if arrivals.is_multiple_of(cfg.batch_commits) {
            let now = c.author_timestamp;
            let set = assemble_cp_training_set(&index, &cfg.project, now, last_step, cfg.latency);
            runner.train_step(now, &set, false)?;
            last_step = Some(now);
        }
    }
    Ok(runner.finish())
}

/// Dispatches on `cfg.mode`.
pub fn run(corpus: &[Commit], cfg: &RunConfig, learner: &mut LearnerHandle) -> Result<RunOutput> {
    match cfg.mode {
        RunMode::Wp => run_wp(corpus, cfg, learner),
        RunMode::Cp => run_cp(corpus, cfg, learner),
    }
}

pub fn write_steps_jsonl<W: Write>(mut w: W, steps: &[StepRecord]) -> Result<()> {
    for s in steps {
        let line = serde_json::to_string(s).map_err(|e| Error::Validation(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// `step,time,R0,R1,gmean,abs_diff`, one row per training step.
pub fn write_metrics_csv<W: Write>(mut w: W, steps: &[StepRecord]) -> Result<()> {
    writeln!(w, "step,time,R0,R1,gmean,abs_diff")?;
    for s in steps {
        let m = &s.metrics_after;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.step_index, s.trigger_time, m.r0, m.r1, m.gmean, m.abs_diff
        )?;
    }
    Ok(())
}

pub fn write_predictions_csv<W: Write>(mut w: W, preds: &[PredictionRecord]) -> Result<()> {
    writeln!(
        w,
        "commit_id,time,true_label,predicted_label,score,checkpoint"
    )?;
    for p in preds {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            p.commit_id, p.time, p.true_label, p.predicted_label, p.score, p.checkpoint
        )?;
    }
    Ok(())
}
