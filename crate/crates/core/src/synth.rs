//! Seeded synthetic commit streams for smoke runs, benchmarks and tests.
//!
//! Each commit carries a latent class that determines a few signal tokens in
//! its diff and a shift in some expert metrics. At `drift_at` (a fraction of
//! the project's commits) the signal tokens and the shifted metrics change.
//! Observed labels are then flipped: `noise` of the latent positives become
//! negatives and the same number of latent negatives become positives, so the
//! observed positive rate stays at `positive_rate`.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    sort_chronologically, Commit, ExpertFeatureVector, LineChange, Timestamp, EXPERT_FEATURE_COUNT,
};
use crate::error::{Error, Result};
use crate::stream::SECONDS_PER_DAY;

const FILLER: [&str; 40] = [
    "value", "index", "buffer", "count", "result", "config", "node", "list", "map", "item",
    "entry", "key", "stream", "reader", "writer", "parser", "token", "state", "handler", "event",
    "context", "session", "cache", "queue", "file", "path", "name", "size", "offset", "length",
    "status", "message", "error", "field", "record", "table", "column", "row", "query", "client",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub projects: Vec<String>,
    pub commits_per_project: usize,
    pub positive_rate: f64,
    pub noise: f64,
    pub drift_at: f64,
    /// Signal tokens placed in each commit's added lines.
    pub signal_tokens: usize,
    /// How many of the 8 signal words per class are replaced at the drift point.
    pub drifted_words: usize,
    /// Multiplier applied to the metrics that mark latent positives.
    pub expert_shift: f64,
    /// Filler words per generated code line.
    pub filler_words: usize,
    pub start: Timestamp,
    pub mean_gap_days: f64,
    pub min_fix_days: u32,
    pub max_fix_days: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            projects: vec!["alpha".into(), "beta".into()],
            commits_per_project: 1000,
            positive_rate: 0.1,
            noise: 0.1,
            drift_at: 0.5,
            signal_tokens: 6,
            drifted_words: 8,
            expert_shift: 5.0,
            filler_words: 2,
            start: 1_262_304_000,
            mean_gap_days: 1.0,
            min_fix_days: 5,
            max_fix_days: 60,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.projects.is_empty() || self.commits_per_project == 0 {
            return Err(Error::Config(
                "synthetic stream needs projects and commits".into(),
            ));
        }
        if !unit(self.positive_rate) || !unit(self.noise) || !unit(self.drift_at) {
            return Err(Error::Config("rates must lie in [0, 1]".into()));
        }
        if self.min_fix_days == 0
            || self.min_fix_days > self.max_fix_days
            || !(self.mean_gap_days.is_finite() && self.mean_gap_days > 0.0)
        {
            return Err(Error::Config(
                "fix delays and gaps must be positive and ordered".into(),
            ));
        }
        Ok(())
    }
}

fn signal_vocab(tag: &str, drifted: bool, drifted_words: usize) -> Vec<String> {
    (0..8)
        .map(|i| {
            let era = if i >= drifted_words {
                "any"
            } else if drifted {
                "late"
            } else {
                "early"
            };
            format!("{tag}{era}{i}")
        })
        .collect()
}

fn filler_line<R: Rng>(rng: &mut R, words: usize) -> String {
    let mut parts: Vec<&str> = (0..words)
        .map(|_| FILLER[rng.random_range(0..FILLER.len())])
        .collect();
    parts.shuffle(rng);
    format!("{}({});", parts[0], parts[1..].join(", "))
}

fn expert_values<R: Rng>(
    rng: &mut R,
    latent: bool,
    drifted: bool,
    shift: f64,
) -> [f64; EXPERT_FEATURE_COUNT] {
    let base = LogNormal::new(1.0, 0.6).expect("valid lognormal");
    let jitter = Normal::new(0.0, 0.3).expect("valid normal");
    let mut v = [0.0; EXPERT_FEATURE_COUNT];
    for x in v.iter_mut() {
        *x = base.sample(rng);
    }
    // fix flag is binary
    v[7] = f64::from(u8::from(rng.random_bool(0.3)));
    if latent {
        // early era: large, scattered changes; late era: many developers, little experience
        let boosted: &[usize] = if drifted { &[3, 8, 10] } else { &[2, 4, 6] };
        for &i in boosted {
            v[i] *= (shift + jitter.sample(rng)).max(1.0);
        }
        if drifted {
            v[11] /= shift;
        }
    }
    v
}

fn project_stream<R: Rng>(cfg: &SynthConfig, project: &str, rng: &mut R) -> Result<Vec<Commit>> {
    let n = cfg.commits_per_project;
    let positives = (cfg.positive_rate * n as f64).round() as usize;
    let mut latent = vec![false; n];
    for i in index::sample(rng, n, positives) {
        latent[i] = true;
    }
    let flips = (cfg.noise * positives as f64).round() as usize;
    let mut observed = latent.clone();
    let pos_idx: Vec<usize> = (0..n).filter(|&i| latent[i]).collect();
    let neg_idx: Vec<usize> = (0..n).filter(|&i| !latent[i]).collect();
    for i in index::sample(rng, pos_idx.len(), flips.min(pos_idx.len())) {
        observed[pos_idx[i]] = false;
    }
    for i in index::sample(rng, neg_idx.len(), flips.min(neg_idx.len())) {
        observed[neg_idx[i]] = true;
    }

    let gap = rand_distr::Exp::new(1.0 / (cfg.mean_gap_days * SECONDS_PER_DAY as f64))
        .expect("positive rate");
    let drift_index = (cfg.drift_at * n as f64).round() as usize;
    let mut t = cfg.start;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        t += 1 + gap.sample(rng) as i64;
        let drifted = i >= drift_index;
        let vocab = signal_vocab(
            if latent[i] { "bug" } else { "ok" },
            drifted,
            cfg.drifted_words,
        );
        let file = format!(
            "src/{project}/{}.java",
            FILLER[rng.random_range(0..FILLER.len())]
        );
        let n_lines = rng.random_range(3..=8);
        let mut added: Vec<LineChange> = (0..n_lines)
            .map(|k| LineChange {
                file_path: file.clone(),
                line_number: 10 + k as u32,
                content: filler_line(rng, cfg.filler_words.max(1)),
                is_defective: false,
            })
            .collect();
        for _ in 0..cfg.signal_tokens {
            let k = rng.random_range(0..added.len());
            let tok = &vocab[rng.random_range(0..vocab.len())];
            added[k].content = format!("{} {tok}();", added[k].content);
        }
        if observed[i] {
            added[0].is_defective = true;
        }
        let removed = vec![LineChange {
            file_path: file.clone(),
            line_number: 10,
            content: filler_line(rng, cfg.filler_words.max(1)),
            is_defective: false,
        }];
        let fix = observed[i].then(|| {
            t + i64::from(rng.random_range(cfg.min_fix_days..=cfg.max_fix_days)) * SECONDS_PER_DAY
        });
        out.push(Commit {
            commit_id: format!("{project}-{i:05}"),
            project: project.to_string(),
            author_timestamp: t,
            message: format!(
                "update {} {}",
                FILLER[rng.random_range(0..FILLER.len())],
                FILLER[rng.random_range(0..FILLER.len())]
            ),
            added_lines: added,
            removed_lines: removed,
            expert: ExpertFeatureVector::new(&expert_values(
                rng,
                latent[i],
                drifted,
                cfg.expert_shift,
            ))?,
            is_defect_inducing: observed[i],
            first_fix_timestamp: fix,
        });
    }
    Ok(out)
}

/// Generates every project over the same calendar window, sorted by
/// `(timestamp, commit_id)`.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<Commit>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut all = Vec::with_capacity(cfg.projects.len() * cfg.commits_per_project);
    for p in &cfg.projects {
        all.extend(project_stream(cfg, p, &mut rng)?);
    }
    sort_chronologically(&mut all);
    Ok(all)
}

/// Copies `project`'s history under a new project name, moved earlier so the
/// whole copy (and its 90-day maturation window) precedes the original.
pub fn shifted_copy(
    corpus: &[Commit],
    project: &str,
    copy_name: &str,
    gap_days: i64,
) -> Vec<Commit> {
    let own: Vec<&Commit> = corpus.iter().filter(|c| c.project == project).collect();
    let (Some(first), Some(last)) = (
        own.iter().map(|c| c.author_timestamp).min(),
        own.iter().map(|c| c.author_timestamp).max(),
    ) else {
        return Vec::new();
    };
    let shift = (last - first) + gap_days * SECONDS_PER_DAY;
    own.into_iter()
        .map(|c| Commit {
            commit_id: format!("{copy_name}-{}", c.commit_id),
            project: copy_name.to_string(),
            author_timestamp: c.author_timestamp - shift,
            first_fix_timestamp: c.first_fix_timestamp.map(|f| f - shift),
            ..c.clone()
        })
        .collect()
}
