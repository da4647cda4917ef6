//! Feature encoders: hashed bag-of-tokens for the semantic block and a frozen
//! random lift for the 14 expert metrics.

use std::hash::Hasher;

use fnv::FnvHasher;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::FusedExample;
use crate::corpus::{Commit, ExpertFeatureVector, LineChange, EXPERT_FEATURE_COUNT};
use crate::error::{Error, Result};

pub const DEFAULT_SEMANTIC_DIM: usize = 512;
pub const DEFAULT_LIFT_DIM: usize = 512;

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn token_hash(token: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(token.as_bytes());
    h.finish()
}

/// Signed feature hashing of message and line tokens, L2-normalized.
pub fn encode_semantic(
    message: &str,
    added: &[LineChange],
    removed: &[LineChange],
    dim: usize,
) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    if dim == 0 {
        return v;
    }
    let texts =
        std::iter::once(message).chain(added.iter().chain(removed).map(|l| l.content.as_str()));
    for text in texts {
        for tok in tokenize(text) {
            let h = token_hash(&tok);
            let bucket = (h % dim as u64) as usize;
            v[bucket] += if h >> 63 == 1 { -1.0 } else { 1.0 };
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Running mean and variance per expert feature (Welford).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OnlineNormalizer {
    count: u64,
    mean: [f64; EXPERT_FEATURE_COUNT],
    m2: [f64; EXPERT_FEATURE_COUNT],
}

impl OnlineNormalizer {
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn observe(&mut self, x: &ExpertFeatureVector) {
        self.count += 1;
        let n = self.count as f64;
        for (i, &v) in x.values().iter().enumerate() {
            let d = v - self.mean[i];
            self.mean[i] += d / n;
            self.m2[i] += d * (v - self.mean[i]);
        }
    }

    /// z-scores; zero-variance coordinates map to 0.
    pub fn standardize(&self, x: &ExpertFeatureVector) -> [f64; EXPERT_FEATURE_COUNT] {
        let mut z = [0.0; EXPERT_FEATURE_COUNT];
        if self.count == 0 {
            return z;
        }
        let n = self.count as f64;
        for (i, &v) in x.values().iter().enumerate() {
            let sd = (self.m2[i] / n).sqrt();
            z[i] = if sd > 1e-12 {
                (v - self.mean[i]) / sd
            } else {
                0.0
            };
        }
        z
    }
}

/// Frozen `relu(W z + b)` map from standardized metrics to `dim` outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertLift {
    dim: usize,
    weights: Vec<[f64; EXPERT_FEATURE_COUNT]>,
    bias: Vec<f64>,
    scale: f64,
}

impl ExpertLift {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Normal::new(0.0, 1.0 / (EXPERT_FEATURE_COUNT as f64).sqrt()).expect("valid normal");
        let b = Normal::new(0.0, 0.1).expect("valid normal");
        let weights = (0..dim)
            .map(|_| {
                let mut row = [0.0; EXPERT_FEATURE_COUNT];
                row.iter_mut().for_each(|x| *x = w.sample(&mut rng));
                row
            })
            .collect();
        let bias = (0..dim).map(|_| b.sample(&mut rng)).collect();
        // relu of a unit normal has second moment 1/2; keep the output near unit norm
        let scale = if dim > 0 {
            (2.0 / dim as f64).sqrt()
        } else {
            0.0
        };
        Self {
            dim,
            weights,
            bias,
            scale,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, z: &[f64; EXPERT_FEATURE_COUNT]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| {
                let pre: f64 = row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + b;
                pre.max(0.0) * self.scale
            })
            .collect()
    }
}

/// Lifts one expert vector with the current statistics; zeros before any
/// statistics exist.
pub fn lift_expert(
    expert: &ExpertFeatureVector,
    normalizer: &OnlineNormalizer,
    lift: &ExpertLift,
) -> Result<Vec<f64>> {
    if expert.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite expert feature".into()));
    }
    if normalizer.count() == 0 {
        return Ok(vec![0.0; lift.dim()]);
    }
    Ok(lift.apply(&normalizer.standardize(expert)))
}

/// Stateful commit encoder producing fused examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    semantic_dim: usize,
    lift: ExpertLift,
    normalizer: OnlineNormalizer,
}

impl FeatureEncoder {
    pub fn new(semantic_dim: usize, lift_dim: usize, seed: u64) -> Self {
        Self {
            semantic_dim,
            lift: ExpertLift::new(lift_dim, seed),
            normalizer: OnlineNormalizer::default(),
        }
    }

    pub fn joint_dim(&self) -> usize {
        self.semantic_dim + self.lift.dim()
    }

    pub fn normalizer(&self) -> &OnlineNormalizer {
        &self.normalizer
    }

    /// Encodes with the statistics seen so far, then folds the commit's
    /// metrics into those statistics.
    pub fn encode_and_observe(&mut self, commit: &Commit) -> Result<FusedExample> {
        let ex = self.encode(commit)?;
        self.normalizer.observe(&commit.expert);
        Ok(ex)
    }

    pub fn encode(&self, commit: &Commit) -> Result<FusedExample> {
        let semantic = encode_semantic(
            &commit.message,
            &commit.added_lines,
            &commit.removed_lines,
            self.semantic_dim,
        );
        let lifted = lift_expert(&commit.expert, &self.normalizer, &self.lift)?;
        Ok(FusedExample::new(semantic, lifted))
    }
}
