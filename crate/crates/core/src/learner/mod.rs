//! Base-learner contract, fused feature layout and learner back ends.

pub mod encode;
pub mod external;
pub mod logistic;

use serde::{Deserialize, Serialize};

pub use encode::{encode_semantic, lift_expert, ExpertLift, FeatureEncoder, OnlineNormalizer};
pub use external::{ExternalLearner, LearnerCommand};
pub use logistic::LogisticLearner;

use crate::error::{Error, Result};

/// Semantic block followed by the lifted expert block, stored contiguously.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedExample {
    joint: Vec<f64>,
    semantic_dim: usize,
    pub label: Option<u8>,
}

impl FusedExample {
    pub fn new(semantic: Vec<f64>, expert_lifted: Vec<f64>) -> Self {
        let semantic_dim = semantic.len();
        let mut joint = semantic;
        joint.extend(expert_lifted);
        Self {
            joint,
            semantic_dim,
            label: None,
        }
    }

    /// A pre-joined vector with no block structure (as received over the wire).
    pub fn from_joint(joint: Vec<f64>) -> Self {
        Self {
            semantic_dim: joint.len(),
            joint,
            label: None,
        }
    }

    pub fn with_label(mut self, label: u8) -> Self {
        self.label = Some(label);
        self
    }

    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    pub fn semantic(&self) -> &[f64] {
        &self.joint[..self.semantic_dim]
    }

    pub fn expert_lifted(&self) -> &[f64] {
        &self.joint[self.semantic_dim..]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Plain minibatch gradient descent.
    Sgd,
    /// Bias-corrected adaptive moments; state persists across training calls.
    #[default]
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            minibatch: 16,
            learning_rate: 1e-4,
            optimizer: Optimizer::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.minibatch == 0 || !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "train config must be strictly positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub score: f64,
    pub label: u8,
}

/// The running model: the in-process logistic learner or a child process
/// speaking the line protocol.
#[derive(Debug)]
pub enum LearnerHandle {
    Builtin(LogisticLearner),
    External(ExternalLearner),
}

impl LearnerHandle {
    pub fn builtin(dim: usize) -> Self {
        LearnerHandle::Builtin(LogisticLearner::new(dim))
    }

    pub fn train(&mut self, batch: &[FusedExample], cfg: &TrainConfig) -> Result<()> {
        if let Some(i) = batch.iter().position(|e| e.label.is_none()) {
            return Err(Error::Contract(format!(
                "training example {i} has no label"
            )));
        }
        if batch.is_empty() {
            return Ok(());
        }
        cfg.validate()?;
        match self {
            LearnerHandle::Builtin(l) => {
                l.train(batch, cfg);
                Ok(())
            }
            LearnerHandle::External(l) => l.train(batch, cfg),
        }
    }

    pub fn predict(&mut self, examples: &[FusedExample]) -> Result<Vec<Prediction>> {
        match self {
            LearnerHandle::Builtin(l) => Ok(l.predict(examples)),
            LearnerHandle::External(l) => l.predict(examples),
        }
    }

    pub fn checkpoint_id(&self) -> &str {
        match self {
            LearnerHandle::Builtin(l) => l.checkpoint_id(),
            LearnerHandle::External(l) => l.checkpoint_id(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LearnerHandle::Builtin(_) => "builtin",
            LearnerHandle::External(_) => "external",
        }
    }
}
