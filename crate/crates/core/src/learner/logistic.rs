//! In-process linear classifier over the joint embedding, trained with
//! logistic loss. Weights persist across calls; nothing is reinitialized.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{FusedExample, Optimizer, Prediction, TrainConfig};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(w: &[f64], b: f64, x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b
}

/// Mean logistic loss `log(1 + e^z) - y z` over `(x, y)` pairs.
pub fn mean_loss(w: &[f64], b: f64, batch: &[(&[f64], u8)]) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let total: f64 = batch
        .iter()
        .map(|(x, y)| {
            let z = logit(w, b, x);
            z.max(0.0) + (-z.abs()).exp().ln_1p() - f64::from(*y) * z
        })
        .sum();
    total / batch.len() as f64
}

/// Gradient of [`mean_loss`] with respect to `(w, b)`.
pub fn mean_gradient(w: &[f64], b: f64, batch: &[(&[f64], u8)]) -> (Vec<f64>, f64) {
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    if batch.is_empty() {
        return (gw, gb);
    }
    for (x, y) in batch {
        let r = sigmoid(logit(w, b, x)) - f64::from(*y);
        for (g, xi) in gw.iter_mut().zip(x.iter()) {
            *g += r * xi;
        }
        gb += r;
    }
    let n = batch.len() as f64;
    gw.iter_mut().for_each(|g| *g /= n);
    (gw, gb / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticLearner {
    weights: Vec<f64>,
    bias: f64,
    adam: AdamState,
    trained: bool,
    checkpoint: String,
}

impl LogisticLearner {
    pub fn new(dim: usize) -> Self {
        let mut l = Self {
            weights: vec![0.0; dim],
            bias: 0.0,
            adam: AdamState {
                m: vec![0.0; dim + 1],
                v: vec![0.0; dim + 1],
                t: 0,
            },
            trained: false,
            checkpoint: String::new(),
        };
        l.checkpoint = l.content_hash();
        l
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn checkpoint_id(&self) -> &str {
        &self.checkpoint
    }

    fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for w in &self.weights {
            h.update(w.to_le_bytes());
        }
        h.update(self.bias.to_le_bytes());
        hex::encode(&h.finalize()[..8])
    }

    /// `epochs` passes over `batch` in order, one update per `minibatch` slice.
    /// Examples must be labeled; the handle checks this before calling.
    pub fn train(&mut self, batch: &[FusedExample], cfg: &TrainConfig) {
        if batch.is_empty() {
            return;
        }
        let pairs: Vec<(&[f64], u8)> = batch
            .iter()
            .map(|e| (e.joint(), e.label.expect("labeled example")))
            .collect();
        for _ in 0..cfg.epochs {
            for chunk in pairs.chunks(cfg.minibatch) {
                let (gw, gb) = mean_gradient(&self.weights, self.bias, chunk);
                self.step(&gw, gb, cfg);
            }
        }
        self.trained = true;
        self.checkpoint = self.content_hash();
    }

    fn step(&mut self, gw: &[f64], gb: f64, cfg: &TrainConfig) {
        let lr = cfg.learning_rate;
        match cfg.optimizer {
            Optimizer::Sgd => {
                for (w, g) in self.weights.iter_mut().zip(gw) {
                    *w -= lr * g;
                }
                self.bias -= lr * gb;
            }
            Optimizer::Adam => {
                let a = &mut self.adam;
                a.t += 1;
                let c1 = 1.0 - BETA1.powf(a.t as f64);
                let c2 = 1.0 - BETA2.powf(a.t as f64);
                let params = self
                    .weights
                    .iter_mut()
                    .chain(std::iter::once(&mut self.bias));
                let grads = gw.iter().copied().chain(std::iter::once(gb));
                for (((p, g), m), v) in params.zip(grads).zip(a.m.iter_mut()).zip(a.v.iter_mut()) {
                    *m = BETA1 * *m + (1.0 - BETA1) * g;
                    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
                }
            }
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(logit(&self.weights, self.bias, x))
    }

    pub fn predict(&self, examples: &[FusedExample]) -> Vec<Prediction> {
        examples
            .iter()
            .map(|e| {
                if !self.trained {
                    return Prediction {
                        score: 0.5,
                        label: 0,
                    };
                }
                let score = self.score(e.joint());
                Prediction {
                    score,
                    label: u8::from(score >= 0.5),
                }
            })
            .collect()
    }

    pub fn mean_loss_on(&self, batch: &[FusedExample]) -> f64 {
        let pairs: Vec<(&[f64], u8)> = batch
            .iter()
            .filter_map(|e| e.label.map(|y| (e.joint(), y)))
            .collect();
        mean_loss(&self.weights, self.bias, &pairs)
    }
}
