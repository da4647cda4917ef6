//! Latency-aware continual just-in-time defect prediction and line-level
//! defect-localization evaluation.

pub mod continual;
pub mod corpus;
pub mod error;
pub mod learner;
pub mod llmbridge;
pub mod localization;
pub mod prequential;
pub mod sampling;
pub mod stream;
pub mod synth;

pub use continual::{run, run_cp, run_wp, RunConfig, RunMode, RunOutput, RunSummary, StepRecord};
pub use corpus::{Commit, CorpusIndex, ExpertFeatureVector, LineChange, ProjectStats, Timestamp};
pub use error::{Error, Result};
pub use learner::{FusedExample, LearnerCommand, LearnerHandle, Prediction, TrainConfig};
pub use localization::{CommitRanking, LocalizationReport, MetricOptions, RankedLine};
pub use prequential::{PrequentialState, StreamMetrics};
pub use sampling::{BoostFactors, OrbConfig};
pub use stream::{LatencyConfig, PoolLabel};
