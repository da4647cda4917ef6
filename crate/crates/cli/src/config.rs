use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use jitflow_core::llmbridge::EndpointConfig;
use jitflow_core::RunConfig;
use serde::{Deserialize, Serialize};

/// Everything a run needs; loaded from TOML, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// `builtin`, or the command line of an external learner.
    pub learner: String,
    pub run: RunConfig,
    pub endpoint: EndpointConfig,
    pub report_formats: Vec<ReportFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            out: None,
            seed: None,
            learner: "builtin".into(),
            run: RunConfig::default(),
            endpoint: EndpointConfig::default(),
            report_formats: vec![ReportFormat::Json, ReportFormat::Csv],
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn wants(&self, f: ReportFormat) -> bool {
        self.report_formats.contains(&f)
    }
}
