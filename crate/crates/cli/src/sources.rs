//! Loading line rankings and prediction filters from disk.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use jitflow_core::llmbridge::{parse_response, to_ranking, ResponseStore};
use jitflow_core::localization::{rank, read_rankings};
use jitflow_core::{CommitRanking, CorpusIndex};
use serde::Deserialize;

pub enum RankingSource {
    /// JSONL of `{commit_id, entries}` records.
    Rankings(PathBuf),
    /// A response store; `model` narrows it when the store holds several.
    Responses {
        dir: PathBuf,
        model: Option<String>,
        run_index: u32,
    },
}

/// Rankings ordered by commit id, plus per-commit warnings.
pub fn load_rankings(
    source: &RankingSource,
    index: &CorpusIndex<'_>,
) -> Result<(Vec<CommitRanking>, Vec<String>)> {
    let mut rankings = Vec::new();
    let mut warnings = Vec::new();
    match source {
        RankingSource::Rankings(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            for rec in read_rankings(file)? {
                let commit = index
                    .get(&rec.commit_id)
                    .ok_or_else(|| anyhow!("ranking for unknown commit `{}`", rec.commit_id))?;
                let (r, w) = rank(commit, &rec.entries)?;
                warnings.extend(w.into_iter().map(|m| format!("{}: {m}", rec.commit_id)));
                rankings.push(r);
            }
        }
        RankingSource::Responses {
            dir,
            model,
            run_index,
        } => {
            let records = ResponseStore::open(dir)?.load_all()?;
            let models: BTreeSet<&str> = records.iter().map(|r| r.model.as_str()).collect();
            let chosen = match model {
                Some(m) => m.as_str(),
                None if models.len() <= 1 => models.first().copied().unwrap_or_default(),
                None => bail!(
                    "store holds several models ({}); pick one with --model",
                    models.into_iter().collect::<Vec<_>>().join(", ")
                ),
            };
            for rec in records
                .iter()
                .filter(|r| r.model == chosen && r.run_index == *run_index)
            {
                let Some(commit) = index.get(&rec.commit_id) else {
                    warnings.push(format!("{}: not in the corpus; skipped", rec.commit_id));
                    continue;
                };
                let parsed = match parse_response(&rec.raw_response) {
                    Ok(p) => p,
                    Err(e) => {
                        // unusable replies still count as commits with nothing ranked
                        warnings.push(format!("{}: {e}", rec.commit_id));
                        rankings.push(CommitRanking::new(
                            rec.commit_id.clone(),
                            Vec::new(),
                            commit.added_lines.len(),
                            commit.defective_line_count(),
                        ));
                        continue;
                    }
                };
                warnings.extend(
                    parsed
                        .diagnostics
                        .iter()
                        .map(|m| format!("{}: {m}", rec.commit_id)),
                );
                let (r, w) = to_ranking(&parsed.response, commit);
                warnings.extend(w.into_iter().map(|m| format!("{}: {m}", rec.commit_id)));
                rankings.push(r);
            }
        }
    }
    rankings.sort_by(|a, b| a.commit_id.cmp(&b.commit_id));
    Ok((rankings, warnings))
}

#[derive(Deserialize)]
struct PredictionRow {
    commit_id: String,
    true_label: u8,
    predicted_label: u8,
}

/// Commits a run predicted defect-inducing that really are.
pub fn read_positive_hits(path: &Path) -> Result<BTreeSet<String>> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = BTreeSet::new();
    for row in reader.deserialize() {
        let row: PredictionRow = row.with_context(|| format!("reading {}", path.display()))?;
        if row.true_label == 1 && row.predicted_label == 1 {
            out.insert(row.commit_id);
        }
    }
    Ok(out)
}
