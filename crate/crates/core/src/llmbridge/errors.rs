//! False-positive and false-negative extraction for manual error analysis.

use std::collections::HashSet;
use std::io::Write;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusIndex;
use crate::error::Result;
use crate::localization::CommitRanking;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorKind {
    FalsePositive,
    FalseNegative,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FalsePositive => "false_positive",
            Self::FalseNegative => "false_negative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCase {
    pub commit_id: String,
    pub file: Option<String>,
    pub line_number: u32,
    pub content: String,
    pub score: Option<f64>,
    pub kind: ErrorKind,
    /// Free-text bucket filled in by a human reviewer.
    pub category: Option<String>,
}

/// Clean lines ranked with `score >= min_score`, highest score first.
pub fn extract_false_positives(rankings: &[CommitRanking], min_score: f64) -> Vec<ErrorCase> {
    let mut out: Vec<ErrorCase> = rankings
        .iter()
        .flat_map(|r| {
            r.lines
                .iter()
                .filter(move |l| !l.is_defective && l.score >= min_score)
                .map(move |l| ErrorCase {
                    commit_id: r.commit_id.clone(),
                    file: l.file.clone(),
                    line_number: l.line_number,
                    content: l.content.clone(),
                    score: Some(l.score),
                    kind: ErrorKind::FalsePositive,
                    category: None,
                })
        })
        .collect();
    out.sort_by(|a, b| {
        b.score
            .unwrap_or(0.0)
            .total_cmp(&a.score.unwrap_or(0.0))
            .then_with(|| a.commit_id.cmp(&b.commit_id))
            .then(a.line_number.cmp(&b.line_number))
            .then_with(|| a.file.cmp(&b.file))
    });
    out
}

/// Defective added lines that a commit's ranking never names, longest first.
pub fn extract_false_negatives(
    rankings: &[CommitRanking],
    corpus: &CorpusIndex<'_>,
) -> Vec<ErrorCase> {
    let mut out = Vec::new();
    for r in rankings {
        let Some(commit) = corpus.get(&r.commit_id) else {
            continue;
        };
        let named: HashSet<(Option<&str>, u32)> = r
            .lines
            .iter()
            .map(|l| (l.file.as_deref(), l.line_number))
            .collect();
        for l in commit.added_lines.iter().filter(|l| l.is_defective) {
            if named.contains(&(Some(l.file_path.as_str()), l.line_number))
                || named.contains(&(None, l.line_number))
            {
                continue;
            }
            out.push(ErrorCase {
                commit_id: r.commit_id.clone(),
                file: Some(l.file_path.clone()),
                line_number: l.line_number,
                content: l.content.clone(),
                score: None,
                kind: ErrorKind::FalseNegative,
                category: None,
            });
        }
    }
    out.sort_by(|a, b| {
        b.content
            .chars()
            .count()
            .cmp(&a.content.chars().count())
            .then_with(|| a.commit_id.cmp(&b.commit_id))
            .then(a.line_number.cmp(&b.line_number))
            .then_with(|| a.file.cmp(&b.file))
    });
    out
}

/// Seeded sample without replacement that keeps the input order. Asking for
/// more than the population returns all of it.
pub fn sample_cases(cases: &[ErrorCase], size: usize, seed: u64) -> Vec<ErrorCase> {
    if size >= cases.len() {
        return cases.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, cases.len(), size).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| cases[i].clone()).collect()
}

/// CSV with columns `kind,commit,line,score,content,category`.
pub fn write_cases_csv<W: Write>(w: W, cases: &[ErrorCase]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["kind", "commit", "line", "score", "content", "category"])
        .map_err(csv_err)?;
    for c in cases {
        out.write_record([
            c.kind.as_str(),
            &c.commit_id,
            &c.line_number.to_string(),
            &c.score.map(|s| s.to_string()).unwrap_or_default(),
            &c.content,
            c.category.as_deref().unwrap_or(""),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> crate::error::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => crate::error::Error::Validation(format!("{other:?}")),
    }
}
