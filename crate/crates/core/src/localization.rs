//! Line rankings and just-in-time defect-localization metrics.
//!
//! All metrics are computed on one commit's ranked line list and then
//! macro-averaged over eligible commits. Cut-offs use `ceil`:
//!
//! * `recall@f`: defective lines within the first `ceil(f * |lines|)`, over all defective lines
//! * `effort@f`: fraction of ranked lines inspected until `ceil(f * defective)` defective lines are seen
//! * `ifa`: clean lines ranked above the first defective one
//! * `top-k`: 1 if a defective line is among the first `k`
//! * legacy top-k: defective lines in the first `k` over all changed lines

use std::collections::{BTreeSet, HashSet};
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::Commit;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    pub line_number: u32,
    pub content: String,
    pub score: f64,
    pub source_rank: usize,
    pub is_defective: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitRanking {
    pub commit_id: String,
    pub lines: Vec<RankedLine>,
    pub total_changed_lines: usize,
    pub defective_line_count: usize,
}

impl CommitRanking {
    /// Sorts by score descending, then producer order.
    pub fn new(
        commit_id: impl Into<String>,
        mut lines: Vec<RankedLine>,
        total_changed_lines: usize,
        defective_line_count: usize,
    ) -> Self {
        lines.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.source_rank.cmp(&b.source_rank))
        });
        Self {
            commit_id: commit_id.into(),
            lines,
            total_changed_lines,
            defective_line_count,
        }
    }

    fn defective_flags(&self) -> impl Iterator<Item = bool> + '_ {
        self.lines.iter().map(|l| l.is_defective)
    }
}

/// One scored line as produced by a localizer, before ground truth is joined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(rename = "line")]
    pub line_number: u32,
    #[serde(default)]
    pub content: String,
    pub score: f64,
}

/// Resolves `(file?, line)` against the commit's added lines. Without a file,
/// a content match breaks ties between files sharing the line number.
pub(crate) fn find_added_line<'a>(
    commit: &'a Commit,
    file: Option<&str>,
    line: u32,
    content: &str,
) -> Option<&'a crate::corpus::LineChange> {
    let mut candidates = commit
        .added_lines
        .iter()
        .filter(|l| l.line_number == line && file.is_none_or(|f| f == l.file_path));
    let first = candidates.clone().next()?;
    Some(
        candidates
            .find(|l| l.content.trim() == content.trim())
            .unwrap_or(first),
    )
}

/// Joins ground truth from `commit` and ranks. Entries naming lines that the
/// commit did not add are dropped with a warning.
pub fn rank(commit: &Commit, entries: &[RankInput]) -> Result<(CommitRanking, Vec<String>)> {
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    let mut lines = Vec::with_capacity(entries.len());
    for (i, e) in entries.iter().enumerate() {
        if e.line_number == 0 {
            return Err(Error::Validation(format!(
                "commit `{}`: line numbers start at 1",
                commit.commit_id
            )));
        }
        let Some(truth) = find_added_line(commit, e.file.as_deref(), e.line_number, &e.content)
        else {
            warnings.push(format!(
                "commit `{}`: line {} is not an added line; dropped",
                commit.commit_id, e.line_number
            ));
            continue;
        };
        if !seen.insert((truth.file_path.as_str(), truth.line_number)) {
            return Err(Error::Validation(format!(
                "commit `{}`: duplicate entry for {}:{}",
                commit.commit_id, truth.file_path, truth.line_number
            )));
        }
        lines.push(RankedLine {
            file: Some(truth.file_path.clone()),
            line_number: e.line_number,
            content: if e.content.is_empty() {
                truth.content.clone()
            } else {
                e.content.clone()
            },
            score: e.score,
            source_rank: i,
            is_defective: truth.is_defective,
        });
    }
    let ranking = CommitRanking::new(
        commit.commit_id.clone(),
        lines,
        commit.added_lines.len(),
        commit.defective_line_count(),
    );
    Ok((ranking, warnings))
}

fn cutoff(fraction: f64, n: usize) -> usize {
    // guard against 0.2 * 10 = 2.0000000000000004 style ceil overshoot
    let raw = fraction * n as f64;
    let rounded = raw.round();
    if (raw - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}

pub fn recall_at(r: &CommitRanking, fraction: f64) -> Option<f64> {
    if r.defective_line_count == 0 {
        return None;
    }
    let k = cutoff(fraction, r.lines.len());
    let found = r.defective_flags().take(k).filter(|&d| d).count();
    Some(found as f64 / r.defective_line_count as f64)
}

pub fn effort_at(r: &CommitRanking, fraction: f64) -> Option<f64> {
    if r.defective_line_count == 0 || r.lines.is_empty() {
        return None;
    }
    let target = cutoff(fraction, r.defective_line_count).max(1);
    let mut seen = 0;
    for (i, d) in r.defective_flags().enumerate() {
        seen += usize::from(d);
        if seen >= target {
            return Some((i + 1) as f64 / r.lines.len() as f64);
        }
    }
    Some(1.0)
}

pub fn ifa(r: &CommitRanking) -> Option<usize> {
    if r.defective_line_count == 0 {
        return None;
    }
    Some(r.defective_flags().take_while(|&d| !d).count())
}

pub fn top_k(r: &CommitRanking, k: usize) -> Option<u8> {
    if r.defective_line_count == 0 {
        return None;
    }
    Some(u8::from(r.defective_flags().take(k).any(|d| d)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegacyTopK {
    /// Only defective lines inside the first `k` count.
    #[default]
    Capped,
    /// Every defective ranked line counts, regardless of `k`.
    Literal,
}

pub fn top_k_legacy(r: &CommitRanking, k: usize, mode: LegacyTopK) -> Option<f64> {
    if r.total_changed_lines == 0 {
        return None;
    }
    let window = match mode {
        LegacyTopK::Capped => k,
        LegacyTopK::Literal => usize::MAX,
    };
    let hits = r.defective_flags().take(window).filter(|&d| d).count();
    Some(hits as f64 / r.total_changed_lines as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub fraction: f64,
    pub legacy: LegacyTopK,
    /// Extra Top-k cut-off reported alongside 5 and 10.
    pub extra_k: Option<usize>,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            fraction: 0.2,
            legacy: LegacyTopK::Capped,
            extra_k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitMetrics {
    pub commit_id: String,
    pub ranked_lines: usize,
    pub total_changed_lines: usize,
    pub defective_lines: usize,
    pub top5: f64,
    pub top10: f64,
    pub top5_legacy: f64,
    pub top10_legacy: f64,
    pub recall_at_20: f64,
    pub effort_at_20: f64,
    pub ifa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_extra: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricMeans {
    pub top5: f64,
    pub top10: f64,
    pub top5_legacy: f64,
    pub top10_legacy: f64,
    pub recall_at_20: f64,
    pub effort_at_20: f64,
    pub ifa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_extra: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub commit_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub commit_filter: String,
    pub options: MetricOptions,
    pub rows: Vec<CommitMetrics>,
    pub means: Option<MetricMeans>,
    pub no_eligible_commits: bool,
    pub excluded: Vec<Exclusion>,
}

/// Metrics for one ranking, or the reason it cannot be scored.
pub fn commit_metrics(
    r: &CommitRanking,
    opts: &MetricOptions,
) -> std::result::Result<CommitMetrics, String> {
    if r.lines.is_empty() {
        return Err("no ranked lines".into());
    }
    if r.defective_line_count == 0 {
        return Err("no defective lines".into());
    }
    let need = "defective lines present";
    Ok(CommitMetrics {
        commit_id: r.commit_id.clone(),
        ranked_lines: r.lines.len(),
        total_changed_lines: r.total_changed_lines,
        defective_lines: r.defective_line_count,
        top5: f64::from(top_k(r, 5).expect(need)),
        top10: f64::from(top_k(r, 10).expect(need)),
        top5_legacy: top_k_legacy(r, 5, opts.legacy).expect(need),
        top10_legacy: top_k_legacy(r, 10, opts.legacy).expect(need),
        recall_at_20: recall_at(r, opts.fraction).expect(need),
        effort_at_20: effort_at(r, opts.fraction).expect(need),
        ifa: ifa(r).expect(need) as f64,
        top_extra: opts.extra_k.map(|k| f64::from(top_k(r, k).expect(need))),
    })
}

/// Scores the rankings whose ids pass `filter` (all, when `None`) and
/// macro-averages the eligible ones. Output order follows commit id.
pub fn aggregate(
    rankings: &[CommitRanking],
    filter: Option<&BTreeSet<String>>,
    opts: &MetricOptions,
) -> LocalizationReport {
    let mut sorted: Vec<&CommitRanking> = rankings.iter().collect();
    sorted.sort_by(|a, b| a.commit_id.cmp(&b.commit_id));
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for r in sorted {
        if let Some(f) = filter {
            if !f.contains(&r.commit_id) {
                excluded.push(Exclusion {
                    commit_id: r.commit_id.clone(),
                    reason: "filtered out".into(),
                });
                continue;
            }
        }
        match commit_metrics(r, opts) {
            Ok(m) => rows.push(m),
            Err(reason) => excluded.push(Exclusion {
                commit_id: r.commit_id.clone(),
                reason,
            }),
        }
    }
    let means = mean_of(&rows);
    LocalizationReport {
        commit_filter: match filter {
            Some(f) => format!("subset of {} commit ids", f.len()),
            None => "all commits".into(),
        },
        options: *opts,
        no_eligible_commits: rows.is_empty(),
        rows,
        means,
        excluded,
    }
}

fn mean_of(rows: &[CommitMetrics]) -> Option<MetricMeans> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let avg = |f: fn(&CommitMetrics) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Some(MetricMeans {
        top5: avg(|r| r.top5),
        top10: avg(|r| r.top10),
        top5_legacy: avg(|r| r.top5_legacy),
        top10_legacy: avg(|r| r.top10_legacy),
        recall_at_20: avg(|r| r.recall_at_20),
        effort_at_20: avg(|r| r.effort_at_20),
        ifa: avg(|r| r.ifa),
        top_extra: rows[0]
            .top_extra
            .map(|_| avg(|r| r.top_extra.unwrap_or(0.0))),
    })
}

/// Per-commit rows as CSV.
pub fn write_report_csv<W: Write>(mut w: W, report: &LocalizationReport) -> Result<()> {
    let extra = report.options.extra_k;
    write!(w, "commit_id,ranked_lines,total_changed_lines,defective_lines,top5,top10,top5_legacy,top10_legacy,recall_at_20,effort_at_20,ifa")?;
    if let Some(k) = extra {
        write!(w, ",top{k}")?;
    }
    writeln!(w)?;
    for r in &report.rows {
        write!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.commit_id,
            r.ranked_lines,
            r.total_changed_lines,
            r.defective_lines,
            r.top5,
            r.top10,
            r.top5_legacy,
            r.top10_legacy,
            r.recall_at_20,
            r.effort_at_20,
            r.ifa
        )?;
        if let Some(t) = r.top_extra {
            write!(w, ",{t}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRecord {
    pub commit_id: String,
    pub entries: Vec<RankInput>,
}

/// Reads `{commit_id, entries:[{line, content, score}]}` lines.
pub fn read_rankings<R: Read>(reader: R) -> Result<Vec<RankingRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value =
            serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, "<record>", e))?;
        let rec: RankingRecord =
            serde_json::from_value(v).map_err(|e| Error::parse(i + 1, "entries", e))?;
        out.push(rec);
    }
    Ok(out)
}
