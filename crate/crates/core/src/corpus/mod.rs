//! Commit corpus: canonical line-delimited format, validation, chronological
//! ordering and per-project statistics.
//!
//! Each line of a canonical corpus file is one JSON object:
//!
//! ```text
//! {"commit_id":"a1","project":"ant-ivy","timestamp":1200000000,"message":"...",
//!  "added":[{"file":"F.java","line":12,"content":"x++;","defective":true}],
//!  "removed":[{"file":"F.java","line":11,"content":"x--;"}],
//!  "features":[14 numbers],"label":1,"fix_timestamp":1200864000}
//! ```
//!
//! Added/removed lines are arrays, never sets, so their order survives a
//! round trip through the file.

pub mod raw;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Seconds since the Unix epoch (UTC).
pub type Timestamp = i64;

pub const EXPERT_FEATURE_COUNT: usize = 14;

/// Change-level metric names in the order the converter emits them.
pub const EXPERT_FEATURE_NAMES: [&str; EXPERT_FEATURE_COUNT] = [
    "ns", "nd", "nf", "entropy", "la", "ld", "lt", "fix", "ndev", "age", "nuc", "exp", "rexp",
    "sexp",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineChange {
    pub file_path: String,
    pub line_number: u32,
    pub content: String,
    pub is_defective: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertFeatureVector {
    values: [f64; EXPERT_FEATURE_COUNT],
    names: Option<Vec<String>>,
}

impl ExpertFeatureVector {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.len() != EXPERT_FEATURE_COUNT {
            return Err(Error::Validation(format!(
                "expert feature vector has {} values, expected {EXPERT_FEATURE_COUNT}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "expert feature {i} is not finite"
            )));
        }
        let mut arr = [0.0; EXPERT_FEATURE_COUNT];
        arr.copy_from_slice(values);
        Ok(Self {
            values: arr,
            names: None,
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != EXPERT_FEATURE_COUNT {
            return Err(Error::Validation(format!(
                "expected {EXPERT_FEATURE_COUNT} feature names, got {}",
                names.len()
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn values(&self) -> &[f64; EXPERT_FEATURE_COUNT] {
        &self.values
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Commit {
    pub commit_id: String,
    pub project: String,
    pub author_timestamp: Timestamp,
    pub message: String,
    pub added_lines: Vec<LineChange>,
    pub removed_lines: Vec<LineChange>,
    pub expert: ExpertFeatureVector,
    pub is_defect_inducing: bool,
    pub first_fix_timestamp: Option<Timestamp>,
}

impl Commit {
    /// Number of added lines labelled defective.
    pub fn defective_line_count(&self) -> usize {
        self.added_lines.iter().filter(|l| l.is_defective).count()
    }
}

/// First fixing commit time for defect-inducing commits.
pub fn fix_time_of(commit: &Commit) -> Option<Timestamp> {
    if commit.is_defect_inducing {
        commit.first_fix_timestamp
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectStats {
    pub project: String,
    pub defect_inducing_count: usize,
    pub clean_count: usize,
    pub ratio: f64,
}

impl ProjectStats {
    fn from_counts(project: String, defect: usize, clean: usize) -> Self {
        let total = defect + clean;
        let ratio = if total > 0 {
            defect as f64 / total as f64
        } else {
            0.0
        };
        Self {
            project,
            defect_inducing_count: defect,
            clean_count: clean,
            ratio,
        }
    }
}

/// Per-project counts, sorted by project name.
pub fn project_stats(corpus: &[Commit]) -> Vec<ProjectStats> {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for c in corpus {
        let e = counts.entry(c.project.as_str()).or_default();
        if c.is_defect_inducing {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    counts
        .into_iter()
        .map(|(p, (d, k))| ProjectStats::from_counts(p.to_string(), d, k))
        .collect()
}

/// Sums a stats table into a single `ALL` row.
pub fn total_stats(stats: &[ProjectStats]) -> ProjectStats {
    let d = stats.iter().map(|s| s.defect_inducing_count).sum();
    let k = stats.iter().map(|s| s.clean_count).sum();
    ProjectStats::from_counts("ALL".to_string(), d, k)
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub commits: Vec<Commit>,
    pub warnings: Vec<String>,
}

/// Reads a canonical corpus file.
pub fn ingest(path: &Path) -> Result<Ingested> {
    let file = File::open(path)?;
    read_corpus(BufReader::new(file))
}

/// Parses canonical records, validates them and sorts by `(timestamp, commit_id)`.
///
/// Record indices in errors are 1-based line numbers.
pub fn read_corpus<R: Read>(reader: R) -> Result<Ingested> {
    let mut out = Ingested::default();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = i + 1;
        let value: Value =
            serde_json::from_str(&line).map_err(|e| Error::parse(record, "<record>", e))?;
        let commit = commit_from_value(&value, record)?;
        validate_commit(&commit, &mut out.warnings)?;
        if !seen.insert(commit.commit_id.clone()) {
            return Err(Error::Validation(format!(
                "duplicate commit_id `{}` at record {record}",
                commit.commit_id
            )));
        }
        out.commits.push(commit);
    }
    sort_chronologically(&mut out.commits);
    Ok(out)
}

pub fn sort_chronologically(commits: &mut [Commit]) {
    commits.sort_by(|a, b| {
        a.author_timestamp
            .cmp(&b.author_timestamp)
            .then_with(|| a.commit_id.cmp(&b.commit_id))
    });
}

pub fn is_chronological(commits: &[Commit]) -> bool {
    commits.windows(2).all(|w| {
        (w[0].author_timestamp, &w[0].commit_id) <= (w[1].author_timestamp, &w[1].commit_id)
    })
}

pub(crate) fn validate_commit(c: &Commit, warnings: &mut Vec<String>) -> Result<()> {
    if c.commit_id.is_empty() {
        return Err(Error::Validation("empty commit_id".into()));
    }
    match (c.is_defect_inducing, c.first_fix_timestamp) {
        (true, None) => warnings.push(format!(
            "defect-inducing commit `{}` has no fix timestamp; it can never be labelled positive",
            c.commit_id
        )),
        (true, Some(fix)) if fix <= c.author_timestamp => {
            return Err(Error::Validation(format!(
                "commit `{}`: fix timestamp {fix} is not after author timestamp {}",
                c.commit_id, c.author_timestamp
            )))
        }
        (false, Some(_)) => {
            return Err(Error::Validation(format!(
                "clean commit `{}` carries a fix timestamp",
                c.commit_id
            )))
        }
        _ => {}
    }
    for l in c.added_lines.iter().chain(&c.removed_lines) {
        if l.line_number == 0 {
            return Err(Error::Validation(format!(
                "commit `{}`: line numbers start at 1 ({})",
                c.commit_id, l.file_path
            )));
        }
    }
    if !c.is_defect_inducing && c.added_lines.iter().any(|l| l.is_defective) {
        return Err(Error::Validation(format!(
            "clean commit `{}` has lines marked defective",
            c.commit_id
        )));
    }
    Ok(())
}

fn commit_from_value(v: &Value, record: usize) -> Result<Commit> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::parse(record, "<record>", "expected a JSON object"))?;
    let field = |name: &str| {
        obj.get(name)
            .ok_or_else(|| Error::parse(record, name, "missing field"))
    };
    let string = |name: &str| -> Result<String> {
        field(name)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::parse(record, name, "expected a string"))
    };

    let commit_id = string("commit_id")?;
    let project = string("project")?;
    let author_timestamp = field("timestamp")?
        .as_i64()
        .ok_or_else(|| Error::parse(record, "timestamp", "expected integer seconds"))?;
    let message = match obj.get("message") {
        None | Some(Value::Null) => String::new(),
        Some(m) => m
            .as_str()
            .ok_or_else(|| Error::parse(record, "message", "expected a string"))?
            .to_string(),
    };
    let added_lines = lines_from_value(field("added")?, record, "added", true)?;
    let removed_lines = lines_from_value(field("removed")?, record, "removed", false)?;

    let features = field("features")?
        .as_array()
        .ok_or_else(|| Error::parse(record, "features", "expected an array"))?;
    let mut values = Vec::with_capacity(features.len());
    for (j, f) in features.iter().enumerate() {
        values.push(
            f.as_f64().ok_or_else(|| {
                Error::parse(record, format!("features[{j}]"), "expected a number")
            })?,
        );
    }
    let mut expert = ExpertFeatureVector::new(&values)
        .map_err(|e| Error::Validation(format!("record {record}: {e}")))?;
    if let Some(names) = obj.get("feature_names").filter(|n| !n.is_null()) {
        let names: Vec<String> = serde_json::from_value(names.clone())
            .map_err(|e| Error::parse(record, "feature_names", e))?;
        expert = expert
            .with_names(names)
            .map_err(|e| Error::Validation(format!("record {record}: {e}")))?;
    }

    let is_defect_inducing = match field("label")? {
        Value::Number(n) if n.as_u64() == Some(0) => false,
        Value::Number(n) if n.as_u64() == Some(1) => true,
        Value::Bool(b) => *b,
        _ => return Err(Error::parse(record, "label", "expected 0 or 1")),
    };
    let first_fix_timestamp = match obj.get("fix_timestamp") {
        None | Some(Value::Null) => None,
        Some(t) => Some(
            t.as_i64()
                .ok_or_else(|| Error::parse(record, "fix_timestamp", "expected integer or null"))?,
        ),
    };

    Ok(Commit {
        commit_id,
        project,
        author_timestamp,
        message,
        added_lines,
        removed_lines,
        expert,
        is_defect_inducing,
        first_fix_timestamp,
    })
}

fn lines_from_value(v: &Value, record: usize, name: &str, added: bool) -> Result<Vec<LineChange>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::parse(record, name, "expected an array"))?;
    arr.iter()
        .enumerate()
        .map(|(j, l)| {
            let at = |f: &str| format!("{name}[{j}].{f}");
            let file_path = l
                .get("file")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::parse(record, at("file"), "expected a string"))?
                .to_string();
            let line_number = l
                .get("line")
                .and_then(Value::as_u64)
                .and_then(|n| u32::try_from(n).ok())
                .ok_or_else(|| Error::parse(record, at("line"), "expected a positive integer"))?;
            let content = l
                .get("content")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::parse(record, at("content"), "expected a string"))?
                .to_string();
            let is_defective = if added {
                match l.get("defective") {
                    None | Some(Value::Null) => false,
                    Some(Value::Bool(b)) => *b,
                    Some(Value::Number(n)) if n.as_u64() == Some(0) => false,
                    Some(Value::Number(n)) if n.as_u64() == Some(1) => true,
                    Some(_) => {
                        return Err(Error::parse(record, at("defective"), "expected a boolean"))
                    }
                }
            } else {
                false
            };
            Ok(LineChange {
                file_path,
                line_number,
                content,
                is_defective,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct CanonicalLine<'a> {
    file: &'a str,
    line: u32,
    content: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    defective: Option<bool>,
}

#[derive(Serialize)]
struct CanonicalRecord<'a> {
    commit_id: &'a str,
    project: &'a str,
    timestamp: Timestamp,
    message: &'a str,
    added: Vec<CanonicalLine<'a>>,
    removed: Vec<CanonicalLine<'a>>,
    features: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    feature_names: Option<&'a [String]>,
    label: u8,
    fix_timestamp: Option<Timestamp>,
}

/// Serializes one commit as a canonical record (no trailing newline).
pub fn to_canonical_line(c: &Commit) -> String {
    let rec = CanonicalRecord {
        commit_id: &c.commit_id,
        project: &c.project,
        timestamp: c.author_timestamp,
        message: &c.message,
        added: c
            .added_lines
            .iter()
            .map(|l| CanonicalLine {
                file: &l.file_path,
                line: l.line_number,
                content: &l.content,
                defective: Some(l.is_defective),
            })
            .collect(),
        removed: c
            .removed_lines
            .iter()
            .map(|l| CanonicalLine {
                file: &l.file_path,
                line: l.line_number,
                content: &l.content,
                defective: None,
            })
            .collect(),
        features: c.expert.values(),
        feature_names: c.expert.names(),
        label: u8::from(c.is_defect_inducing),
        fix_timestamp: c.first_fix_timestamp,
    };
    serde_json::to_string(&rec).expect("canonical record serializes")
}

pub fn write_corpus<W: Write>(mut w: W, commits: &[Commit]) -> Result<()> {
    for c in commits {
        writeln!(w, "{}", to_canonical_line(c))?;
    }
    w.flush()?;
    Ok(())
}

/// Commit lookup by id over a borrowed corpus.
#[derive(Debug, Clone)]
pub struct CorpusIndex<'a> {
    commits: &'a [Commit],
    by_id: HashMap<&'a str, usize>,
}

impl<'a> CorpusIndex<'a> {
    pub fn new(commits: &'a [Commit]) -> Self {
        let by_id = commits
            .iter()
            .enumerate()
            .map(|(i, c)| (c.commit_id.as_str(), i))
            .collect();
        Self { commits, by_id }
    }

    pub fn get(&self, id: &str) -> Option<&'a Commit> {
        self.by_id.get(id).map(|&i| &self.commits[i])
    }

    pub fn commits(&self) -> &'a [Commit] {
        self.commits
    }

    pub fn len(&self) -> usize {
        self.commits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commits.is_empty()
    }
}
