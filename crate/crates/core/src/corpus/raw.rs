//! Conversion from the published JIT-Defects4J tabular layout.
//!
//! The distribution ships commit-level metrics as CSV and line-level diffs
//! separately. The converter takes the metrics CSV (required) and an optional
//! line-delimited JSON file of diffs keyed by commit hash:
//!
//! ```text
//! {"commit_hash":"...","message":"...",
//!  "added":[{"file":"...","line":7,"content":"...","defective":true}],
//!  "removed":[{"file":"...","line":6,"content":"..."}]}
//! ```
//!
//! Column names are matched case-insensitively against the aliases below.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde_json::Value;

use super::{
    lines_from_value, sort_chronologically, validate_commit, Commit, ExpertFeatureVector, Ingested,
    Timestamp, EXPERT_FEATURE_NAMES,
};
use crate::error::{Error, Result};

const ID_COLUMNS: &[&str] = &["commit_hash", "commit_id", "_id", "hash"];
const PROJECT_COLUMNS: &[&str] = &["project", "project_name", "repo"];
const TIME_COLUMNS: &[&str] = &["author_date_unix_timestamp", "timestamp", "author_date"];
const LABEL_COLUMNS: &[&str] = &["is_buggy_commit", "buggy", "contains_bug", "label", "bug"];
const FIX_COLUMNS: &[&str] = &[
    "first_fix_timestamp",
    "fix_timestamp",
    "first_fix_date",
    "fix_date",
    "fixed_at",
];
const MESSAGE_COLUMNS: &[&str] = &["commit_message", "message", "msg"];

fn metric_aliases(name: &str) -> &'static [&'static str] {
    match name {
        "ns" => &["ns"],
        "nd" => &["nd"],
        "nf" => &["nf"],
        "entropy" => &["entropy", "ent"],
        "la" => &["la"],
        "ld" => &["ld"],
        "lt" => &["lt"],
        "fix" => &["fix"],
        "ndev" => &["ndev"],
        "age" => &["age"],
        "nuc" => &["nuc"],
        "exp" => &["exp", "aexp"],
        "rexp" => &["rexp", "arexp"],
        "sexp" => &["sexp", "asexp"],
        _ => &[],
    }
}

struct Columns {
    id: usize,
    project: usize,
    time: usize,
    label: usize,
    fix: Option<usize>,
    message: Option<usize>,
    metrics: [usize; 14],
}

fn find(headers: &[String], aliases: &[&str]) -> Option<usize> {
    aliases
        .iter()
        .find_map(|a| headers.iter().position(|h| h == a))
}

impl Columns {
    fn resolve(headers: &csv::StringRecord) -> Result<Self> {
        let headers: Vec<String> = headers
            .iter()
            .map(|h| h.trim().to_ascii_lowercase())
            .collect();
        let need = |aliases: &[&str], what: &str| {
            find(&headers, aliases)
                .ok_or_else(|| Error::parse(0, what, format!("no column among {aliases:?}")))
        };
        let mut metrics = [0usize; 14];
        for (slot, name) in metrics.iter_mut().zip(EXPERT_FEATURE_NAMES) {
            *slot = need(metric_aliases(name), name)?;
        }
        Ok(Self {
            id: need(ID_COLUMNS, "commit_hash")?,
            project: need(PROJECT_COLUMNS, "project")?,
            time: need(TIME_COLUMNS, "author_date")?,
            label: need(LABEL_COLUMNS, "is_buggy_commit")?,
            fix: find(&headers, FIX_COLUMNS),
            message: find(&headers, MESSAGE_COLUMNS),
            metrics,
        })
    }
}

/// Parses integer seconds, RFC 3339, `YYYY-MM-DD HH:MM:SS` or `YYYY-MM-DD`.
pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(n) = s.parse::<i64>() {
        return Some(n);
    }
    if let Ok(f) = s.parse::<f64>() {
        if f.is_finite() && f.fract() == 0.0 {
            return Some(f as i64);
        }
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    if let Ok(dt) = DateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S %z") {
        return Some(dt.timestamp());
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S") {
        return Some(dt.and_utc().timestamp());
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

fn parse_label(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" | "yes" => Some(true),
        "0" | "0.0" | "false" | "no" => Some(false),
        _ => None,
    }
}

struct Diff {
    message: Option<String>,
    added: Value,
    removed: Value,
}

fn read_diffs<R: Read>(reader: R) -> Result<HashMap<String, (usize, Diff)>> {
    let mut out = HashMap::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = i + 1;
        let v: Value =
            serde_json::from_str(&line).map_err(|e| Error::parse(record, "<diff>", e))?;
        let id = ID_COLUMNS
            .iter()
            .find_map(|k| v.get(*k).and_then(Value::as_str))
            .ok_or_else(|| Error::parse(record, "commit_hash", "missing"))?
            .to_string();
        let message = ["message", "msg", "commit_message"]
            .iter()
            .find_map(|k| v.get(*k).and_then(Value::as_str))
            .map(str::to_string);
        let diff = Diff {
            message,
            added: v.get("added").cloned().unwrap_or(Value::Array(vec![])),
            removed: v.get("removed").cloned().unwrap_or(Value::Array(vec![])),
        };
        out.insert(id, (record, diff));
    }
    Ok(out)
}

/// Builds a validated, chronologically sorted corpus from the raw tables.
pub fn convert<F: Read, D: Read>(features_csv: F, diffs: Option<D>) -> Result<Ingested> {
    let mut diffs = match diffs {
        Some(d) => read_diffs(d)?,
        None => HashMap::new(),
    };
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(false)
        .from_reader(features_csv);
    let cols = Columns::resolve(rdr.headers().map_err(|e| Error::parse(0, "<header>", e))?)?;
    let mut out = Ingested::default();
    let mut seen = std::collections::HashSet::new();

    for (i, row) in rdr.records().enumerate() {
        // header is record 1
        let record = i + 2;
        let row = row.map_err(|e| Error::parse(record, "<row>", e))?;
        let get = |idx: usize| row.get(idx).unwrap_or("").trim();
        let commit_id = get(cols.id).to_string();
        let project = get(cols.project).to_string();
        let author_timestamp = parse_timestamp(get(cols.time)).ok_or_else(|| {
            Error::parse(
                record,
                "author_date",
                format!("bad timestamp `{}`", get(cols.time)),
            )
        })?;
        let is_defect_inducing = parse_label(get(cols.label)).ok_or_else(|| {
            Error::parse(
                record,
                "is_buggy_commit",
                format!("bad label `{}`", get(cols.label)),
            )
        })?;
        let first_fix_timestamp =
            match cols.fix.map(get) {
                None | Some("") => None,
                Some(s) if s.eq_ignore_ascii_case("nan") || s.eq_ignore_ascii_case("null") => None,
                Some(s) => Some(parse_timestamp(s).ok_or_else(|| {
                    Error::parse(record, "fix_date", format!("bad timestamp `{s}`"))
                })?),
            };
        let mut values = [0.0; 14];
        for (slot, (&idx, name)) in values
            .iter_mut()
            .zip(cols.metrics.iter().zip(EXPERT_FEATURE_NAMES))
        {
            *slot = get(idx)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(record, name, format!("bad value `{}`", get(idx))))?;
        }
        let expert = ExpertFeatureVector::new(&values)?
            .with_names(EXPERT_FEATURE_NAMES.iter().map(|s| s.to_string()).collect())?;
        let mut message = cols.message.map(|m| get(m).to_string()).unwrap_or_default();
        let (mut added_lines, mut removed_lines) = (Vec::new(), Vec::new());
        if let Some((drec, diff)) = diffs.remove(&commit_id) {
            if let Some(m) = diff.message {
                message = m;
            }
            added_lines = lines_from_value(&diff.added, drec, "added", true)?;
            removed_lines = lines_from_value(&diff.removed, drec, "removed", false)?;
        }
        let commit = Commit {
            commit_id,
            project,
            author_timestamp,
            message,
            added_lines,
            removed_lines,
            expert,
            is_defect_inducing,
            // clean commits never carry a fix, whatever the source column says
            first_fix_timestamp: if is_defect_inducing {
                first_fix_timestamp
            } else {
                None
            },
        };
        validate_commit(&commit, &mut out.warnings)?;
        if !seen.insert(commit.commit_id.clone()) {
            return Err(Error::Validation(format!(
                "duplicate commit_id `{}` at record {record}",
                commit.commit_id
            )));
        }
        out.commits.push(commit);
    }
    let mut orphans: Vec<_> = diffs.into_keys().collect();
    orphans.sort();
    for id in orphans {
        out.warnings
            .push(format!("diff for `{id}` has no metrics row; skipped"));
    }
    sort_chronologically(&mut out.commits);
    Ok(out)
}
