//! Parsing and validation of fault-localization responses, and their
//! conversion into line rankings.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::Commit;
use crate::error::{Error, Result};
use crate::localization::{find_added_line, rank, CommitRanking, RankInput};

pub const MAX_ENTRIES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FaultEntry {
    pub line_number: u32,
    pub code_content: String,
    pub reason: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LocalizationResponse {
    pub intent_of_this_commit: String,
    pub fault_localization: Vec<FaultEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    pub response: LocalizationResponse,
    pub diagnostics: Vec<String>,
}

/// Returns the JSON body and its byte offset in `raw`, dropping a surrounding
/// Markdown code fence if there is one.
fn unfence(raw: &str) -> (usize, &str) {
    let Some(open) = raw.find("```") else {
        let start = raw.len() - raw.trim_start().len();
        return (start, raw.trim());
    };
    let after_ticks = open + 3;
    // the info string (`json`) runs to the end of the fence line
    let body_start = raw[after_ticks..]
        .find('\n')
        .map_or(raw.len(), |i| after_ticks + i + 1);
    let body_end = raw[body_start..]
        .find("```")
        .map_or(raw.len(), |i| body_start + i);
    let body = &raw[body_start..body_end];
    let lead = body.len() - body.trim_start().len();
    (body_start + lead, body.trim())
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return offset + column.saturating_sub(1).min(l.len());
        }
        offset += l.len();
    }
    text.len()
}

fn entry_from_value(v: &Value) -> std::result::Result<FaultEntry, String> {
    let obj = v.as_object().ok_or("entry is not an object")?;
    let line_number = match obj.get("lineNumber") {
        Some(Value::Number(n)) => n.as_u64().or_else(|| {
            n.as_f64()
                .filter(|f| f.fract() == 0.0 && *f >= 0.0)
                .map(|f| f as u64)
        }),
        Some(Value::String(s)) => s.trim().parse::<u64>().ok(),
        _ => None,
    }
    .and_then(|n| u32::try_from(n).ok())
    .filter(|&n| n >= 1)
    .ok_or("lineNumber must be a positive integer")?;
    let code_content = obj
        .get("codeContent")
        .and_then(Value::as_str)
        .ok_or("codeContent must be a string")?
        .to_string();
    let reason = match obj.get("reason") {
        Some(Value::String(s)) => s.clone(),
        None | Some(Value::Null) => String::new(),
        Some(_) => return Err("reason must be a string".into()),
    };
    let score = match obj.get("score") {
        Some(Value::Number(n)) => n.as_f64(),
        Some(Value::String(s)) => s.trim().parse::<f64>().ok(),
        _ => None,
    }
    .filter(|s| s.is_finite())
    .ok_or("score must be a number")?;
    if !(1.0..=10.0).contains(&score) {
        return Err(format!("score {score} outside [1, 10]"));
    }
    Ok(FaultEntry {
        line_number,
        code_content,
        reason,
        score,
    })
}

/// Parses a raw model answer. Invalid entries are dropped one by one and
/// explained in `diagnostics`.
pub fn parse_response(raw: &str) -> Result<ParsedResponse> {
    let (start, body) = unfence(raw);
    let value: Value = serde_json::from_str(body).map_err(|e| Error::ResponseParse {
        offset: start + byte_offset(body, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let obj = value.as_object().ok_or(Error::ResponseParse {
        offset: start,
        message: "top-level value is not an object".into(),
    })?;
    let mut diagnostics = Vec::new();
    let intent = match obj.get("intentOfThisCommit") {
        Some(Value::String(s)) => s.clone(),
        _ => {
            diagnostics.push("missing intentOfThisCommit".to_string());
            String::new()
        }
    };
    let entries = match obj.get("faultLocalization") {
        Some(Value::Array(a)) => a.as_slice(),
        _ => {
            diagnostics.push("faultLocalization is not an array".to_string());
            &[]
        }
    };
    let mut kept = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        match entry_from_value(e) {
            Ok(entry) if kept.len() < MAX_ENTRIES => kept.push(entry),
            Ok(_) => diagnostics.push(format!(
                "entry {i}: beyond the first {MAX_ENTRIES} entries; dropped"
            )),
            Err(why) => diagnostics.push(format!("entry {i}: {why}; dropped")),
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyResponse { diagnostics });
    }
    Ok(ParsedResponse {
        response: LocalizationResponse {
            intent_of_this_commit: intent,
            fault_localization: kept,
        },
        diagnostics,
    })
}

/// Joins response entries to the commit's added lines and ranks them.
///
/// Duplicate line numbers keep the highest-scoring entry (first on ties).
/// Lines the commit did not add are dropped; content drift only warns.
pub fn to_ranking(resp: &LocalizationResponse, commit: &Commit) -> (CommitRanking, Vec<String>) {
    let mut warnings = Vec::new();
    let mut best: HashMap<u32, usize> = HashMap::new();
    for (i, e) in resp.fault_localization.iter().enumerate() {
        match best.get(&e.line_number) {
            Some(&j) if resp.fault_localization[j].score >= e.score => {
                warnings.push(format!(
                    "duplicate line {} (entry {i}); lower score dropped",
                    e.line_number
                ));
            }
            Some(&j) => {
                warnings.push(format!(
                    "duplicate line {} (entry {j}); lower score dropped",
                    e.line_number
                ));
                best.insert(e.line_number, i);
            }
            None => {
                best.insert(e.line_number, i);
            }
        }
    }
    let mut inputs = Vec::new();
    for (i, e) in resp.fault_localization.iter().enumerate() {
        if best.get(&e.line_number) != Some(&i) {
            continue;
        }
        let Some(truth) = find_added_line(commit, None, e.line_number, &e.code_content) else {
            warnings.push(format!(
                "line {} is not an added line of `{}`; dropped",
                e.line_number, commit.commit_id
            ));
            continue;
        };
        if truth.content.trim() != e.code_content.trim() {
            warnings.push(format!(
                "line {}: content differs from the diff; kept",
                e.line_number
            ));
        }
        inputs.push(RankInput {
            file: Some(truth.file_path.clone()),
            line_number: e.line_number,
            content: e.code_content.clone(),
            score: e.score,
        });
    }
    let (ranking, more) = rank(commit, &inputs).expect("entries are unique after deduplication");
    warnings.extend(more);
    (ranking, warnings)
}
