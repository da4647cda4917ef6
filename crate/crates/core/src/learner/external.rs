//! External learner over a line-delimited JSON protocol on a child's stdio.
//!
//! Requests, one per line:
//!
//! ```text
//! {"op":"train","config":{...},"examples":[{"joint":[...],"label":0|1},...]}
//! {"op":"predict","examples":[{"joint":[...]}]}
//! {"op":"save"}
//! {"op":"load","checkpoint":"id"}
//! ```
//!
//! Responses are `{"ok":true, ...payload}` or `{"ok":false,"error":"message"}`.
//! Payloads: `train`/`save`/`load` carry `"checkpoint"`; `predict` carries
//! `"scores"` and optionally `"labels"`. One request is in flight at a time.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{FusedExample, LogisticLearner, Prediction, TrainConfig};
use crate::error::{Error, Result};

const STDERR_KEEP: usize = 16 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireExample {
    pub joint: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Request {
    Train {
        config: TrainConfig,
        examples: Vec<WireExample>,
    },
    Predict {
        examples: Vec<WireExample>,
    },
    Save,
    Load {
        checkpoint: String,
    },
}

/// Program and arguments for the child process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerCommand {
    pub program: String,
    pub args: Vec<String>,
}

impl LearnerCommand {
    /// Splits on whitespace; no shell quoting.
    pub fn parse(command_line: &str) -> Result<Self> {
        let mut parts = command_line.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| Error::Config("empty external learner command".into()))?;
        Ok(Self {
            program,
            args: parts.collect(),
        })
    }

    pub fn display(&self) -> String {
        std::iter::once(self.program.as_str())
            .chain(self.args.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug)]
pub struct ExternalLearner {
    command: LearnerCommand,
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    stderr_tail: Arc<Mutex<Vec<u8>>>,
    stderr_thread: Option<JoinHandle<()>>,
    checkpoint: String,
}

impl ExternalLearner {
    pub fn spawn(command: LearnerCommand) -> Result<Self> {
        let mut child = Command::new(&command.program)
            .args(&command.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::LearnerUnavailable {
                message: format!("cannot launch `{}`", command.display()),
                diagnostic: e.to_string(),
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut stderr = child.stderr.take().expect("piped stderr");
        let stderr_tail = Arc::new(Mutex::new(Vec::new()));
        let sink = Arc::clone(&stderr_tail);
        let stderr_thread = std::thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while let Ok(n) = stderr.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let mut tail = sink.lock().expect("stderr buffer");
                tail.extend_from_slice(&buf[..n]);
                if tail.len() > STDERR_KEEP {
                    let cut = tail.len() - STDERR_KEEP;
                    tail.drain(..cut);
                }
            }
        });
        Ok(Self {
            command,
            child,
            stdin,
            stdout,
            stderr_tail,
            stderr_thread: Some(stderr_thread),
            checkpoint: "external:untrained".to_string(),
        })
    }

    pub fn command(&self) -> &LearnerCommand {
        &self.command
    }

    pub fn checkpoint_id(&self) -> &str {
        &self.checkpoint
    }

    fn unavailable(&mut self, message: String) -> Error {
        // give a dying child a moment to flush stderr
        let status = match self.child.try_wait() {
            Ok(Some(s)) => Some(s),
            _ => {
                std::thread::sleep(std::time::Duration::from_millis(50));
                self.child.try_wait().ok().flatten()
            }
        };
        if status.is_some() {
            if let Some(t) = self.stderr_thread.take() {
                let _ = t.join();
            }
        }
        let mut diagnostic =
            String::from_utf8_lossy(&self.stderr_tail.lock().expect("stderr buffer")).into_owned();
        if let Some(s) = status {
            diagnostic = format!("{s}; stderr: {diagnostic}");
        }
        Error::LearnerUnavailable {
            message: format!("`{}`: {message}", self.command.display()),
            diagnostic,
        }
    }

    fn call(&mut self, req: &Request) -> Result<Map<String, Value>> {
        let line = serde_json::to_string(req).expect("request serializes");
        if let Err(e) = writeln!(self.stdin, "{line}").and_then(|_| self.stdin.flush()) {
            return Err(self.unavailable(format!("write failed: {e}")));
        }
        let mut resp = String::new();
        match self.stdout.read_line(&mut resp) {
            Ok(0) => return Err(self.unavailable("child closed its output".into())),
            Err(e) => return Err(self.unavailable(format!("read failed: {e}"))),
            Ok(_) => {}
        }
        let value: Value = match serde_json::from_str(resp.trim()) {
            Ok(v) => v,
            Err(e) => {
                return Err(self.unavailable(format!("malformed response ({e}): {}", resp.trim())))
            }
        };
        let Value::Object(map) = value else {
            return Err(self.unavailable("response is not an object".into()));
        };
        match map.get("ok") {
            Some(Value::Bool(true)) => Ok(map),
            Some(Value::Bool(false)) => {
                let msg = map
                    .get("error")
                    .and_then(Value::as_str)
                    .unwrap_or("unspecified error")
                    .to_string();
                Err(self.unavailable(format!("child reported error: {msg}")))
            }
            _ => Err(self.unavailable("response lacks boolean `ok`".into())),
        }
    }

    fn take_checkpoint(&mut self, map: &Map<String, Value>) {
        if let Some(id) = map.get("checkpoint").and_then(Value::as_str) {
            self.checkpoint = id.to_string();
        }
    }

    pub fn train(&mut self, batch: &[FusedExample], cfg: &TrainConfig) -> Result<()> {
        let req = Request::Train {
            config: *cfg,
            examples: batch
                .iter()
                .map(|e| WireExample {
                    joint: e.joint().to_vec(),
                    label: e.label,
                })
                .collect(),
        };
        let map = self.call(&req)?;
        match map.get("checkpoint").and_then(Value::as_str) {
            Some(_) => self.take_checkpoint(&map),
            // children that do not name checkpoints still get a fresh id per step
            None => self.checkpoint = format!("external:{}", self.next_generation()),
        }
        Ok(())
    }

    fn next_generation(&self) -> u64 {
        self.checkpoint
            .rsplit(':')
            .next()
            .and_then(|n| n.parse::<u64>().ok())
            .map_or(1, |n| n + 1)
    }

    pub fn predict(&mut self, examples: &[FusedExample]) -> Result<Vec<Prediction>> {
        if examples.is_empty() {
            return Ok(vec![]);
        }
        let req = Request::Predict {
            examples: examples
                .iter()
                .map(|e| WireExample {
                    joint: e.joint().to_vec(),
                    label: None,
                })
                .collect(),
        };
        let map = self.call(&req)?;
        let scores: Vec<f64> = match map.get("scores").map(|s| serde_json::from_value(s.clone())) {
            Some(Ok(s)) => s,
            _ => return Err(self.unavailable("predict response lacks numeric `scores`".into())),
        };
        if scores.len() != examples.len() {
            return Err(self.unavailable(format!(
                "predict returned {} scores for {} examples",
                scores.len(),
                examples.len()
            )));
        }
        let labels: Option<Vec<u8>> = map
            .get("labels")
            .and_then(|l| serde_json::from_value(l.clone()).ok());
        Ok(scores
            .iter()
            .enumerate()
            .map(|(i, &score)| Prediction {
                score,
                label: labels
                    .as_ref()
                    .and_then(|l| l.get(i).copied())
                    .unwrap_or(u8::from(score >= 0.5)),
            })
            .collect())
    }

    pub fn save(&mut self) -> Result<String> {
        let map = self.call(&Request::Save)?;
        self.take_checkpoint(&map);
        Ok(self.checkpoint.clone())
    }

    pub fn load(&mut self, checkpoint: &str) -> Result<()> {
        let map = self.call(&Request::Load {
            checkpoint: checkpoint.to_string(),
        })?;
        self.checkpoint = checkpoint.to_string();
        self.take_checkpoint(&map);
        Ok(())
    }
}

impl Drop for ExternalLearner {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Serves the protocol with the builtin learner until `input` ends.
///
/// This is the reference child implementation; any program that answers the
/// same messages can stand in for it.
pub fn serve<R: BufRead, W: Write>(input: R, mut output: W, dim: usize) -> Result<()> {
    let mut learner = LogisticLearner::new(dim);
    let mut saved: BTreeMap<String, LogisticLearner> = BTreeMap::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match serde_json::from_str::<Request>(&line) {
            Err(e) => json!({"ok": false, "error": format!("bad request: {e}")}),
            Ok(req) => handle(&mut learner, &mut saved, req),
        };
        writeln!(output, "{resp}")?;
        output.flush()?;
    }
    Ok(())
}

fn handle(
    learner: &mut LogisticLearner,
    saved: &mut BTreeMap<String, LogisticLearner>,
    req: Request,
) -> Value {
    let dim = learner.dim();
    let bad_dim = |exs: &[WireExample]| exs.iter().position(|e| e.joint.len() != dim);
    match req {
        Request::Train { config, examples } => {
            if let Some(i) = bad_dim(&examples) {
                return json!({"ok": false, "error": format!("example {i} has wrong dimension")});
            }
            if let Err(e) = config.validate() {
                return json!({"ok": false, "error": e.to_string()});
            }
            let mut batch = Vec::with_capacity(examples.len());
            for (i, e) in examples.into_iter().enumerate() {
                let Some(y) = e.label else {
                    return json!({"ok": false, "error": format!("example {i} has no label")});
                };
                batch.push(FusedExample::from_joint(e.joint).with_label(y));
            }
            learner.train(&batch, &config);
            json!({"ok": true, "checkpoint": learner.checkpoint_id()})
        }
        Request::Predict { examples } => {
            if let Some(i) = bad_dim(&examples) {
                return json!({"ok": false, "error": format!("example {i} has wrong dimension")});
            }
            let batch: Vec<_> = examples
                .into_iter()
                .map(|e| FusedExample::from_joint(e.joint))
                .collect();
            let preds = learner.predict(&batch);
            let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
            let labels: Vec<u8> = preds.iter().map(|p| p.label).collect();
            json!({"ok": true, "scores": scores, "labels": labels})
        }
        Request::Save => {
            let id = learner.checkpoint_id().to_string();
            saved.insert(id.clone(), learner.clone());
            json!({"ok": true, "checkpoint": id})
        }
        Request::Load { checkpoint } => match saved.get(&checkpoint) {
            Some(l) => {
                *learner = l.clone();
                json!({"ok": true, "checkpoint": checkpoint})
            }
            None => json!({"ok": false, "error": format!("unknown checkpoint `{checkpoint}`")}),
        },
    }
}
