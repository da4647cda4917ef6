//! Thin chat-completions client and the on-disk store of recorded responses.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    /// `None` leaves the provider default in place.
    pub temperature: Option<f64>,
    pub max_concurrent: usize,
    /// Environment variable holding a bearer token, if any.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: String::new(),
            temperature: None,
            max_concurrent: 4,
            api_key_env: None,
            timeout_secs: 300,
        }
    }
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<()> {
        if self.model.is_empty() {
            return Err(Error::Config("endpoint model must be set".into()));
        }
        if self.max_concurrent == 0 {
            return Err(Error::Config("max_concurrent must be at least 1".into()));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(Error::Config(format!(
                "base_url `{}` is not an http(s) URL",
                self.base_url
            )));
        }
        Ok(())
    }

    pub fn url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        if let Some(t) = self.temperature {
            body["temperature"] = json!(t);
        }
        body
    }
}

pub struct ChatClient {
    cfg: EndpointConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl ChatClient {
    pub fn new(cfg: EndpointConfig) -> Result<Self> {
        cfg.validate()?;
        let api_key =
            match &cfg.api_key_env {
                Some(var) => Some(std::env::var(var).map_err(|_| {
                    Error::Config(format!("environment variable `{var}` is not set"))
                })?),
                None => None,
            };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            cfg,
            agent,
            api_key,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    /// Sends one single-message conversation and returns the reply text.
    pub fn complete(&self, prompt: &str) -> Result<String> {
        let body = self.cfg.request_body(prompt).to_string();
        let mut req = self
            .agent
            .post(self.cfg.url())
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send(body).map_err(|e| Error::Endpoint(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Endpoint(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(Error::Endpoint(format!(
                "HTTP {status}: {}",
                truncate(&text, 500)
            )));
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Endpoint(format!("reply is not JSON: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| Error::Endpoint("reply has no choices[0].message.content".into()))
    }

    /// Runs every job with at most `max_concurrent` in flight. Results come
    /// back in job order; one failure does not affect the others.
    pub fn complete_all(&self, jobs: &[Job]) -> Vec<Result<RecordedResponse>> {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<RecordedResponse>>>> =
            jobs.iter().map(|_| Mutex::new(None)).collect();
        let workers = self.cfg.max_concurrent.min(jobs.len());
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(job) = jobs.get(i) else { break };
                    let out = self.complete(&job.prompt).map(|raw| RecordedResponse {
                        commit_id: job.commit_id.clone(),
                        model: self.cfg.model.clone(),
                        run_index: job.run_index,
                        temperature: self.cfg.temperature,
                        base_url: self.cfg.base_url.clone(),
                        prompt: job.prompt.clone(),
                        raw_response: raw,
                    });
                    *slots[i].lock().expect("slot lock") = Some(out);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().expect("slot lock").expect("every job ran"))
            .collect()
    }
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub commit_id: String,
    pub run_index: u32,
    pub prompt: String,
}

/// Raw reply plus the request that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedResponse {
    pub commit_id: String,
    pub model: String,
    pub run_index: u32,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub base_url: String,
    #[serde(default)]
    pub prompt: String,
    pub raw_response: String,
}

/// One JSON file per `(commit_id, model, run_index)`.
pub struct ResponseStore {
    dir: PathBuf,
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '.' | '_') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

impl ResponseStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, commit_id: &str, model: &str, run_index: u32) -> PathBuf {
        self.dir.join(format!(
            "{}__{}__{run_index}.json",
            sanitize(commit_id),
            sanitize(model)
        ))
    }

    pub fn save(&self, rec: &RecordedResponse) -> Result<PathBuf> {
        let path = self.path_for(&rec.commit_id, &rec.model, rec.run_index);
        let text =
            serde_json::to_string_pretty(rec).map_err(|e| Error::Validation(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        Ok(path)
    }

    /// All records, ordered by commit id, model, then run index.
    pub fn load_all(&self) -> Result<Vec<RecordedResponse>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = fs::read_to_string(&path)?;
            let rec: RecordedResponse = serde_json::from_str(&text)
                .map_err(|e| Error::parse(0, path.display().to_string(), e))?;
            out.push(rec);
        }
        out.sort_by(|a, b| {
            (a.commit_id.as_str(), a.model.as_str(), a.run_index).cmp(&(
                b.commit_id.as_str(),
                b.model.as_str(),
                b.run_index,
            ))
        });
        Ok(out)
    }
}
