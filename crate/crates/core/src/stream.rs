//! Verification-latency timeline and the training queue / training pool state machine.
//!
//! A commit arrives unlabeled and sits in the queue. It leaves the queue either
//! when its fix shows up before the waiting period ends (`FixArrival`, pooled as
//! positive) or when the waiting period elapses (`Maturation`, pooled as
//! negative). A fix that shows up after maturation flips the pooled label
//! (`Relabel`).

use std::fmt;
use std::io::Write;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};

use crate::corpus::{fix_time_of, is_chronological, Commit, CorpusIndex, Timestamp};
use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencyConfig {
    pub waiting_days: u32,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self { waiting_days: 90 }
    }
}

impl LatencyConfig {
    pub fn new(waiting_days: u32) -> Result<Self> {
        if waiting_days == 0 {
            return Err(Error::Config("waiting_days must be positive".into()));
        }
        Ok(Self { waiting_days })
    }

    pub fn waiting_seconds(&self) -> i64 {
        i64::from(self.waiting_days) * SECONDS_PER_DAY
    }
}

/// Declaration order is the tie-break priority for simultaneous events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrival,
    FixArrival,
    Maturation,
    Relabel,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Arrival => "arrival",
            EventKind::FixArrival => "fix_arrival",
            EventKind::Maturation => "maturation",
            EventKind::Relabel => "relabel",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StreamEvent {
    pub at: Timestamp,
    pub kind: EventKind,
    pub commit_id: String,
}

impl StreamEvent {
    fn new(at: Timestamp, kind: EventKind, commit_id: &str) -> Self {
        Self {
            at,
            kind,
            commit_id: commit_id.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PoolLabel {
    Negative,
    Positive,
}

impl PoolLabel {
    pub fn as_u8(self) -> u8 {
        match self {
            PoolLabel::Negative => 0,
            PoolLabel::Positive => 1,
        }
    }
}

/// Builds the event timeline for an ordered corpus.
pub fn build_timeline(corpus: &[Commit], cfg: LatencyConfig) -> Result<Vec<StreamEvent>> {
    if !is_chronological(corpus) {
        return Err(Error::Contract(
            "corpus must be sorted by (timestamp, commit_id)".into(),
        ));
    }
    let wait = cfg.waiting_seconds();
    let mut events = Vec::with_capacity(corpus.len() * 2);
    for c in corpus {
        let id = c.commit_id.as_str();
        let matures = c.author_timestamp + wait;
        events.push(StreamEvent::new(c.author_timestamp, EventKind::Arrival, id));
        match fix_time_of(c) {
            Some(fix) if fix < matures => {
                events.push(StreamEvent::new(fix, EventKind::FixArrival, id))
            }
            Some(fix) => {
                events.push(StreamEvent::new(matures, EventKind::Maturation, id));
                events.push(StreamEvent::new(fix, EventKind::Relabel, id));
            }
            None => events.push(StreamEvent::new(matures, EventKind::Maturation, id)),
        }
    }
    // (at, kind, commit_id) is exactly the derived Ord
    events.sort();
    Ok(events)
}

/// Label a commit would carry in the pool at time `now`, if any.
///
/// This is the closed-form counterpart of replaying the timeline up to and
/// including `now`.
pub fn pool_label_at(commit: &Commit, now: Timestamp, cfg: LatencyConfig) -> Option<PoolLabel> {
    if commit.author_timestamp > now {
        return None;
    }
    match fix_time_of(commit) {
        Some(fix) if fix <= now => Some(PoolLabel::Positive),
        _ if commit.author_timestamp + cfg.waiting_seconds() <= now => Some(PoolLabel::Negative),
        _ => None,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingQueue {
    entries: IndexSet<String>,
}

impl TrainingQueue {
    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPool {
    entries: IndexMap<String, PoolLabel>,
}

impl TrainingPool {
    pub fn get(&self, id: &str) -> Option<PoolLabel> {
        self.entries.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, PoolLabel)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Queue and pool together; the unit the simulator advances.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamState {
    pub queue: TrainingQueue,
    pub pool: TrainingPool,
    pub arrivals: usize,
}

impl StreamState {
    pub fn apply(&mut self, ev: &StreamEvent) -> Result<()> {
        let id = ev.commit_id.as_str();
        let err = |what: &str| {
            Err(Error::StateMachine(format!(
                "{} of `{id}` at {}: {what}",
                ev.kind, ev.at
            )))
        };
        match ev.kind {
            EventKind::Arrival => {
                if self.queue.contains(id) || self.pool.entries.contains_key(id) {
                    return err("commit already arrived");
                }
                self.queue.entries.insert(id.to_string());
                self.arrivals += 1;
            }
            EventKind::Maturation | EventKind::FixArrival => {
                if !self.queue.entries.shift_remove(id) {
                    return err("commit is not in the training queue");
                }
                let label = if ev.kind == EventKind::Maturation {
                    PoolLabel::Negative
                } else {
                    PoolLabel::Positive
                };
                self.pool.entries.insert(id.to_string(), label);
            }
            EventKind::Relabel => match self.pool.entries.get_mut(id) {
                Some(l @ PoolLabel::Negative) => *l = PoolLabel::Positive,
                Some(PoolLabel::Positive) => return err("commit is already positive"),
                None => return err("commit is not in the training pool"),
            },
        }
        Ok(())
    }
}

/// Value-semantics transition: consumes the state and returns the successor.
pub fn apply_event(
    queue: TrainingQueue,
    pool: TrainingPool,
    ev: &StreamEvent,
) -> Result<(TrainingQueue, TrainingPool)> {
    let arrivals = queue.len() + pool.len();
    let mut state = StreamState {
        queue,
        pool,
        arrivals,
    };
    state.apply(ev)?;
    Ok((state.queue, state.pool))
}

/// Materializes pool entries against the corpus, in pool insertion order.
pub fn visible_training_set<'a>(
    pool: &TrainingPool,
    index: &CorpusIndex<'a>,
) -> Vec<(&'a Commit, PoolLabel)> {
    pool.iter()
        .filter_map(|(id, label)| index.get(id).map(|c| (c, label)))
        .collect()
}

/// Writes `at,kind,commit_id` lines.
pub fn dump_timeline<W: Write>(mut w: W, events: &[StreamEvent]) -> Result<()> {
    writeln!(w, "at,kind,commit_id")?;
    for e in events {
        writeln!(w, "{},{},{}", e.at, e.kind, e.commit_id)?;
    }
    Ok(())
}
