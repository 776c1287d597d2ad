//! Offline test double for [`ChatProvider`].
//!
//! Script files are JSON. Either a bare array of entries, or
//!
//! ```json
//! {
//!   "on_exhausted": "error",
//!   "responses": ["R", {"status": 429}, {"fault": "timeout"}, {"text": "P", "delay_ms": 5}],
//!   "players": {"Player_2": ["S", "S"]}
//! }
//! ```
//!
//! A request from a seat listed under `players` consumes that seat's queue;
//! everything else consumes `responses`. `on_exhausted` is `error` (default),
//! `cycle` or `repeat_last`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ApiKey, ChatProvider, ChatRequest, ProviderError};
use crate::transcript::Seat;

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read response script {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid response script {path}: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptEntry {
    Text(String),
    Status(u16),
    Timeout,
    Delayed { text: String, delay_ms: u64 },
}

impl ScriptEntry {
    pub fn text(s: &str) -> Self {
        ScriptEntry::Text(s.to_string())
    }

    pub fn status(code: u16) -> Self {
        ScriptEntry::Status(code)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawEntry {
    Text(String),
    Status { status: u16 },
    Fault { fault: String },
    Delayed { text: String, delay_ms: u64 },
}

impl TryFrom<RawEntry> for ScriptEntry {
    type Error = String;
    fn try_from(raw: RawEntry) -> Result<Self, String> {
        Ok(match raw {
            RawEntry::Text(t) => ScriptEntry::Text(t),
            RawEntry::Status { status } => ScriptEntry::Status(status),
            RawEntry::Fault { fault } if fault == "timeout" => ScriptEntry::Timeout,
            RawEntry::Fault { fault } => return Err(format!("unknown fault '{fault}'")),
            RawEntry::Delayed { text, delay_ms } => ScriptEntry::Delayed { text, delay_ms },
        })
    }
}

impl From<&ScriptEntry> for RawEntry {
    fn from(e: &ScriptEntry) -> Self {
        match e {
            ScriptEntry::Text(t) => RawEntry::Text(t.clone()),
            ScriptEntry::Status(s) => RawEntry::Status { status: *s },
            ScriptEntry::Timeout => RawEntry::Fault { fault: "timeout".into() },
            ScriptEntry::Delayed { text, delay_ms } => RawEntry::Delayed {
                text: text.clone(),
                delay_ms: *delay_ms,
            },
        }
    }
}

impl Serialize for ScriptEntry {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawEntry::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScriptEntry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        RawEntry::deserialize(d)?.try_into().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnExhausted {
    #[default]
    Error,
    Cycle,
    RepeatLast,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseScript {
    #[serde(default)]
    pub on_exhausted: OnExhausted,
    #[serde(default)]
    pub responses: Vec<ScriptEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub players: BTreeMap<Seat, Vec<ScriptEntry>>,
}

impl ResponseScript {
    pub fn sequence(responses: Vec<ScriptEntry>) -> Self {
        ResponseScript {
            responses,
            ..Default::default()
        }
    }

    pub fn cycle(responses: Vec<ScriptEntry>) -> Self {
        ResponseScript {
            on_exhausted: OnExhausted::Cycle,
            responses,
            ..Default::default()
        }
    }

    pub fn with_player(mut self, seat: Seat, responses: Vec<ScriptEntry>) -> Self {
        self.players.insert(seat, responses);
        self
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ScriptError> {
        let parse_err = |e: serde_json::Error| ScriptError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        };
        let value: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
        if value.is_array() {
            Ok(ResponseScript::sequence(serde_json::from_value(value).map_err(parse_err)?))
        } else {
            serde_json::from_value(value).map_err(parse_err)
        }
    }

    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScriptError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }
}

#[derive(Debug, Default)]
struct Cursors {
    shared: usize,
    per_seat: BTreeMap<Seat, usize>,
}

/// Replays a [`ResponseScript`], counting calls and peak concurrency.
#[derive(Debug)]
pub struct ScriptedProvider {
    script: ResponseScript,
    cursors: Mutex<Cursors>,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedProvider {
    pub fn new(script: ResponseScript) -> Self {
        ScriptedProvider {
            script,
            cursors: Mutex::new(Cursors::default()),
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    /// Every prompt received, in arrival order.
    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("prompt log").clone()
    }

    fn next(&self, seat: Option<Seat>) -> Option<ScriptEntry> {
        let mut cur = self.cursors.lock().expect("script cursor");
        let (queue, pos) = match seat.and_then(|s| self.script.players.get(&s).map(|q| (s, q))) {
            Some((s, q)) => (q, cur.per_seat.entry(s).or_insert(0)),
            None => (&self.script.responses, &mut cur.shared),
        };
        if queue.is_empty() {
            return None;
        }
        let i = *pos;
        *pos += 1;
        if i < queue.len() {
            return Some(queue[i].clone());
        }
        match self.script.on_exhausted {
            OnExhausted::Error => None,
            OnExhausted::Cycle => Some(queue[i % queue.len()].clone()),
            OnExhausted::RepeatLast => queue.last().cloned(),
        }
    }
}

struct InFlight<'a>(&'a AtomicUsize);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

impl ChatProvider for ScriptedProvider {
    fn send(&self, request: &ChatRequest, _key: &ApiKey, timeout: Duration) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        let _guard = InFlight(&self.in_flight);
        self.peak.fetch_max(now, Ordering::SeqCst);
        self.prompts.lock().expect("prompt log").push(request.prompt.clone());
        match self.next(request.seat).ok_or(ProviderError::Exhausted)? {
            ScriptEntry::Text(t) => Ok(t),
            ScriptEntry::Status(code) => Err(ProviderError::Status {
                code,
                body: String::new(),
            }),
            ScriptEntry::Timeout => Err(ProviderError::Timeout),
            ScriptEntry::Delayed { text, delay_ms } => {
                let delay = Duration::from_millis(delay_ms);
                if delay > timeout {
                    std::thread::sleep(timeout);
                    return Err(ProviderError::Timeout);
                }
                std::thread::sleep(delay);
                Ok(text)
            }
        }
    }
}
