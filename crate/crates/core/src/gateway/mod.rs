//! Chat-completion gateway: admission control, key rotation and retries in
//! front of a pluggable [`ChatProvider`].

mod http;
mod scripted;

use std::fmt;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::transcript::{ExchangeRecord, Seat};

pub use http::HttpProvider;
pub use scripted::{ScriptEntry, ScriptError, ScriptedProvider, ResponseScript, OnExhausted};

/// An API key. Never printed, never serialized.
#[derive(Clone, PartialEq, Eq)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(secret: impl Into<String>) -> Self {
        ApiKey(secret.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(***)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationPolicy {
    /// Advance round-robin on every request.
    PerRequest,
    /// One key per simulation, advancing at simulation boundaries.
    #[default]
    PerSimulation,
    /// Fixed until [`Gateway::set_manual_key`] is called.
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    /// Total attempts per request, first try included.
    pub max_attempts: u32,
    pub base_ms: u64,
    pub cap_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 4,
            base_ms: 250,
            cap_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    /// Upper bound of the wait before attempt `attempt + 1` (1-based `attempt`).
    pub fn ceiling(&self, attempt: u32) -> Duration {
        let exp = self.base_ms.saturating_mul(1u64 << (attempt - 1).min(32));
        Duration::from_millis(exp.min(self.cap_ms))
    }

    /// Actual wait: uniform in `[ceiling/2, ceiling]`.
    pub fn delay<R: Rng>(&self, attempt: u32, rng: &mut R) -> Duration {
        let ceil = self.ceiling(attempt).as_millis() as u64;
        if ceil == 0 {
            return Duration::ZERO;
        }
        Duration::from_millis(rng.random_range(ceil / 2..=ceil))
    }
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub endpoint_url: String,
    pub api_keys: Vec<ApiKey>,
    pub rotation: RotationPolicy,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    pub timeout_ms: u64,
}

impl GatewayConfig {
    pub fn new(endpoint_url: &str, api_keys: Vec<ApiKey>) -> Self {
        GatewayConfig {
            endpoint_url: endpoint_url.to_string(),
            api_keys,
            rotation: RotationPolicy::default(),
            max_in_flight: 4,
            retry: RetryPolicy::default(),
            timeout_ms: 60_000,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::InvalidConfig(m.to_string()));
        if self.api_keys.is_empty() {
            return bad("at least one API key is required");
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be at least 1");
        }
        if self.timeout_ms == 0 {
            return bad("timeout must be positive");
        }
        if self.retry.max_attempts == 0 {
            return bad("retry.max_attempts must be at least 1");
        }
        Ok(())
    }
}

/// What the provider is asked to do. `seat` and `ticket` never go on the wire;
/// test doubles may use them to route scripted responses.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub prompt: String,
    pub seat: Option<Seat>,
    pub ticket: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("HTTP status {code}")]
    Status { code: u16, body: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("response script exhausted")]
    Exhausted,
    #[error("malformed provider response: {0}")]
    Malformed(String),
}

impl ProviderError {
    pub fn retryable(&self) -> bool {
        match self {
            ProviderError::Status { code, .. } => *code == 429 || *code >= 500,
            ProviderError::Transport(_) | ProviderError::Timeout => true,
            ProviderError::Exhausted | ProviderError::Malformed(_) => false,
        }
    }
}

/// A chat-completion backend.
pub trait ChatProvider: Send + Sync {
    fn send(&self, request: &ChatRequest, key: &ApiKey, timeout: Duration) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusClass {
    RateLimited,
    ClientError,
    ServerError,
    Other,
}

impl StatusClass {
    pub fn of(code: u16) -> StatusClass {
        match code {
            429 => StatusClass::RateLimited,
            400..=499 => StatusClass::ClientError,
            500..=599 => StatusClass::ServerError,
            _ => StatusClass::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("provider returned status {code} ({class:?}) after {attempts} attempt(s)")]
    Status { class: StatusClass, code: u16, attempts: u32 },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    #[error("invalid gateway config: {0}")]
    InvalidConfig(String),
    #[error("prompt is empty")]
    EmptyPrompt,
}

/// Audit record of one completed model call.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatExchange {
    pub model: String,
    pub temperature: f64,
    pub message: String,
    pub requested_at: String,
    pub raw: String,
    pub latency_ms: u64,
    pub attempts: u32,
    pub key_index: usize,
}

impl ChatExchange {
    pub fn record(&self) -> ExchangeRecord {
        ExchangeRecord {
            raw: self.raw.clone(),
            attempts: self.attempts,
            key_index: self.key_index,
            latency_ms: self.latency_ms,
            requested_at: Some(self.requested_at.clone()),
        }
    }
}

/// Events that may move the key cursor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationEvent {
    /// A request issued within simulation `ticket`.
    Request { ticket: u64 },
}

#[derive(Debug)]
struct KeyRotation {
    policy: RotationPolicy,
    keys: usize,
    requests: AtomicU64,
    manual: AtomicUsize,
}

impl KeyRotation {
    fn index(&self, event: RotationEvent) -> usize {
        let n = self.keys as u64;
        match (self.policy, event) {
            (RotationPolicy::PerRequest, RotationEvent::Request { .. }) => {
                (self.requests.fetch_add(1, Ordering::SeqCst) % n) as usize
            }
            (RotationPolicy::PerSimulation, RotationEvent::Request { ticket }) => (ticket % n) as usize,
            (RotationPolicy::Manual, _) => self.manual.load(Ordering::SeqCst) % self.keys,
        }
    }
}

/// Counting semaphore bounding outstanding provider calls.
#[derive(Debug)]
struct Admission {
    limit: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Admission);

impl Admission {
    fn acquire(&self) -> Permit<'_> {
        let mut used = self.used.lock().expect("admission lock");
        while *used >= self.limit {
            used = self.freed.wait(used).expect("admission lock");
        }
        *used += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut used = self.0.used.lock().expect("admission lock");
        *used -= 1;
        self.0.freed.notify_one();
    }
}

/// Shared, thread-safe front door to the model provider.
pub struct Gateway {
    config: GatewayConfig,
    provider: Arc<dyn ChatProvider>,
    admission: Admission,
    rotation: KeyRotation,
    simulations: AtomicU64,
    clock: Clock,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("endpoint", &self.config.endpoint_url)
            .field("keys", &self.config.api_keys.len())
            .field("rotation", &self.config.rotation)
            .field("max_in_flight", &self.config.max_in_flight)
            .finish()
    }
}

impl Gateway {
    pub fn new(config: GatewayConfig, provider: Arc<dyn ChatProvider>) -> Result<Self, GatewayError> {
        config.validate()?;
        Ok(Gateway {
            admission: Admission {
                limit: config.max_in_flight,
                used: Mutex::new(0),
                freed: Condvar::new(),
            },
            rotation: KeyRotation {
                policy: config.rotation,
                keys: config.api_keys.len(),
                requests: AtomicU64::new(0),
                manual: AtomicUsize::new(0),
            },
            simulations: AtomicU64::new(0),
            clock: Clock::default(),
            config,
            provider,
        })
    }

    /// Gateway over the real HTTP provider.
    pub fn http(config: GatewayConfig) -> Result<Self, GatewayError> {
        let provider = HttpProvider::new(&config.endpoint_url).map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
        Gateway::new(config, Arc::new(provider))
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn max_in_flight(&self) -> usize {
        self.config.max_in_flight
    }

    /// Opens a new simulation and returns its ticket (0, 1, 2, ...).
    pub fn begin_simulation(&self) -> u64 {
        self.simulations.fetch_add(1, Ordering::SeqCst)
    }

    /// Key index to use for `event`, advancing per the rotation policy.
    pub fn rotate_key(&self, event: RotationEvent) -> usize {
        self.rotation.index(event)
    }

    /// Operator command for the manual policy.
    pub fn set_manual_key(&self, index: usize) {
        self.rotation.manual.store(index, Ordering::SeqCst);
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatExchange, GatewayError> {
        if request.prompt.is_empty() {
            return Err(GatewayError::EmptyPrompt);
        }
        let key_index = self.rotate_key(RotationEvent::Request { ticket: request.ticket });
        let key = &self.config.api_keys[key_index];
        let timeout = Duration::from_millis(self.config.timeout_ms);
        let requested_at = self.clock.stamp();
        let started = Instant::now();
        let mut attempts = 0;
        loop {
            attempts += 1;
            let result = {
                let _permit = self.admission.acquire();
                self.provider.send(request, key, timeout)
            };
            let err = match result {
                Ok(raw) => {
                    return Ok(ChatExchange {
                        model: request.model.clone(),
                        temperature: request.temperature,
                        message: request.prompt.clone(),
                        requested_at,
                        raw: redact(raw, key),
                        latency_ms: started.elapsed().as_millis() as u64,
                        attempts,
                        key_index,
                    })
                }
                Err(e) => e,
            };
            if !err.retryable() || attempts >= self.config.retry.max_attempts {
                return Err(match err {
                    ProviderError::Status { code, .. } => GatewayError::Status {
                        class: StatusClass::of(code),
                        code,
                        attempts,
                    },
                    ProviderError::Timeout => GatewayError::Timeout { attempts },
                    other => GatewayError::Transport {
                        message: redact(other.to_string(), key),
                        attempts,
                    },
                });
            }
            std::thread::sleep(self.config.retry.delay(attempts, &mut rand::rng()));
        }
    }
}

/// Strips the key from text that came back from the provider. Very short
/// test keys would mangle ordinary words, so they are left alone.
fn redact(text: String, key: &ApiKey) -> String {
    if key.0.len() < 8 || !text.contains(&key.0) {
        text
    } else {
        text.replace(&key.0, "***")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echoed_keys_are_redacted() {
        let script = ResponseScript::cycle(vec![ScriptEntry::text("R sk-test-0")]);
        let (g, _) = gw(quick(1, RotationPolicy::PerRequest), script);
        assert_eq!(g.complete(&req("hi", 0)).unwrap().raw, "R ***");
    }

    fn keys(n: usize) -> Vec<ApiKey> {
        (0..n).map(|i| ApiKey::new(format!("sk-test-{i}"))).collect()
    }

    fn quick(n_keys: usize, rotation: RotationPolicy) -> GatewayConfig {
        let mut c = GatewayConfig::new("http://stub.invalid", keys(n_keys));
        c.rotation = rotation;
        c.retry = RetryPolicy {
            max_attempts: 3,
            base_ms: 1,
            cap_ms: 2,
        };
        c
    }

    fn req(prompt: &str, ticket: u64) -> ChatRequest {
        ChatRequest {
            model: "stub-model".into(),
            temperature: 1.0,
            prompt: prompt.into(),
            seat: None,
            ticket,
        }
    }

    fn gw(cfg: GatewayConfig, script: ResponseScript) -> (Gateway, Arc<ScriptedProvider>) {
        let p = Arc::new(ScriptedProvider::new(script));
        (Gateway::new(cfg, p.clone()).unwrap(), p)
    }

    #[test]
    fn happy_path() {
        let (g, _) = gw(quick(1, RotationPolicy::PerRequest), ResponseScript::cycle(vec![ScriptEntry::text("R")]));
        let x = g.complete(&req("hi", 0)).unwrap();
        assert_eq!((x.raw.as_str(), x.attempts), ("R", 1));
    }

    #[test]
    fn retries_through_rate_limits() {
        let script = ResponseScript::sequence(vec![ScriptEntry::status(429), ScriptEntry::status(429), ScriptEntry::text("P")]);
        let (g, p) = gw(quick(1, RotationPolicy::PerRequest), script);
        let x = g.complete(&req("hi", 0)).unwrap();
        assert_eq!((x.raw.as_str(), x.attempts), ("P", 3));
        assert_eq!(p.calls(), 3);
    }

    #[test]
    fn exhausts_after_max_attempts() {
        let (g, p) = gw(quick(1, RotationPolicy::PerRequest), ResponseScript::cycle(vec![ScriptEntry::status(500)]));
        let e = g.complete(&req("hi", 0)).unwrap_err();
        assert_eq!(e, GatewayError::Status { class: StatusClass::ServerError, code: 500, attempts: 3 });
        assert_eq!(p.calls(), 3);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (g, p) = gw(quick(1, RotationPolicy::PerRequest), ResponseScript::cycle(vec![ScriptEntry::status(401)]));
        assert!(matches!(g.complete(&req("hi", 0)), Err(GatewayError::Status { attempts: 1, .. })));
        assert_eq!(p.calls(), 1);
    }

    #[test]
    fn timeouts_surface_as_timeout() {
        let (g, _) = gw(quick(1, RotationPolicy::PerRequest), ResponseScript::cycle(vec![ScriptEntry::Timeout]));
        assert_eq!(g.complete(&req("hi", 0)).unwrap_err(), GatewayError::Timeout { attempts: 3 });
    }

    #[test]
    fn rotation_per_request_round_robin() {
        let (g, _) = gw(quick(2, RotationPolicy::PerRequest), ResponseScript::cycle(vec![ScriptEntry::text("R")]));
        let idx: Vec<_> = (0..4).map(|_| g.complete(&req("x", 0)).unwrap().key_index).collect();
        assert_eq!(idx, [0, 1, 0, 1]);
    }

    #[test]
    fn rotation_single_key_is_constant() {
        for policy in [RotationPolicy::PerRequest, RotationPolicy::PerSimulation, RotationPolicy::Manual] {
            let (g, _) = gw(quick(1, policy), ResponseScript::cycle(vec![ScriptEntry::text("R")]));
            g.set_manual_key(3);
            for t in 0..5 {
                assert_eq!(g.rotate_key(RotationEvent::Request { ticket: t }), 0);
            }
        }
    }

    #[test]
    fn rotation_per_simulation_boundaries() {
        let (g, _) = gw(quick(3, RotationPolicy::PerSimulation), ResponseScript::cycle(vec![ScriptEntry::text("R")]));
        let mut idx = Vec::new();
        for _ in 0..2 {
            let ticket = g.begin_simulation();
            for _ in 0..2 {
                idx.push(g.complete(&req("x", ticket)).unwrap().key_index);
            }
        }
        assert_eq!(idx, [0, 0, 1, 1]);
    }

    #[test]
    fn rotation_manual() {
        let (g, _) = gw(quick(3, RotationPolicy::Manual), ResponseScript::cycle(vec![ScriptEntry::text("R")]));
        assert_eq!(g.complete(&req("x", 5)).unwrap().key_index, 0);
        g.set_manual_key(2);
        assert_eq!(g.complete(&req("x", 5)).unwrap().key_index, 2);
        assert_eq!(g.complete(&req("x", 6)).unwrap().key_index, 2);
    }

    #[test]
    fn admission_bounds_concurrency() {
        let mut cfg = quick(1, RotationPolicy::PerRequest);
        cfg.max_in_flight = 3;
        let script = ResponseScript::cycle(vec![ScriptEntry::Delayed { text: "R".into(), delay_ms: 3 }]);
        let (g, p) = gw(cfg, script);
        std::thread::scope(|s| {
            for _ in 0..12 {
                s.spawn(|| {
                    for _ in 0..5 {
                        g.complete(&req("x", 0)).unwrap();
                    }
                });
            }
        });
        assert_eq!(p.calls(), 60);
        assert!(p.peak_in_flight() <= 3, "peak {}", p.peak_in_flight());
        assert!(p.peak_in_flight() >= 2, "load never overlapped");
    }

    #[test]
    fn raw_text_is_verbatim() {
        let odd = "  'Rock'.\n\tmaybe ";
        let (g, _) = gw(quick(1, RotationPolicy::PerRequest), ResponseScript::cycle(vec![ScriptEntry::text(odd)]));
        assert_eq!(g.complete(&req("x", 0)).unwrap().raw, odd);
    }

    #[test]
    fn config_validation() {
        let mut c = quick(0, RotationPolicy::PerRequest);
        assert!(c.validate().is_err());
        c.api_keys = keys(1);
        c.max_in_flight = 0;
        assert!(c.validate().is_err());
        c.max_in_flight = 1;
        c.timeout_ms = 0;
        assert!(c.validate().is_err());
        let (g, _) = gw(quick(1, RotationPolicy::PerRequest), ResponseScript::cycle(vec![ScriptEntry::text("R")]));
        assert_eq!(g.complete(&req("", 0)).unwrap_err(), GatewayError::EmptyPrompt);
    }

    #[test]
    fn keys_do_not_leak_through_debug() {
        let (g, _) = gw(quick(2, RotationPolicy::PerRequest), ResponseScript::cycle(vec![ScriptEntry::text("R")]));
        let dump = format!("{g:?} {:?}", g.config());
        assert!(!dump.contains("sk-test"), "{dump}");
    }

    #[test]
    fn backoff_is_capped_exponential() {
        let p = RetryPolicy { max_attempts: 10, base_ms: 100, cap_ms: 1000 };
        let ceilings: Vec<u64> = (1..=6).map(|a| p.ceiling(a).as_millis() as u64).collect();
        assert_eq!(ceilings, [100, 200, 400, 800, 1000, 1000]);
        let mut rng = rand::rng();
        for a in 1..=6 {
            let d = p.delay(a, &mut rng);
            assert!(d <= p.ceiling(a) && d >= p.ceiling(a) / 2);
        }
    }
}
