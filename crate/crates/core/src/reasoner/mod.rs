//! Uniform interface over everything that answers prompts: a live
//! chat-completion endpoint, a record/replay cache, and the symbolic mock.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

mod cache;
mod config;
mod live;
mod mock;

pub use cache::{CacheMode, CachedReasoner};
pub use config::{ReasonerConfig, ReasonerMode, RecordBackend, API_KEY_ENV};
pub use live::{LiveClient, RateLimit, RetryPolicy};
pub use mock::{Fault, FaultKind, MockProblem, SymbolicMock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasonerRequest {
    pub messages: Vec<Message>,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Number of samples requested.
    pub n: u32,
}

impl ReasonerRequest {
    pub fn single(
        prompt: impl Into<String>,
        model: &str,
        temperature: f64,
        max_tokens: u32,
    ) -> Self {
        ReasonerRequest {
            messages: vec![Message::user(prompt)],
            model: model.to_string(),
            temperature,
            max_tokens,
            n: 1,
        }
    }

    pub fn validate(&self) -> Result<(), ReasonerError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ReasonerError::InvalidRequest(format!(
                "temperature must be a finite value >= 0, got {}",
                self.temperature
            )));
        }
        if self.n == 0 {
            return Err(ReasonerError::InvalidRequest("n must be at least 1".into()));
        }
        if self.messages.is_empty() {
            return Err(ReasonerError::InvalidRequest("no messages".into()));
        }
        Ok(())
    }

    /// Concatenated text of all user messages.
    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .filter(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Field-order-fixed serialization with trailing whitespace stripped
    /// from every line of every message.
    pub fn canonical(&self) -> String {
        let messages: Vec<serde_json::Value> = self
            .messages
            .iter()
            .map(|m| serde_json::json!([m.role, normalize_text(&m.content)]))
            .collect();
        // arrays keep the field order fixed regardless of map ordering
        serde_json::json!([
            ["model", self.model],
            ["temperature", format!("{:.6}", self.temperature)],
            ["max_tokens", self.max_tokens],
            ["n", self.n],
            ["messages", messages],
        ])
        .to_string()
    }
}

fn normalize_text(text: &str) -> String {
    text.lines()
        .map(str::trim_end)
        .collect::<Vec<_>>()
        .join("\n")
        .trim_end()
        .to_string()
}

/// SHA-256 of the canonical request, as 64 lowercase hex digits.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn cache_key(req: &ReasonerRequest) -> CacheKey {
    let digest = Sha256::digest(req.canonical().as_bytes());
    CacheKey(hex::encode(digest))
}

/// Responses to one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub texts: Vec<String>,
    /// Wall-clock latency of the original call; replayed entries report the
    /// recorded value.
    pub latency_ms: u64,
    pub cached: bool,
}

#[derive(Debug, Error)]
pub enum ReasonerError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("authentication failed ({status}): {body}")]
    Auth { status: u16, body: String },
    #[error("request failed with status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("gave up after {attempts} attempt(s): {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("no recorded response for key {key}")]
    ReplayMiss { key: CacheKey },
    #[error("cache key {key} already holds a different request")]
    CacheCollision { key: CacheKey },
    #[error("cache i/o on {path}: {message}")]
    CacheIo { path: String, message: String },
    #[error("missing credentials: set {0}")]
    MissingCredentials(String),
    #[error("symbolic mock cannot read prompt: {0}")]
    MockUnparseablePrompt(String),
}

pub trait Reasoner: Send + Sync {
    /// Returns exactly `req.n` texts.
    fn complete(&self, req: &ReasonerRequest) -> Result<Completion, ReasonerError>;
}

impl<R: Reasoner + ?Sized> Reasoner for &R {
    fn complete(&self, req: &ReasonerRequest) -> Result<Completion, ReasonerError> {
        (**self).complete(req)
    }
}

impl<R: Reasoner + ?Sized> Reasoner for Box<R> {
    fn complete(&self, req: &ReasonerRequest) -> Result<Completion, ReasonerError> {
        (**self).complete(req)
    }
}

/// One reasoner call as seen by a pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub stage: String,
    pub request: ReasonerRequest,
    pub responses: Vec<String>,
    pub latency_ms: u64,
    pub cached: bool,
}

/// Append-only log of reasoner calls in issue order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn new() -> Self {
        Transcript::default()
    }

    pub fn push(&mut self, entry: TranscriptEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_latency_ms(&self) -> u64 {
        self.entries.iter().map(|e| e.latency_ms).sum()
    }

    /// Calls `reasoner` and records the exchange under `stage`.
    pub fn call(
        &mut self,
        reasoner: &dyn Reasoner,
        stage: impl Into<String>,
        request: ReasonerRequest,
    ) -> Result<Vec<String>, ReasonerError> {
        request.validate()?;
        let completion = reasoner.complete(&request)?;
        if completion.texts.len() != request.n as usize {
            return Err(ReasonerError::Malformed(format!(
                "asked for {} response(s), got {}",
                request.n,
                completion.texts.len()
            )));
        }
        self.entries.push(TranscriptEntry {
            stage: stage.into(),
            request,
            responses: completion.texts.clone(),
            latency_ms: completion.latency_ms,
            cached: completion.cached,
        });
        Ok(completion.texts)
    }
}

/// Wraps a reasoner and counts calls; used to check call-count laws.
pub struct CountingReasoner<R> {
    inner: R,
    calls: AtomicUsize,
    log: Mutex<Vec<ReasonerRequest>>,
}

impl<R: Reasoner> CountingReasoner<R> {
    pub fn new(inner: R) -> Self {
        CountingReasoner {
            inner,
            calls: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<ReasonerRequest> {
        self.log.lock().unwrap().clone()
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
        self.log.lock().unwrap().clear();
    }
}

impl<R: Reasoner> Reasoner for CountingReasoner<R> {
    fn complete(&self, req: &ReasonerRequest) -> Result<Completion, ReasonerError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.log.lock().unwrap().push(req.clone());
        self.inner.complete(req)
    }
}

/// Answers every request with the same scripted texts, cycling through
/// `responses` one per sample.
pub struct ScriptedReasoner {
    responses: Mutex<std::collections::VecDeque<String>>,
}

impl ScriptedReasoner {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedReasoner {
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
        }
    }
}

impl Reasoner for ScriptedReasoner {
    fn complete(&self, req: &ReasonerRequest) -> Result<Completion, ReasonerError> {
        let mut queue = self.responses.lock().unwrap();
        let mut texts = Vec::with_capacity(req.n as usize);
        for _ in 0..req.n {
            texts.push(queue.pop_front().ok_or_else(|| {
                ReasonerError::Malformed("scripted reasoner ran out of responses".into())
            })?);
        }
        Ok(Completion {
            texts,
            latency_ms: 0,
            cached: false,
        })
    }
}

/// The reasoner `cfg` asks for. `mock` is only called for mock mode and
/// for recording with the mock backend.
pub fn build_reasoner(
    cfg: &ReasonerConfig,
    mock: impl FnOnce() -> SymbolicMock,
) -> Result<Box<dyn Reasoner>, ReasonerError> {
    cfg.validate()?;
    let cache_dir = || {
        cfg.cache_dir
            .clone()
            .expect("validated: record and replay have a cache_dir")
    };
    Ok(match cfg.mode {
        ReasonerMode::Mock => Box::new(mock()),
        ReasonerMode::Live => Box::new(LiveClient::from_config(cfg)?),
        ReasonerMode::Replay => Box::new(CachedReasoner::replay(cache_dir())),
        ReasonerMode::Record => {
            let inner: Box<dyn Reasoner> = match cfg.record_backend {
                RecordBackend::Live => Box::new(LiveClient::from_config(cfg)?),
                RecordBackend::Mock => Box::new(mock()),
            };
            Box::new(CachedReasoner::record(cache_dir(), inner))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(text: &str, temperature: f64) -> ReasonerRequest {
        ReasonerRequest::single(text, "gpt-4o", temperature, 512)
    }

    #[test]
    fn key_is_deterministic_and_hex() {
        let a = cache_key(&req("hello", 0.0));
        let b = cache_key(&req("hello", 0.0));
        assert_eq!(a, b);
        assert_eq!(a.as_str().len(), 64);
        assert!(a
            .as_str()
            .chars()
            .all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
    }

    #[test]
    fn key_depends_on_temperature_and_n() {
        assert_ne!(cache_key(&req("hello", 0.0)), cache_key(&req("hello", 0.7)));
        let mut five = req("hello", 0.7);
        five.n = 5;
        assert_ne!(cache_key(&five), cache_key(&req("hello", 0.7)));
    }

    #[test]
    fn key_ignores_trailing_whitespace() {
        let base = cache_key(&req("line one\nline two", 0.0));
        for variant in [
            "line one\nline two\n",
            "line one  \nline two",
            "line one\nline two \n\n",
        ] {
            assert_eq!(cache_key(&req(variant, 0.0)), base, "{variant:?}");
        }
        assert_ne!(cache_key(&req(" line one\nline two", 0.0)), base);
    }

    #[test]
    fn request_validation() {
        assert!(req("x", -0.1).validate().is_err());
        assert!(req("x", f64::NAN).validate().is_err());
        let mut r = req("x", 0.0);
        r.n = 0;
        assert!(r.validate().is_err());
    }

    #[test]
    fn transcript_records_calls() {
        let r = ScriptedReasoner::new(["a", "b", "c"]);
        let mut t = Transcript::new();
        assert_eq!(t.call(&r, "one", req("p", 0.0)).unwrap(), vec!["a"]);
        let mut five = req("p", 0.7);
        five.n = 2;
        assert_eq!(t.call(&r, "two", five).unwrap(), vec!["b", "c"]);
        assert_eq!(t.len(), 2);
        assert_eq!(t.entries()[1].stage, "two");
        assert!(t.call(&r, "three", req("p", 0.0)).is_err());
        assert_eq!(t.len(), 2);
    }
}
