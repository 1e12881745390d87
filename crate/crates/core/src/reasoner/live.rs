//! Blocking chat-completion client with retries, a concurrency cap and a
//! token-bucket rate limit.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::Deserialize;

use super::{Completion, Reasoner, ReasonerConfig, ReasonerError, ReasonerRequest};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1` (attempts count from 1).
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32
            .checked_shl(attempt.saturating_sub(1))
            .unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Token bucket; `None` rate means unlimited.
#[derive(Debug)]
pub struct RateLimit {
    per_minute: Option<u32>,
    bucket: Mutex<(f64, Instant)>,
}

impl RateLimit {
    pub fn new(per_minute: Option<u32>) -> Self {
        let capacity = per_minute.unwrap_or(0) as f64;
        RateLimit {
            per_minute: per_minute.filter(|r| *r > 0),
            bucket: Mutex::new((capacity, Instant::now())),
        }
    }

    pub fn acquire(&self) {
        let Some(rate) = self.per_minute else { return };
        let capacity = rate as f64;
        let per_sec = capacity / 60.0;
        loop {
            let wait = {
                let mut guard = self.bucket.lock().unwrap();
                let (tokens, last) = &mut *guard;
                let now = Instant::now();
                *tokens =
                    (*tokens + now.duration_since(*last).as_secs_f64() * per_sec).min(capacity);
                *last = now;
                if *tokens >= 1.0 {
                    *tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - *tokens) / per_sec)
            };
            std::thread::sleep(wait);
        }
    }
}

struct Slots {
    max: usize,
    in_use: Mutex<usize>,
    freed: Condvar,
}

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut n = self.in_use.lock().unwrap();
        while *n >= self.max {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_use.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

pub struct LiveClient {
    http: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
    retry: RetryPolicy,
    rate: RateLimit,
    slots: Slots,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    #[serde(default)]
    index: usize,
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

enum Failure {
    Transient(String),
    Fatal(ReasonerError),
}

impl LiveClient {
    pub fn new(
        base_url: &str,
        api_key: String,
        timeout: Duration,
        retry: RetryPolicy,
        rate: RateLimit,
        max_concurrent: usize,
    ) -> Result<Self, ReasonerError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ReasonerError::InvalidRequest(format!("http client: {e}")))?;
        Ok(LiveClient {
            http,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            retry,
            rate,
            slots: Slots {
                max: max_concurrent.max(1),
                in_use: Mutex::new(0),
                freed: Condvar::new(),
            },
        })
    }

    pub fn from_config(cfg: &ReasonerConfig) -> Result<Self, ReasonerError> {
        LiveClient::new(
            &cfg.base_url,
            cfg.api_key()?,
            Duration::from_secs(cfg.timeout_secs),
            RetryPolicy {
                max_attempts: cfg.retry_max,
                ..RetryPolicy::default()
            },
            RateLimit::new(cfg.requests_per_minute),
            cfg.max_concurrent_requests,
        )
    }

    fn attempt(&self, req: &ReasonerRequest, n: u32) -> Result<Vec<String>, Failure> {
        let body = serde_json::json!({
            "model": req.model,
            "messages": req.messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "n": n,
        });
        self.rate.acquire();
        let _slot = self.slots.acquire();
        let resp = self
            .http
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() || e.is_connect() || e.is_request() {
                    Failure::Transient(e.to_string())
                } else {
                    Failure::Fatal(ReasonerError::Malformed(e.to_string()))
                }
            })?;
        let status = resp.status().as_u16();
        let text = resp
            .text()
            .map_err(|e| Failure::Transient(format!("reading body: {e}")))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(Failure::Fatal(ReasonerError::Auth { status, body: text })),
            408 | 409 | 429 | 500..=599 => {
                return Err(Failure::Transient(format!("status {status}: {text}")))
            }
            _ => return Err(Failure::Fatal(ReasonerError::Http { status, body: text })),
        }
        let mut parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| Failure::Fatal(ReasonerError::Malformed(format!("{e}: {text}"))))?;
        parsed.choices.sort_by_key(|c| c.index);
        Ok(parsed
            .choices
            .into_iter()
            .map(|c| c.message.content.unwrap_or_default())
            .collect())
    }

    fn with_retries(&self, req: &ReasonerRequest, n: u32) -> Result<Vec<String>, ReasonerError> {
        let mut attempt = 1;
        loop {
            match self.attempt(req, n) {
                Ok(texts) => return Ok(texts),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Transient(msg)) => {
                    if attempt >= self.retry.max_attempts {
                        return Err(ReasonerError::Exhausted {
                            attempts: attempt,
                            last: msg,
                        });
                    }
                    tracing::warn!(attempt, error = %msg, "transient failure, retrying");
                    std::thread::sleep(self.retry.delay(attempt));
                    attempt += 1;
                }
            }
        }
    }
}

impl Reasoner for LiveClient {
    fn complete(&self, req: &ReasonerRequest) -> Result<Completion, ReasonerError> {
        req.validate()?;
        let started = Instant::now();
        let mut texts = Vec::with_capacity(req.n as usize);
        // some providers cap n; keep asking for the remainder
        while texts.len() < req.n as usize {
            let want = req.n - texts.len() as u32;
            let got = self.with_retries(req, want)?;
            if got.is_empty() {
                return Err(ReasonerError::Malformed("response had no choices".into()));
            }
            texts.extend(got.into_iter().take(want as usize));
        }
        Ok(Completion {
            texts,
            latency_ms: started.elapsed().as_millis() as u64,
            cached: false,
        })
    }
}
