//! Chat-completion client.
//!
//! Speaks the common chat-completions JSON protocol over HTTP(S): a single
//! user message carrying [`RenderedPrompt::wire_text`], answered by
//! `choices[0].message.content`. Endpoints starting with `stub://` are served
//! in-process and never touch the network.

use std::io::Write as _;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::prompt::RenderedPrompt;

pub const MAX_RETRIES: u32 = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub endpoint_url: String,
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub timeout_secs: f64,
    pub retries: u32,
    /// First backoff delay; doubles on each retry.
    pub backoff_ms: u64,
    /// Client-side request budget per minute, shared by all calls to the endpoint.
    pub requests_per_minute: Option<u32>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_id: "gpt-4-turbo".into(),
            temperature: 0.0,
            max_tokens: 2048,
            api_key_env: Some("OPENAI_API_KEY".into()),
            timeout_secs: 120.0,
            retries: 3,
            backoff_ms: 1000,
            requests_per_minute: None,
        }
    }
}

impl LlmConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.endpoint_url.trim().is_empty() {
            return Err(LlmError::Config("endpoint_url is empty".into()));
        }
        if self.retries > MAX_RETRIES {
            return Err(LlmError::Config(format!(
                "retries must be at most {MAX_RETRIES}, got {}",
                self.retries
            )));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LlmError::Config("temperature must be non-negative".into()));
        }
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return Err(LlmError::Config("timeout must be positive".into()));
        }
        Ok(())
    }

    pub fn is_stub(&self) -> bool {
        self.endpoint_url.starts_with("stub://")
    }

    /// True for in-process stubs and loopback hosts.
    pub fn is_offline_safe(&self) -> bool {
        if self.is_stub() {
            return true;
        }
        let rest = self
            .endpoint_url
            .split_once("://")
            .map(|(_, r)| r)
            .unwrap_or(&self.endpoint_url);
        let host = rest.split(['/', '?']).next().unwrap_or("");
        let host = host.rsplit_once('@').map(|(_, h)| h).unwrap_or(host);
        let host = if let Some(bracketed) = host.strip_prefix('[') {
            bracketed.split(']').next().unwrap_or("")
        } else {
            host.split(':').next().unwrap_or("")
        };
        host == "localhost"
            || host
                .parse::<std::net::IpAddr>()
                .is_ok_and(|ip| ip.is_loopback())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmReply {
    pub text: String,
    pub model_id: String,
    pub latency_secs: f64,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid LLM configuration: {0}")]
    Config(String),
    #[error("environment variable `{0}` with the API key is not set")]
    MissingKey(String),
    #[error("endpoint rejected the credentials (HTTP {0})")]
    Auth(u16),
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("network failure after {attempts} attempt(s): {message}")]
    Network { attempts: u32, message: String },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("malformed response envelope: {0}")]
    Envelope(String),
    #[error("unknown stub endpoint `{0}`")]
    UnknownStub(String),
}

impl LlmError {
    pub fn is_fatal(&self) -> bool {
        !matches!(self, LlmError::Network { .. } | LlmError::RateLimited { .. })
    }
}

/// Anything that can answer a rendered prompt.
pub trait Completer: Send + Sync {
    fn complete(&self, prompt: &RenderedPrompt) -> Result<LlmReply, LlmError>;

    fn model_id(&self) -> &str;
}

/// One HTTP attempt, as recorded in the request log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: u32,
    pub status: Option<u16>,
    pub error: Option<String>,
}

/// Token bucket limiting requests per minute.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn per_minute(requests: u32) -> Self {
        let capacity = requests.max(1) as f64;
        TokenBucket {
            capacity,
            per_sec: capacity / 60.0,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Time to wait before a token is available; takes the token when it is zero.
    pub fn try_take(&self) -> Duration {
        let mut state = self.state.lock().expect("token bucket poisoned");
        let now = Instant::now();
        let refill = now.duration_since(state.1).as_secs_f64() * self.per_sec;
        state.0 = (state.0 + refill).min(self.capacity);
        state.1 = now;
        if state.0 >= 1.0 {
            state.0 -= 1.0;
            Duration::ZERO
        } else {
            Duration::from_secs_f64((1.0 - state.0) / self.per_sec)
        }
    }

    pub fn take(&self) {
        loop {
            let wait = self.try_take();
            if wait.is_zero() {
                return;
            }
            std::thread::sleep(wait);
        }
    }
}

/// Blocking chat-completions client for one endpoint/model pair.
pub struct LlmClient {
    config: LlmConfig,
    agent: ureq::Agent,
    bucket: Option<Arc<TokenBucket>>,
    log: Mutex<Vec<AttemptRecord>>,
}

impl LlmClient {
    pub fn new(config: LlmConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build();
        let bucket = config
            .requests_per_minute
            .map(|r| Arc::new(TokenBucket::per_minute(r)));
        Ok(LlmClient {
            config,
            agent,
            bucket,
            log: Mutex::new(Vec::new()),
        })
    }

    /// Shares a rate limiter with other clients of the same endpoint.
    pub fn with_bucket(mut self, bucket: Arc<TokenBucket>) -> Self {
        self.bucket = Some(bucket);
        self
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    /// Every attempt made so far.
    pub fn request_log(&self) -> Vec<AttemptRecord> {
        self.log.lock().expect("request log poisoned").clone()
    }

    /// The JSON body posted for `prompt`.
    pub fn request_body(&self, prompt: &RenderedPrompt) -> Value {
        json!({
            "model": self.config.model_id,
            "messages": [{"role": "user", "content": prompt.wire_text()}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        })
    }

    fn record(&self, attempt: u32, status: Option<u16>, error: Option<String>) {
        self.log
            .lock()
            .expect("request log poisoned")
            .push(AttemptRecord {
                attempt,
                status,
                error,
            });
    }

    fn backoff(&self, attempt: u32, retry_after: Option<Duration>) -> Duration {
        let exp = Duration::from_millis(self.config.backoff_ms.saturating_mul(1 << attempt.min(16)));
        retry_after.map_or(exp, |r| r.max(exp))
    }

    fn complete_stub(&self, prompt: &RenderedPrompt) -> Result<LlmReply, LlmError> {
        let kind = self.config.endpoint_url.trim_start_matches("stub://");
        let text = match kind.trim_end_matches('/') {
            "echo" => prompt.wire_text(),
            other => return Err(LlmError::UnknownStub(other.to_string())),
        };
        self.record(1, Some(200), None);
        Ok(LlmReply {
            text,
            model_id: self.config.model_id.clone(),
            latency_secs: 0.0,
        })
    }

    fn extract_text(body: &Value) -> Result<String, LlmError> {
        let choice = body
            .get("choices")
            .and_then(Value::as_array)
            .and_then(|c| c.first())
            .ok_or_else(|| LlmError::Envelope("no `choices[0]`".into()))?;
        choice
            .pointer("/message/content")
            .or_else(|| choice.get("text"))
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| LlmError::Envelope("no `message.content` in the first choice".into()))
    }
}

impl Completer for LlmClient {
    fn complete(&self, prompt: &RenderedPrompt) -> Result<LlmReply, LlmError> {
        if self.config.is_stub() {
            return self.complete_stub(prompt);
        }
        let key = match &self.config.api_key_env {
            Some(var) if !var.is_empty() => match std::env::var(var) {
                Ok(k) if !k.is_empty() => Some(k),
                _ if self.config.is_offline_safe() => None,
                _ => return Err(LlmError::MissingKey(var.clone())),
            },
            _ => None,
        };
        let body = self.request_body(prompt);
        let attempts = self.config.retries + 1;
        let mut last_error = None;

        for attempt in 1..=attempts {
            if let Some(bucket) = &self.bucket {
                bucket.take();
            }
            let mut request = self
                .agent
                .post(&self.config.endpoint_url)
                .set("Content-Type", "application/json");
            if let Some(k) = &key {
                request = request.set("Authorization", &format!("Bearer {k}"));
            }
            let started = Instant::now();
            let retry_after = match request.send_json(body.clone()) {
                Ok(response) => {
                    let status = response.status();
                    let raw = response.into_string().map_err(|e| {
                        LlmError::Envelope(format!("unreadable body: {e}"))
                    });
                    self.record(attempt, Some(status), raw.as_ref().err().map(|e| e.to_string()));
                    let parsed: Value = serde_json::from_str(&raw?)
                        .map_err(|e| LlmError::Envelope(format!("invalid JSON: {e}")))?;
                    return Ok(LlmReply {
                        text: Self::extract_text(&parsed)?,
                        model_id: parsed
                            .get("model")
                            .and_then(Value::as_str)
                            .unwrap_or(&self.config.model_id)
                            .to_string(),
                        latency_secs: started.elapsed().as_secs_f64(),
                    });
                }
                Err(ureq::Error::Status(status, response)) => {
                    let retry_after = response
                        .header("Retry-After")
                        .and_then(|v| v.trim().parse::<f64>().ok())
                        .map(Duration::from_secs_f64);
                    let text = response.into_string().unwrap_or_default();
                    self.record(attempt, Some(status), Some(text.clone()));
                    match status {
                        401 | 403 => return Err(LlmError::Auth(status)),
                        429 => last_error = Some(LlmError::RateLimited { attempts: attempt }),
                        500..=599 => {
                            last_error = Some(LlmError::Http { status, body: text })
                        }
                        _ => return Err(LlmError::Http { status, body: text }),
                    }
                    retry_after
                }
                Err(ureq::Error::Transport(t)) => {
                    self.record(attempt, None, Some(t.to_string()));
                    last_error = Some(LlmError::Network {
                        attempts: attempt,
                        message: t.to_string(),
                    });
                    None
                }
            };
            if attempt < attempts {
                std::thread::sleep(self.backoff(attempt - 1, retry_after));
            }
        }
        Err(last_error.expect("at least one attempt is always made"))
    }

    fn model_id(&self) -> &str {
        &self.config.model_id
    }
}

/// Replays a fixed list of replies, cycling when exhausted.
pub struct ScriptedCompleter {
    model_id: String,
    replies: Vec<String>,
    next: Mutex<usize>,
}

impl ScriptedCompleter {
    pub fn new(model_id: impl Into<String>, replies: Vec<String>) -> Self {
        assert!(!replies.is_empty(), "scripted completer needs at least one reply");
        ScriptedCompleter {
            model_id: model_id.into(),
            replies,
            next: Mutex::new(0),
        }
    }
}

impl Completer for ScriptedCompleter {
    fn complete(&self, _prompt: &RenderedPrompt) -> Result<LlmReply, LlmError> {
        let mut next = self.next.lock().expect("scripted completer poisoned");
        let text = self.replies[*next % self.replies.len()].clone();
        *next += 1;
        Ok(LlmReply {
            text,
            model_id: self.model_id.clone(),
            latency_secs: 0.0,
        })
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }
}

/// One line of the JSON-lines audit transcript.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub task: String,
    pub model_id: String,
    pub prompt: String,
    pub reply: Option<String>,
    pub error: Option<String>,
    pub latency_secs: f64,
}

pub fn append_transcript(path: &Path, entry: &TranscriptEntry) -> std::io::Result<()> {
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    let line = serde_json::to_string(entry).map_err(std::io::Error::other)?;
    writeln!(file, "{line}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::PromptTask;

    fn prompt(text: &str) -> RenderedPrompt {
        RenderedPrompt {
            task: PromptTask::A,
            text: text.into(),
            attachments: vec![],
        }
    }

    #[test]
    fn config_validation() {
        let mut c = LlmConfig::default();
        assert!(c.validate().is_ok());
        c.retries = 6;
        assert!(c.validate().is_err());
        c.retries = 0;
        c.endpoint_url = " ".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn offline_detection() {
        let with = |url: &str| LlmConfig {
            endpoint_url: url.into(),
            ..LlmConfig::default()
        };
        assert!(with("stub://echo").is_offline_safe());
        assert!(with("http://127.0.0.1:8080/v1/chat/completions").is_offline_safe());
        assert!(with("http://localhost/v1").is_offline_safe());
        assert!(with("http://[::1]:9000/v1").is_offline_safe());
        assert!(!with("https://api.example.com/v1").is_offline_safe());
        assert!(!with("http://127.0.0.1.example.com/v1").is_offline_safe());
    }

    #[test]
    fn echo_stub() {
        let client = LlmClient::new(LlmConfig {
            endpoint_url: "stub://echo".into(),
            ..LlmConfig::default()
        })
        .unwrap();
        let reply = client.complete(&prompt("hello\n  world ")).unwrap();
        assert_eq!(reply.text, "hello\n  world ");
        assert_eq!(client.request_log().len(), 1);
    }

    #[test]
    fn scripted_cycles() {
        let s = ScriptedCompleter::new("m", vec!["a".into(), "b".into()]);
        let texts: Vec<String> = (0..3).map(|_| s.complete(&prompt("")).unwrap().text).collect();
        assert_eq!(texts, ["a", "b", "a"]);
    }

    #[test]
    fn bucket_limits() {
        let bucket = TokenBucket::per_minute(2);
        assert!(bucket.try_take().is_zero());
        assert!(bucket.try_take().is_zero());
        assert!(!bucket.try_take().is_zero());
    }

    #[test]
    fn envelope_parsing() {
        let ok = json!({"choices": [{"message": {"role": "assistant", "content": " x "}}]});
        assert_eq!(LlmClient::extract_text(&ok).unwrap(), " x ");
        assert!(LlmClient::extract_text(&json!({"choices": []})).is_err());
        assert!(LlmClient::extract_text(&json!({"error": "x"})).is_err());
    }
}
