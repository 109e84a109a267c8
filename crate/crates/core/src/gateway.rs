//! Chat-completion backends.
//!
//! Everything above this module speaks [`Gateway`]; behind it sit an
//! OpenAI-compatible HTTP client and two deterministic offline backends.
//! Scripted mode replays a queue (or a request-keyed table) of canned
//! responses; replay mode serves a cassette recorded from an earlier run.
//! Cassette entries are keyed by a stable hash of (model, messages, tool
//! schemas) — sampling knobs are deliberately excluded so tuning temperature
//! or timeouts does not invalidate a recording.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::action::{ToolInvocation, ToolSchema};

// ---------------------------------------------------------------------------
// Request / response types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub tool_schemas: Option<Vec<ToolSchema>>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Per-attempt HTTP timeout; ignored by offline backends.
    pub timeout: Duration,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        Self {
            model: model.into(),
            messages,
            tool_schemas: None,
            temperature: 0.0,
            max_tokens: 2048,
            timeout: Duration::from_secs(60),
        }
    }

    pub fn with_tools(mut self, schemas: Vec<ToolSchema>) -> Self {
        self.tool_schemas = Some(schemas);
        self
    }

    /// Messages must be non-empty and the temperature non-negative.
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::Transport("request carries no messages".to_string()));
        }
        if self.temperature < 0.0 {
            return Err(GatewayError::Transport(format!(
                "temperature must be non-negative, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
    pub total_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: Option<String>,
    pub tool_calls: Option<Vec<ToolInvocation>>,
    #[serde(default)]
    pub usage: TokenUsage,
    #[serde(default)]
    pub latency_secs: f64,
}

impl ChatResponse {
    pub fn from_text(text: impl Into<String>) -> Self {
        Self { text: Some(text.into()), tool_calls: None, usage: TokenUsage::default(), latency_secs: 0.0 }
    }

    pub fn from_tool_calls(calls: Vec<ToolInvocation>) -> Self {
        Self { text: None, tool_calls: Some(calls), usage: TokenUsage::default(), latency_secs: 0.0 }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited after retries")]
    RateLimited,
    #[error("no cassette entry for request hash {0}")]
    CassetteMiss(String),
    #[error("scripted response queue exhausted")]
    ScriptExhausted,
    #[error("cassette io error: {0}")]
    CassetteIo(String),
}

/// A chat-completion backend. Implementations are safe to share across
/// episode workers.
pub trait Gateway: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError>;
}

// ---------------------------------------------------------------------------
// Request hashing
// ---------------------------------------------------------------------------

/// Stable hash of the semantic request content: model, messages, and tool
/// schemas. Temperature, token limits, and timeouts are excluded.
pub fn request_hash(req: &ChatRequest) -> String {
    let canonical = serde_json::to_string(&(&req.model, &req.messages, &req.tool_schemas))
        .expect("request serialization cannot fail");
    let digest = Sha256::digest(canonical.as_bytes());
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

enum ScriptMode {
    Sequence(Mutex<VecDeque<ChatResponse>>),
    Keyed(HashMap<String, ChatResponse>),
}

/// Deterministic backend for tests and oracle-driven evaluation.
pub struct ScriptedGateway {
    mode: ScriptMode,
}

impl ScriptedGateway {
    /// Serve responses in order; each request consumes one.
    pub fn sequence(responses: Vec<ChatResponse>) -> Self {
        Self { mode: ScriptMode::Sequence(Mutex::new(responses.into())) }
    }

    /// Convenience: a sequence of plain-text responses.
    pub fn from_texts<S: Into<String>>(texts: Vec<S>) -> Self {
        Self::sequence(texts.into_iter().map(|t| ChatResponse::from_text(t.into())).collect())
    }

    /// Serve the response registered for the request hash.
    pub fn keyed(responses: HashMap<String, ChatResponse>) -> Self {
        Self { mode: ScriptMode::Keyed(responses) }
    }
}

impl Gateway for ScriptedGateway {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        match &self.mode {
            ScriptMode::Sequence(queue) => queue
                .lock()
                .expect("scripted queue lock")
                .pop_front()
                .ok_or(GatewayError::ScriptExhausted),
            ScriptMode::Keyed(map) => {
                let hash = request_hash(req);
                map.get(&hash).cloned().ok_or(GatewayError::ScriptExhausted)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Cassettes: record and replay
// ---------------------------------------------------------------------------

/// On-disk cassette: request hash → recorded response.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cassette {
    pub entries: BTreeMap<String, ChatResponse>,
}

impl Cassette {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::CassetteIo(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&data)
            .map_err(|e| GatewayError::CassetteIo(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        let data = serde_json::to_string_pretty(self).expect("cassette serialization cannot fail");
        std::fs::write(path, data)
            .map_err(|e| GatewayError::CassetteIo(format!("{}: {e}", path.display())))
    }
}

/// Read-only playback of a recorded cassette.
pub struct ReplayGateway {
    cassette: Cassette,
}

impl ReplayGateway {
    pub fn new(cassette: Cassette) -> Self {
        Self { cassette }
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        Ok(Self::new(Cassette::load(path)?))
    }
}

impl Gateway for ReplayGateway {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let hash = request_hash(req);
        self.cassette.entries.get(&hash).cloned().ok_or(GatewayError::CassetteMiss(hash))
    }
}

/// Wraps another backend and records every successful exchange.
pub struct RecordingGateway<G> {
    inner: G,
    log: Mutex<BTreeMap<String, ChatResponse>>,
}

impl<G: Gateway> RecordingGateway<G> {
    pub fn new(inner: G) -> Self {
        Self { inner, log: Mutex::new(BTreeMap::new()) }
    }

    pub fn cassette(&self) -> Cassette {
        Cassette { entries: self.log.lock().expect("recording log lock").clone() }
    }

    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        self.cassette().save(path)
    }
}

impl<G: Gateway> Gateway for RecordingGateway<G> {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let response = self.inner.complete(req)?;
        self.log
            .lock()
            .expect("recording log lock")
            .insert(request_hash(req), response.clone());
        Ok(response)
    }
}

// ---------------------------------------------------------------------------
// HTTP backend (OpenAI-compatible chat completions)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub backoff_base: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        // 3 retries with 1s/2s/4s backoff.
        Self { max_retries: 3, backoff_base: Duration::from_secs(1) }
    }
}

impl RetryPolicy {
    fn backoff(&self, attempt: u32) -> Duration {
        self.backoff_base * 2u32.saturating_pow(attempt)
    }
}

/// Blocking client for `POST <endpoint>/v1/chat/completions`.
pub struct HttpGateway {
    url: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    client: reqwest::blocking::Client,
}

impl HttpGateway {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        let endpoint = endpoint.into();
        let url = if endpoint.contains("/chat/completions") {
            endpoint
        } else {
            format!("{}/v1/chat/completions", endpoint.trim_end_matches('/'))
        };
        Self {
            url,
            api_key,
            retry: RetryPolicy::default(),
            client: reqwest::blocking::Client::new(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn body(req: &ChatRequest) -> serde_json::Value {
        let mut body = serde_json::json!({
            "model": req.model,
            "messages": req.messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        if let Some(schemas) = &req.tool_schemas {
            body["tools"] = schemas
                .iter()
                .map(|s| serde_json::json!({"type": "function", "function": s}))
                .collect();
            body["tool_choice"] = serde_json::Value::String("auto".to_string());
        }
        body
    }

    fn parse_response(value: serde_json::Value, latency: Duration) -> Result<ChatResponse, GatewayError> {
        let message = &value["choices"][0]["message"];
        if message.is_null() {
            return Err(GatewayError::Transport(format!("response has no choices: {value}")));
        }
        let text = message["content"].as_str().filter(|s| !s.is_empty()).map(str::to_string);
        let tool_calls = message["tool_calls"].as_array().map(|calls| {
            calls
                .iter()
                .map(|call| {
                    let function = &call["function"];
                    let arguments = match &function["arguments"] {
                        // OpenAI encodes arguments as a JSON string.
                        serde_json::Value::String(s) => serde_json::from_str(s)
                            .unwrap_or(serde_json::Value::String(s.clone())),
                        other => other.clone(),
                    };
                    ToolInvocation {
                        name: function["name"].as_str().unwrap_or_default().to_string(),
                        arguments,
                    }
                })
                .collect::<Vec<_>>()
        });
        if text.is_none() && tool_calls.as_ref().is_none_or(|c| c.is_empty()) {
            return Err(GatewayError::Transport(format!(
                "response carries neither text nor tool calls: {value}"
            )));
        }
        let usage = TokenUsage {
            prompt_tokens: value["usage"]["prompt_tokens"].as_u64().unwrap_or(0) as u32,
            completion_tokens: value["usage"]["completion_tokens"].as_u64().unwrap_or(0) as u32,
            total_tokens: value["usage"]["total_tokens"].as_u64().unwrap_or(0) as u32,
        };
        Ok(ChatResponse { text, tool_calls, usage, latency_secs: latency.as_secs_f64() })
    }
}

impl Gateway for HttpGateway {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        req.validate()?;
        let body = Self::body(req);
        let started = Instant::now();
        let mut rate_limited = false;
        for attempt in 0..=self.retry.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.retry.backoff(attempt - 1));
            }
            let mut builder = self.client.post(&self.url).json(&body).timeout(req.timeout);
            if let Some(key) = &self.api_key {
                builder = builder.bearer_auth(key);
            }
            match builder.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let value: serde_json::Value = resp
                            .json()
                            .map_err(|e| GatewayError::Transport(format!("invalid json: {e}")))?;
                        return Self::parse_response(value, started.elapsed());
                    }
                    rate_limited = status.as_u16() == 429;
                    let retryable = rate_limited || status.is_server_error();
                    if !retryable {
                        let text = resp.text().unwrap_or_default();
                        return Err(GatewayError::Transport(format!("HTTP {status}: {text}")));
                    }
                }
                Err(e) if e.is_timeout() => return Err(GatewayError::Timeout),
                Err(e) => {
                    // Connection-level failure: retry.
                    if attempt == self.retry.max_retries {
                        return Err(GatewayError::Transport(e.to_string()));
                    }
                }
            }
        }
        if rate_limited {
            Err(GatewayError::RateLimited)
        } else {
            Err(GatewayError::Transport("retries exhausted".to_string()))
        }
    }
}
