//! Boundary to external language-model endpoints, plus a deterministic
//! scripted stub so everything else tests offline.
//!
//! No other module performs network activity: extraction, LLM-backed
//! policies, and the judge all go through [`ChatGateway`].

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("authentication failure: {0}")]
    AuthFailure(String),
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("no scripted response for prompt hash {0}")]
    StubMiss(String),
    #[error("endpoint profile incomplete: {0}")]
    BadProfile(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed endpoint response: {0}")]
    MalformedResponse(String),
}

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
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
}

/// One chat-completion request. Defaults follow the evaluation protocol:
/// temperature 0, max 2048 tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayRequest {
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Named profile override; `None` uses the gateway's default.
    pub endpoint_profile: Option<String>,
}

impl GatewayRequest {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            messages: vec![Message::user(content)],
            temperature: 0.0,
            max_tokens: 2048,
            endpoint_profile: None,
        }
    }

    /// Canonical rendering used for stub keying and golden files.
    pub fn rendered_prompt(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            let role = match m.role {
                Role::System => "system",
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            out.push_str(role);
            out.push_str(": ");
            out.push_str(&m.content);
            out.push('\n');
        }
        out
    }

    pub fn prompt_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.rendered_prompt().as_bytes());
        format!("{:x}", hasher.finalize())
    }
}

#[derive(Debug, Clone)]
pub struct GatewayResponse {
    pub text: String,
    pub token_log_probs: Option<Vec<f64>>,
    pub latency: Duration,
    pub attempt_count: u32,
}

/// Transport contract for chat completion. Implementations must be safe to
/// call from multiple threads; the caller owns the concurrency bound.
pub trait ChatGateway: Send + Sync {
    fn chat_complete(&self, request: &GatewayRequest) -> Result<GatewayResponse, GatewayError>;
}

/// Offline gateway returning scripted responses keyed by the hash of the
/// rendered prompt. Unscripted prompts are a test-authoring error.
#[derive(Debug, Clone, Default)]
pub struct StubGateway {
    scripts: HashMap<String, String>,
}

impl StubGateway {
    pub fn new() -> Self {
        Self::default()
    }

    /// Scripts the response for a single-user-message prompt.
    pub fn script_user_prompt(&mut self, prompt: &str, response: impl Into<String>) {
        let request = GatewayRequest::user(prompt);
        self.scripts.insert(request.prompt_hash(), response.into());
    }

    /// Scripts the response for an arbitrary request.
    pub fn script_request(&mut self, request: &GatewayRequest, response: impl Into<String>) {
        self.scripts.insert(request.prompt_hash(), response.into());
    }

    pub fn len(&self) -> usize {
        self.scripts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scripts.is_empty()
    }
}

impl ChatGateway for StubGateway {
    fn chat_complete(&self, request: &GatewayRequest) -> Result<GatewayResponse, GatewayError> {
        let hash = request.prompt_hash();
        match self.scripts.get(&hash) {
            Some(text) => Ok(GatewayResponse {
                text: text.clone(),
                token_log_probs: None,
                latency: Duration::ZERO,
                attempt_count: 1,
            }),
            None => Err(GatewayError::StubMiss(hash)),
        }
    }
}

/// Connection settings for a live endpoint. Credentials come from the
/// environment only; they are never written to manifests.
#[derive(Debug, Clone)]
pub struct EndpointProfile {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    /// Path appended to `base_url`, chat-completion style.
    pub path: String,
    pub max_attempts: u32,
    pub backoff_base: Duration,
    pub request_timeout: Duration,
    pub max_concurrent: usize,
}

impl EndpointProfile {
    /// Reads `GATEWAY_BASE_URL`, `GATEWAY_API_KEY`, `GATEWAY_MODEL`.
    pub fn from_env() -> Result<Self, GatewayError> {
        let base_url = std::env::var("GATEWAY_BASE_URL")
            .map_err(|_| GatewayError::BadProfile("GATEWAY_BASE_URL not set".into()))?;
        let model = std::env::var("GATEWAY_MODEL")
            .map_err(|_| GatewayError::BadProfile("GATEWAY_MODEL not set".into()))?;
        Ok(Self {
            base_url,
            api_key: std::env::var("GATEWAY_API_KEY").ok(),
            model,
            ..Self::local("", "")
        })
    }

    /// Profile for a known address without auth (tests, local servers).
    pub fn local(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            model: model.into(),
            path: "/v1/chat/completions".into(),
            max_attempts: 3,
            backoff_base: Duration::from_millis(500),
            request_timeout: Duration::from_secs(60),
            max_concurrent: 4,
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    #[serde(default)]
    logprobs: Option<WireLogProbs>,
}

#[derive(Deserialize)]
struct WireMessage {
    content: String,
}

#[derive(Deserialize)]
struct WireLogProbs {
    #[serde(default)]
    content: Vec<WireTokenLogProb>,
}

#[derive(Deserialize)]
struct WireTokenLogProb {
    logprob: f64,
}

/// HTTP chat-completion client with exponential-backoff retry on transient
/// failures (timeouts, 429, 5xx). Auth failures do not retry.
pub struct HttpGateway {
    profile: EndpointProfile,
    client: reqwest::blocking::Client,
}

impl HttpGateway {
    pub fn new(profile: EndpointProfile) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(profile.request_timeout)
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(Self { profile, client })
    }

    pub fn from_env() -> Result<Self, GatewayError> {
        Self::new(EndpointProfile::from_env()?)
    }

    fn attempt(&self, request: &GatewayRequest) -> Result<String, AttemptError> {
        let url = format!("{}{}", self.profile.base_url, self.profile.path);
        let body = WireRequest {
            model: &self.profile.model,
            messages: &request.messages,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let mut builder = self.client.post(&url).json(&body);
        if let Some(key) = &self.profile.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| {
            if e.is_timeout() {
                AttemptError::Timeout
            } else {
                AttemptError::Transient(e.to_string())
            }
        })?;
        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(AttemptError::Auth(status.to_string()));
        }
        if status.as_u16() == 429 {
            return Err(AttemptError::RateLimited);
        }
        if status.is_server_error() {
            return Err(AttemptError::Transient(status.to_string()));
        }
        if !status.is_success() {
            return Err(AttemptError::Fatal(status.to_string()));
        }
        response.text().map_err(|e| AttemptError::Transient(e.to_string()))
    }
}

enum AttemptError {
    Timeout,
    RateLimited,
    Transient(String),
    Auth(String),
    Fatal(String),
}

impl ChatGateway for HttpGateway {
    fn chat_complete(&self, request: &GatewayRequest) -> Result<GatewayResponse, GatewayError> {
        let started = std::time::Instant::now();
        let mut attempts = 0;
        let mut last_error = None;
        while attempts < self.profile.max_attempts {
            attempts += 1;
            match self.attempt(request) {
                Ok(body) => {
                    let wire: WireResponse = serde_json::from_str(&body)
                        .map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
                    let choice = wire
                        .choices
                        .into_iter()
                        .next()
                        .ok_or_else(|| GatewayError::MalformedResponse("no choices".into()))?;
                    let token_log_probs = choice
                        .logprobs
                        .map(|lp| lp.content.into_iter().map(|t| t.logprob).collect());
                    return Ok(GatewayResponse {
                        text: choice.message.content,
                        token_log_probs,
                        latency: started.elapsed(),
                        attempt_count: attempts,
                    });
                }
                Err(AttemptError::Auth(detail)) => return Err(GatewayError::AuthFailure(detail)),
                Err(AttemptError::Fatal(detail)) => return Err(GatewayError::Transport(detail)),
                Err(other) => {
                    last_error = Some(other);
                    if attempts < self.profile.max_attempts {
                        std::thread::sleep(self.profile.backoff_base * 2u32.pow(attempts - 1));
                    }
                }
            }
        }
        Err(match last_error {
            Some(AttemptError::Timeout) => GatewayError::Timeout { attempts },
            Some(AttemptError::RateLimited) => GatewayError::RateLimited { attempts },
            Some(AttemptError::Transient(detail)) => GatewayError::Transport(detail),
            _ => GatewayError::Transport("retry budget exhausted".into()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    #[test]
    fn stub_returns_scripted_text() {
        let mut stub = StubGateway::new();
        stub.script_user_prompt("ping", "pong");
        let response = stub.chat_complete(&GatewayRequest::user("ping")).unwrap();
        assert_eq!(response.text, "pong");
        assert_eq!(response.attempt_count, 1);
    }

    #[test]
    fn stub_miss_on_unscripted_prompt() {
        let stub = StubGateway::new();
        let err = stub.chat_complete(&GatewayRequest::user("never scripted")).unwrap_err();
        assert!(matches!(err, GatewayError::StubMiss(_)));
    }

    #[test]
    fn prompt_hash_is_stable() {
        let a = GatewayRequest::user("hello").prompt_hash();
        let b = GatewayRequest::user("hello").prompt_hash();
        assert_eq!(a, b);
        assert_ne!(a, GatewayRequest::user("hello!").prompt_hash());
    }

    /// Minimal canned HTTP server: replies with the scripted status codes
    /// in order, one connection each.
    fn canned_server(responses: Vec<(u16, String)>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = [0u8; 8192];
                let _ = stream.read(&mut buf);
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        format!("http://{addr}")
    }

    fn ok_body(text: &str) -> String {
        serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": text}}]
        })
        .to_string()
    }

    #[test]
    fn retries_through_rate_limit_then_succeeds() {
        let base = canned_server(vec![
            (429, "{}".into()),
            (429, "{}".into()),
            (200, ok_body("recovered")),
        ]);
        let mut profile = EndpointProfile::local(base, "test-model");
        profile.backoff_base = Duration::from_millis(1);
        let gateway = HttpGateway::new(profile).unwrap();
        let response = gateway.chat_complete(&GatewayRequest::user("hi")).unwrap();
        assert_eq!(response.text, "recovered");
        assert_eq!(response.attempt_count, 3);
    }

    #[test]
    fn rate_limit_exhaustion_reports_attempts() {
        let base = canned_server(vec![
            (429, "{}".into()),
            (429, "{}".into()),
            (429, "{}".into()),
        ]);
        let mut profile = EndpointProfile::local(base, "test-model");
        profile.backoff_base = Duration::from_millis(1);
        let gateway = HttpGateway::new(profile).unwrap();
        match gateway.chat_complete(&GatewayRequest::user("hi")).unwrap_err() {
            GatewayError::RateLimited { attempts } => assert_eq!(attempts, 3),
            other => panic!("expected RateLimited, got {other}"),
        }
    }

    #[test]
    fn auth_failure_does_not_retry() {
        let base = canned_server(vec![(401, "{}".into())]);
        let mut profile = EndpointProfile::local(base, "test-model");
        profile.backoff_base = Duration::from_millis(1);
        let gateway = HttpGateway::new(profile).unwrap();
        assert!(matches!(
            gateway.chat_complete(&GatewayRequest::user("hi")).unwrap_err(),
            GatewayError::AuthFailure(_)
        ));
    }
}
