//! Blocking client for the de-facto chat-completion JSON protocol.
//!
//! Request body:
//!
//! ```text
//! {
//!   "model": "<model name>",
//!   "messages": [
//!     {"role": "system",    "content": "..."},   // omitted when empty
//!     {"role": "user",      "content": "..."},   // one-shot demo, optional
//!     {"role": "assistant", "content": "..."},   // one-shot demo, optional
//!     {"role": "user",      "content": "..."}
//!   ],
//!   "temperature": 0.0,
//!   "max_tokens": 512
//! }
//! ```
//!
//! The reply's `choices[0].message.content` is returned. HTTP 429 and 5xx
//! responses, as well as connection failures, are retried with exponential
//! backoff. Other non-2xx statuses fail immediately.

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{GatewayError, GenerationRequest, Generator, InflightLimiter, RetryPolicy};

fn default_timeout() -> f64 {
    60.0
}

fn default_in_flight() -> usize {
    4
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientConfig {
    /// Full URL of the completion endpoint.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token. `None` sends no
    /// `Authorization` header.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

impl fmt::Debug for ClientConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClientConfig")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("api_key_env", &self.api_key_env)
            .field("timeout_secs", &self.timeout_secs)
            .field("retry", &self.retry)
            .field("max_in_flight", &self.max_in_flight)
            .finish()
    }
}

impl ClientConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: None,
            timeout_secs: default_timeout(),
            retry: RetryPolicy::default(),
            max_in_flight: default_in_flight(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.endpoint.trim().is_empty() {
            return Err(GatewayError::Config("endpoint is empty".into()));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(GatewayError::Config("timeout must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(GatewayError::Config("max_in_flight must be >= 1".into()));
        }
        Ok(())
    }

    pub(crate) fn resolve_key(&self) -> Result<Option<String>, GatewayError> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| GatewayError::MissingAuth(var.clone())),
        }
    }

    pub(crate) fn agent(&self) -> ureq::Agent {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(self.timeout_secs)))
            .http_status_as_error(false)
            .build();
        ureq::Agent::new_with_config(config)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub content: String,
    /// Retries spent before the successful attempt.
    pub retries: u32,
}

pub(crate) fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(6)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn excerpt(body: &str) -> String {
    body.chars().take(200).collect()
}

pub struct ChatClient {
    config: ClientConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    limiter: InflightLimiter,
}

impl fmt::Debug for ChatClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChatClient")
            .field("config", &self.config)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

/// Outcome of one HTTP attempt.
pub(crate) enum Attempt<T> {
    Done(Result<T, GatewayError>),
    Retryable(String),
}

/// POSTs `body` under the retry policy; `on_success` decodes a 2xx body.
pub(crate) fn post_with_retries<T>(
    agent: &ureq::Agent,
    config: &ClientConfig,
    api_key: Option<&str>,
    limiter: &InflightLimiter,
    body: &Value,
    on_success: impl Fn(&str) -> Result<T, GatewayError>,
) -> Result<(T, u32), GatewayError> {
    let payload = body.to_string();
    let request_digest = digest(payload.as_bytes());
    let policy = config.retry;
    let mut retry = 0;
    loop {
        let attempt = {
            let _slot = limiter.acquire();
            let mut req = agent.post(&config.endpoint).header("Content-Type", "application/json");
            if let Some(key) = api_key {
                req = req.header("Authorization", format!("Bearer {key}"));
            }
            match req.send(payload.as_str()) {
                Err(e) => Attempt::Retryable(format!("request failed: {e}")),
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.body_mut().read_to_string().unwrap_or_default();
                    log::debug!(
                        "request {request_digest} -> HTTP {status}, response {}",
                        digest(text.as_bytes())
                    );
                    if (200..300).contains(&status) {
                        Attempt::Done(on_success(&text))
                    } else if status == 429 || status >= 500 {
                        Attempt::Retryable(format!("HTTP {status}: {}", excerpt(&text)))
                    } else {
                        Attempt::Done(Err(GatewayError::Status {
                            status,
                            excerpt: excerpt(&text),
                        }))
                    }
                }
            }
        };
        match attempt {
            Attempt::Done(result) => return result.map(|value| (value, retry)),
            Attempt::Retryable(detail) if retry < policy.max_retries => {
                log::warn!(
                    "request {request_digest}: retry {} of {} after {detail}",
                    retry + 1,
                    policy.max_retries
                );
                std::thread::sleep(policy.delay(retry));
                retry += 1;
            }
            Attempt::Retryable(detail) => {
                return Err(GatewayError::Transport {
                    attempts: retry + 1,
                    detail,
                })
            }
        }
    }
}

impl ChatClient {
    pub fn new(config: ClientConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let api_key = config.resolve_key()?;
        let agent = config.agent();
        let limiter = InflightLimiter::new(config.max_in_flight);
        Ok(Self {
            config,
            api_key,
            agent,
            limiter,
        })
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    fn request_body(&self, request: &GenerationRequest) -> Value {
        let mut messages = Vec::new();
        if !request.system.is_empty() {
            messages.push(json!({"role": "system", "content": request.system}));
        }
        if let Some((user, assistant)) = &request.in_context {
            messages.push(json!({"role": "user", "content": user}));
            messages.push(json!({"role": "assistant", "content": assistant}));
        }
        messages.push(json!({"role": "user", "content": request.user}));
        json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": request.decode.temperature,
            "max_tokens": request.decode.max_tokens,
        })
    }

    pub fn complete(&self, request: &GenerationRequest) -> Result<ChatResponse, GatewayError> {
        let body = self.request_body(request);
        let (content, retries) = post_with_retries(
            &self.agent,
            &self.config,
            self.api_key.as_deref(),
            &self.limiter,
            &body,
            |text| {
                let value: Value = serde_json::from_str(text).map_err(|e| GatewayError::Decode(e.to_string()))?;
                value["choices"][0]["message"]["content"]
                    .as_str()
                    .map(str::to_owned)
                    .ok_or_else(|| GatewayError::Decode("missing choices[0].message.content".into()))
            },
        )?;
        Ok(ChatResponse { content, retries })
    }
}

impl Generator for ChatClient {
    fn generate(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        self.complete(request).map(|r| r.content)
    }

    fn model_id(&self) -> String {
        self.config.model.clone()
    }
}

/// One-off call: builds a client for `config` and issues `request`.
pub fn chat_generate(config: &ClientConfig, request: &GenerationRequest) -> Result<ChatResponse, GatewayError> {
    ChatClient::new(config.clone())?.complete(request)
}
