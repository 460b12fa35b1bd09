//! External model interfaces.
//!
//! Everything that talks to a network lives here: the chat-completion
//! [`ChatClient`] and the [`HttpEmbedder`]. The rest of the crate only sees
//! the [`Generator`] and [`Embedder`] traits, so offline runs swap in
//! [`MockGenerator`] and [`HashEmbedder`] without any other change.

mod chat;
mod embed;
mod limiter;
mod mock;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use chat::{chat_generate, ChatClient, ChatResponse, ClientConfig};
pub use embed::{HashEmbedder, HttpEmbedder};
pub use limiter::InflightLimiter;
pub use mock::{dedup_five_grams, mock_generate, MockGenerator, MockMode, MockScript};

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("transport failure after {attempts} attempt(s): {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("endpoint returned HTTP {status}: {excerpt}")]
    Status { status: u16, excerpt: String },
    #[error("cannot decode response: {0}")]
    Decode(String),
    #[error("missing credentials: environment variable {0} is not set")]
    MissingAuth(String),
    #[error("invalid client configuration: {0}")]
    Config(String),
    #[error("mock script: {0}")]
    Mock(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: 512,
        }
    }
}

/// A single generation call: system text, user text, and an optional
/// one-shot `(user, assistant)` demonstration placed before the user turn.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub system: String,
    pub user: String,
    pub in_context: Option<(String, String)>,
    pub decode: DecodeParams,
}

pub trait Generator: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<String, GatewayError>;

    /// Identifier recorded in run manifests.
    fn model_id(&self) -> String;
}

pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError>;

    fn model_id(&self) -> String;
}

/// Retry count and exponential backoff base: attempt `k` (0-based) waits
/// `backoff_base * 2^k` before retrying.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub backoff_base_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            backoff_base_ms: 500,
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_retries: 0,
            backoff_base_ms: 0,
        }
    }

    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u64.checked_shl(retry.min(16)).unwrap_or(u64::MAX);
        Duration::from_millis(self.backoff_base_ms.saturating_mul(factor))
    }
}

/// Runs `call` until it succeeds or `policy.max_retries` retries are spent.
/// Returns the value and the number of retries used, or the last error.
pub fn with_retries<T, E: std::fmt::Display>(
    policy: RetryPolicy,
    mut call: impl FnMut() -> Result<T, E>,
) -> Result<(T, u32), E> {
    let mut retry = 0;
    loop {
        match call() {
            Ok(v) => return Ok((v, retry)),
            Err(e) if retry < policy.max_retries => {
                log::warn!("attempt {} failed ({e}); retrying", retry + 1);
                std::thread::sleep(policy.delay(retry));
                retry += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy {
            max_retries: 3,
            backoff_base_ms: 10,
        };
        assert_eq!(p.delay(0), Duration::from_millis(10));
        assert_eq!(p.delay(2), Duration::from_millis(40));
    }

    #[test]
    fn retries_until_success() {
        let mut calls = 0;
        let (v, retries) = with_retries(
            RetryPolicy {
                max_retries: 3,
                backoff_base_ms: 0,
            },
            || {
                calls += 1;
                if calls < 3 {
                    Err("boom")
                } else {
                    Ok(calls)
                }
            },
        )
        .unwrap();
        assert_eq!((v, retries), (3, 2));
    }

    #[test]
    fn gives_up_after_budget() {
        let mut calls = 0;
        let res: Result<((), u32), &str> = with_retries(
            RetryPolicy {
                max_retries: 2,
                backoff_base_ms: 0,
            },
            || {
                calls += 1;
                Err("boom")
            },
        );
        assert!(res.is_err());
        assert_eq!(calls, 3);
    }
}
