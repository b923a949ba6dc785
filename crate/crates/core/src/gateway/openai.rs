//! Client for OpenAI-compatible `/v1/chat/completions` endpoints.

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use log::{debug, warn};
use serde::Deserialize;

use super::{ChatBackend, ChatRequest, GatewayError, RetryPolicy};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "MUJICA_API_KEY";

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

/// Counting semaphore bounding in-flight requests.
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(n: usize) -> Self {
        Limiter {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Clone)]
pub struct OpenAiClient {
    base_url: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    timeout: Duration,
    max_in_flight: usize,
    http: reqwest::blocking::Client,
    limiter: Arc<Limiter>,
}

impl OpenAiClient {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Result<Self, GatewayError> {
        Self::with_options(base_url, api_key, RetryPolicy::default(), Duration::from_secs(120), 16)
    }

    /// Reads the API key from [`API_KEY_ENV`] when set.
    pub fn from_env(base_url: impl Into<String>) -> Result<Self, GatewayError> {
        Self::new(base_url, std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()))
    }

    pub fn with_options(
        base_url: impl Into<String>,
        api_key: Option<String>,
        retry: RetryPolicy,
        timeout: Duration,
        max_in_flight: usize,
    ) -> Result<Self, GatewayError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(OpenAiClient {
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            api_key,
            retry,
            timeout,
            max_in_flight,
            http,
            limiter: Arc::new(Limiter::new(max_in_flight)),
        })
    }

    pub fn endpoint(&self) -> String {
        format!("{}/v1/chat/completions", self.base_url)
    }

    fn attempt(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        let _permit = self.limiter.acquire();
        let mut builder = self.http.post(self.endpoint()).json(req);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder.send().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout
            } else {
                GatewayError::Transport(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        match status {
            200..=299 => {}
            401 | 403 => return Err(GatewayError::Unauthorized(status)),
            429 => return Err(GatewayError::RateLimited),
            408 => return Err(GatewayError::Timeout),
            _ => {
                let body = resp.text().unwrap_or_default();
                return Err(GatewayError::Status { status, body });
            }
        }
        let text = resp.text().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout
            } else {
                GatewayError::Transport(e.to_string())
            }
        })?;
        let parsed: CompletionResponse =
            serde_json::from_str(&text).map_err(|e| GatewayError::Protocol(format!("{e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| GatewayError::Protocol("response has no choices[0].message.content".into()))
    }
}

impl ChatBackend for OpenAiClient {
    fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        req.validate()?;
        let mut attempt = 1;
        loop {
            match self.attempt(req) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_retryable() && attempt < self.retry.max_attempts => {
                    let wait = self.retry.delay(attempt);
                    warn!("chat attempt {attempt} failed ({e}); retrying in {wait:?}");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                Err(e) => {
                    debug!("chat failed after {attempt} attempt(s): {e}");
                    return Err(e);
                }
            }
        }
    }

    fn retarget(&self, base_url: &str) -> Option<Arc<dyn ChatBackend>> {
        OpenAiClient::with_options(base_url, self.api_key.clone(), self.retry.clone(), self.timeout, self.max_in_flight)
            .ok()
            .map(|c| Arc::new(c) as Arc<dyn ChatBackend>)
    }
}
