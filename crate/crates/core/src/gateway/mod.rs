//! Chat-completion access shared by planner and worker turns.

pub mod openai;
pub mod retry;
pub mod scripted;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{Message, Role};

pub use openai::OpenAiClient;
pub use retry::RetryPolicy;
pub use scripted::{read_script, scripted_chat, Matcher, ScriptedBackend, ScriptedResponse, ScriptedRule, WeightedResponse};

/// Temperature used while sampling trajectories for the dataset.
pub const SAMPLING_TEMPERATURE: f64 = 0.7;
/// Temperature used for evaluation runs.
pub const EVAL_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_TOKENS: u32 = 1024;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("unauthorized (status {0})")]
    Unauthorized(u16),
    #[error("rate limited")]
    RateLimited,
    #[error("request timed out")]
    Timeout,
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("server returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("no scripted rule matched the conversation")]
    NoRuleMatched,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid script: {0}")]
    InvalidScript(String),
}

impl GatewayError {
    pub fn is_retryable(&self) -> bool {
        match self {
            GatewayError::RateLimited | GatewayError::Timeout | GatewayError::Transport(_) => true,
            GatewayError::Status { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, messages: Vec<Message>) -> Self {
        ChatRequest {
            model: model.into(),
            messages,
            temperature: EVAL_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            stop: None,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        match self.messages.first() {
            None => return Err(GatewayError::InvalidRequest("no messages".into())),
            Some(m) if m.role != Role::System => {
                return Err(GatewayError::InvalidRequest("first message must be a system message".into()))
            }
            _ => {}
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GatewayError::InvalidRequest(format!("temperature {} < 0", self.temperature)));
        }
        Ok(())
    }
}

pub trait ChatBackend: Send + Sync {
    /// Returns the assistant reply for `req`.
    fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError>;

    /// A backend pointing at a different endpoint, if this backend supports
    /// being re-targeted (used after an external training step).
    fn retarget(&self, _base_url: &str) -> Option<Arc<dyn ChatBackend>> {
        None
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Arc<B> {
    fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        (**self).chat(req)
    }

    fn retarget(&self, base_url: &str) -> Option<Arc<dyn ChatBackend>> {
        (**self).retarget(base_url)
    }
}
