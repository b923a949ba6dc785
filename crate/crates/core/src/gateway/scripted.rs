//! Deterministic scripted chat backend.
//!
//! Rules are tried in order and the first match answers. A rule matches on
//! the last user message (`exact`, `substring`) or on how many assistant
//! turns the conversation already holds (`position`). An optional `requires`
//! substring must occur in some user or assistant message, which is how a
//! script tells one dialogue from another. System prompts are not searched:
//! their few-shot examples would otherwise match every conversation.
//!
//! Weighted responses are drawn with a generator seeded from the backend
//! seed, the request seed and the full conversation, so a reply depends only
//! on its inputs and never on call order or thread interleaving.

use std::io::BufRead;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, GatewayError};
use crate::protocol::{Message, Role};
use crate::seed::SeedHasher;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Matcher {
    Exact,
    Substring,
    Position,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedResponse {
    pub weight: f64,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedResponse {
    Fixed(String),
    Weighted(Vec<WeightedResponse>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptedRule {
    pub matcher: Matcher,
    pub pattern: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requires: Option<String>,
    pub response: ScriptedResponse,
}

impl ScriptedRule {
    pub fn exact(pattern: impl Into<String>, response: impl Into<String>) -> Self {
        Self::fixed(Matcher::Exact, pattern, response)
    }

    pub fn substring(pattern: impl Into<String>, response: impl Into<String>) -> Self {
        Self::fixed(Matcher::Substring, pattern, response)
    }

    pub fn position(pos: usize, response: impl Into<String>) -> Self {
        Self::fixed(Matcher::Position, pos.to_string(), response)
    }

    fn fixed(matcher: Matcher, pattern: impl Into<String>, response: impl Into<String>) -> Self {
        ScriptedRule {
            matcher,
            pattern: pattern.into(),
            requires: None,
            response: ScriptedResponse::Fixed(response.into()),
        }
    }

    pub fn weighted(matcher: Matcher, pattern: impl Into<String>, choices: Vec<(f64, String)>) -> Self {
        ScriptedRule {
            matcher,
            pattern: pattern.into(),
            requires: None,
            response: ScriptedResponse::Weighted(
                choices
                    .into_iter()
                    .map(|(weight, text)| WeightedResponse { weight, text })
                    .collect(),
            ),
        }
    }

    pub fn requiring(mut self, needle: impl Into<String>) -> Self {
        self.requires = Some(needle.into());
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.matcher == Matcher::Position && self.pattern.trim().parse::<usize>().is_err() {
            return Err(GatewayError::InvalidScript(format!(
                "position rule needs an integer pattern, got `{}`",
                self.pattern
            )));
        }
        if let ScriptedResponse::Weighted(choices) = &self.response {
            if choices.is_empty() {
                return Err(GatewayError::InvalidScript("weighted rule without choices".into()));
            }
            if choices.iter().any(|c| c.weight.is_nan() || c.weight < 0.0) {
                return Err(GatewayError::InvalidScript("negative weight".into()));
            }
            let total: f64 = choices.iter().map(|c| c.weight).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(GatewayError::InvalidScript(format!("weights sum to {total}, expected 1")));
            }
        }
        Ok(())
    }

    fn matches(&self, messages: &[Message]) -> bool {
        if let Some(needle) = &self.requires {
            let found = messages
                .iter()
                .any(|m| m.role != Role::System && m.content.contains(needle.as_str()));
            if !found {
                return false;
            }
        }
        match self.matcher {
            Matcher::Position => {
                let turns = messages.iter().filter(|m| m.role == Role::Assistant).count();
                self.pattern.trim().parse::<usize>().is_ok_and(|p| p == turns)
            }
            Matcher::Exact | Matcher::Substring => {
                let Some(last) = messages.iter().rev().find(|m| m.role == Role::User) else {
                    return false;
                };
                if self.matcher == Matcher::Exact {
                    last.content == self.pattern
                } else {
                    last.content.contains(self.pattern.as_str())
                }
            }
        }
    }
}

fn conversation_rng(seed: u64, messages: &[Message]) -> ChaCha8Rng {
    let mut h = SeedHasher::new(seed);
    for m in messages {
        h.write_str(m.role.as_str()).write_str(&m.content);
    }
    ChaCha8Rng::seed_from_u64(h.finish())
}

/// Answers `messages` from `rules`; deterministic in `(rules, messages, seed)`.
pub fn scripted_chat(rules: &[ScriptedRule], messages: &[Message], seed: u64) -> Result<String, GatewayError> {
    if rules.is_empty() {
        return Err(GatewayError::InvalidScript("empty rule set".into()));
    }
    let rule = rules
        .iter()
        .find(|r| r.matches(messages))
        .ok_or(GatewayError::NoRuleMatched)?;
    match &rule.response {
        ScriptedResponse::Fixed(text) => Ok(text.clone()),
        ScriptedResponse::Weighted(choices) => {
            let u: f64 = conversation_rng(seed, messages).random();
            let mut acc = 0.0;
            for c in choices {
                acc += c.weight;
                if u < acc {
                    return Ok(c.text.clone());
                }
            }
            // u landed in the rounding gap above the last cumulative weight
            Ok(choices.last().map(|c| c.text.clone()).unwrap_or_default())
        }
    }
}

/// JSON-lines, one [`ScriptedRule`] per line.
pub fn read_script<R: BufRead>(reader: R) -> Result<Vec<ScriptedRule>, GatewayError> {
    let mut rules = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| GatewayError::InvalidScript(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rule: ScriptedRule = serde_json::from_str(&line)
            .map_err(|e| GatewayError::InvalidScript(format!("line {}: {e}", lineno + 1)))?;
        rule.validate()?;
        rules.push(rule);
    }
    if rules.is_empty() {
        return Err(GatewayError::InvalidScript("script has no rules".into()));
    }
    Ok(rules)
}

#[derive(Debug)]
pub struct ScriptedBackend {
    rules: Vec<ScriptedRule>,
    seed: u64,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptedRule>, seed: u64) -> Result<Self, GatewayError> {
        if rules.is_empty() {
            return Err(GatewayError::InvalidScript("empty rule set".into()));
        }
        for r in &rules {
            r.validate()?;
        }
        Ok(ScriptedBackend {
            rules,
            seed,
            calls: AtomicUsize::new(0),
        })
    }

    pub fn rules(&self) -> &[ScriptedRule] {
        &self.rules
    }

    /// Number of chat calls served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl ChatBackend for ScriptedBackend {
    fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        req.validate()?;
        self.calls.fetch_add(1, Ordering::Relaxed);
        let seed = SeedHasher::new(self.seed).write_u64(req.seed.unwrap_or(0)).finish();
        scripted_chat(&self.rules, &req.messages, seed)
    }
}
