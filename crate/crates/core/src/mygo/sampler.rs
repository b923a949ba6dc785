//! Multiple-attempt rejection sampling for one question.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::MygoError;
use crate::env::{Environment, QAInstance};
use crate::gateway::{ChatBackend, GatewayError, SAMPLING_TEMPERATURE};
use crate::protocol::{score_trajectory, Agent, AgentConfig, AgentError, Trajectory};
use crate::seed::attempt_seed;

/// Warmup selection sizes: the small preset and the large one.
pub const WARMUP_PRESETS: [usize; 2] = [300, 1000];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Trajectories to keep per question.
    pub m: usize,
    pub max_attempts: usize,
    /// Questions per online iteration.
    pub batch_size: usize,
    pub k_init: f64,
    /// Supremum of the reward; 1 for F1.
    pub r_sup: f64,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            m: 3,
            max_attempts: 16,
            batch_size: 1000,
            k_init: 0.5,
            r_sup: 1.0,
            temperature: SAMPLING_TEMPERATURE,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), MygoError> {
        let bad = |msg: String| Err(MygoError::InvalidConfig(msg));
        if self.m == 0 || self.m > self.max_attempts {
            return bad(format!("need 1 <= m <= max_attempts, got m={} max_attempts={}", self.m, self.max_attempts));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return bad(format!("temperature must be non-negative, got {}", self.temperature));
        }
        if !self.r_sup.is_finite() || self.r_sup <= 0.0 {
            return bad(format!("r_sup must be positive, got {}", self.r_sup));
        }
        if !self.k_init.is_finite() || self.k_init > self.r_sup {
            return bad(format!("k_init {} must be finite and at most r_sup", self.k_init));
        }
        Ok(())
    }
}

/// Outcome of sampling one question.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sampled {
    pub question_id: String,
    /// Trajectories with reward strictly above the threshold, in attempt order.
    pub kept: Vec<Trajectory>,
    pub attempts: usize,
    /// Reward of the first attempt (0 when it errored).
    pub first_reward: f64,
}

/// Runs episodes against one environment/backend pair with the sampling
/// temperature applied.
pub struct Sampler<'a> {
    pub env: &'a Environment,
    pub backend: &'a dyn ChatBackend,
    pub agent: AgentConfig,
    pub cfg: SamplerConfig,
}

impl<'a> Sampler<'a> {
    pub fn new(env: &'a Environment, backend: &'a dyn ChatBackend, agent: &AgentConfig, cfg: &SamplerConfig) -> Self {
        let mut agent = agent.clone();
        agent.temperature = cfg.temperature;
        Sampler {
            env,
            backend,
            agent,
            cfg: cfg.clone(),
        }
    }

    /// One scored episode. Errors that make every further call pointless
    /// (bad credentials, invalid requests or scripts) are returned; any other
    /// episode error is a failed attempt and yields `None`.
    pub fn attempt(&self, q: &QAInstance, attempt: usize) -> Result<Option<Trajectory>, AgentError> {
        let seed = attempt_seed(self.cfg.seed, &q.id, attempt);
        match Agent::new(self.env, self.backend, &self.agent).run_episode(q, seed) {
            Ok(t) => Ok(Some(score_trajectory(t, &q.gold_answers))),
            Err(e) if is_fatal(&e) => Err(e),
            Err(e) => {
                warn!("question {} attempt {attempt} failed: {e}", q.id);
                Ok(None)
            }
        }
    }

    /// Samples until `m` trajectories beat `k` or `max_attempts` are spent.
    pub fn sample_question(&self, q: &QAInstance, k: f64) -> Result<Sampled, AgentError> {
        let first = self.attempt(q, 0)?;
        self.continue_question(q, first, k)
    }

    /// Finishes sampling given the already-run first attempt.
    pub fn continue_question(&self, q: &QAInstance, first: Option<Trajectory>, k: f64) -> Result<Sampled, AgentError> {
        let first_reward = first.as_ref().and_then(|t| t.reward).unwrap_or(0.0);
        let mut out = Sampled {
            question_id: q.id.clone(),
            kept: Vec::new(),
            attempts: 1,
            first_reward,
        };
        let consider = |t: Option<Trajectory>, kept: &mut Vec<Trajectory>| {
            if let Some(t) = t.filter(|t| t.reward.is_some_and(|r| r > k)) {
                kept.push(t);
            }
        };
        consider(first, &mut out.kept);
        while out.kept.len() < self.cfg.m && out.attempts < self.cfg.max_attempts {
            let t = self.attempt(q, out.attempts)?;
            out.attempts += 1;
            consider(t, &mut out.kept);
        }
        debug!("question {}: kept {} in {} attempts", q.id, out.kept.len(), out.attempts);
        Ok(out)
    }
}

fn is_fatal(e: &AgentError) -> bool {
    matches!(
        e,
        AgentError::InvalidLimits(_)
            | AgentError::Backend(GatewayError::Unauthorized(_) | GatewayError::InvalidRequest(_) | GatewayError::InvalidScript(_))
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::default().validate().is_ok());
        let full_scale = SamplerConfig {
            batch_size: 1000,
            m: 3,
            max_attempts: 16,
            ..SamplerConfig::default()
        };
        assert!(full_scale.validate().is_ok());
        for bad in [
            SamplerConfig { m: 0, ..Default::default() },
            SamplerConfig { m: 17, ..Default::default() },
            SamplerConfig { batch_size: 0, ..Default::default() },
            SamplerConfig { temperature: -0.1, ..Default::default() },
            SamplerConfig { k_init: 1.5, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}
