//! Progressive selection threshold.
//!
//! After each batch the threshold becomes `max(k', mean / (r_sup + 1) * r_sup)`
//! where `mean` is the average first-attempt reward of the batch. The max
//! makes it non-decreasing; with `r_sup = 1` the candidate never exceeds 0.5.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MygoError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdState {
    pub k: f64,
    pub r_sup: f64,
    /// `(iteration, k after the update, batch mean reward)`.
    pub history: Vec<(usize, f64, f64)>,
}

/// The update candidate `mean / (r_sup + 1) * r_sup`.
pub fn candidate(mean: f64, r_sup: f64) -> f64 {
    mean / (r_sup + 1.0) * r_sup
}

impl ThresholdState {
    pub fn new(k_init: f64, r_sup: f64) -> Result<Self, MygoError> {
        if !r_sup.is_finite() || r_sup <= 0.0 {
            return Err(MygoError::InvalidConfig(format!("r_sup must be positive, got {r_sup}")));
        }
        if !k_init.is_finite() || k_init > r_sup {
            return Err(MygoError::InvalidConfig(format!("k_init {k_init} must be finite and at most r_sup {r_sup}")));
        }
        Ok(ThresholdState {
            k: k_init,
            r_sup,
            history: Vec::new(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, MygoError> {
        let state: ThresholdState = serde_json::from_str(&fs::read_to_string(path)?)?;
        ThresholdState::new(state.k, state.r_sup)?;
        Ok(state)
    }

    pub fn save(&self, path: &Path) -> Result<(), MygoError> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// Non-decreasing sequence of thresholds, starting with the initial one.
    pub fn trace(&self, k_init: f64) -> Vec<f64> {
        std::iter::once(k_init).chain(self.history.iter().map(|h| h.1)).collect()
    }
}

/// Applies one batch's rewards. The iteration number recorded is the
/// history length.
pub fn update_threshold(state: &ThresholdState, batch_rewards: &[f64]) -> Result<ThresholdState, MygoError> {
    if batch_rewards.is_empty() {
        return Err(MygoError::EmptyBatch);
    }
    let mean = batch_rewards.iter().sum::<f64>() / batch_rewards.len() as f64;
    let k = state.k.max(candidate(mean, state.r_sup));
    let mut next = state.clone();
    next.k = k;
    next.history.push((state.history.len(), k, mean));
    Ok(next)
}
