//! Trajectory sampling and training-data emission.
//!
//! Questions are sampled repeatedly; a trajectory is kept when its reward is
//! strictly above the current threshold. Kept trajectories become masked
//! chat records (one for the planner conversation, one per worker call) that
//! a standard fine-tuning pipeline can consume directly.

pub mod hook;
pub mod online;
pub mod sampler;
pub mod select;
pub mod sft;
pub mod threshold;

use thiserror::Error;

pub use hook::{NextEndpoint, TrainerHook};
pub use online::{partition, plan_batches, run_offline, run_online, BatchReport, OfflineRun, OnlineRun};
pub use sampler::{Sampled, Sampler, SamplerConfig, WARMUP_PRESETS};
pub use select::{dedup, select_all, select_training_units, warmup_select};
pub use sft::{emit_sft, read_sft, SftMessage, SftRecord, Source};
pub use threshold::{candidate, update_threshold, ThresholdState};

use crate::protocol::AgentError;

#[derive(Debug, Error)]
pub enum MygoError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("threshold update needs at least one reward")]
    EmptyBatch,
    #[error("trainer hook failed after iteration {iteration}: {message}")]
    HookFailed {
        iteration: usize,
        message: String,
        /// Reports of the iterations completed before the failure.
        partial: Vec<BatchReport>,
    },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
