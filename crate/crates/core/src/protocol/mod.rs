//! The planner/worker conversation protocol.
//!
//! The planner decomposes a question into subquestions, each iteration
//! issuing a set of mutually independent ones; workers answer them from the
//! environment as small retrieval-augmented calls; their sentences come back
//! to the planner as one observation. Later iterations can build on earlier
//! observations, so the subquestions of an episode form a DAG.

pub mod engine;
pub mod grammar;
mod message;
pub mod prompts;
pub mod trajectory;

use thiserror::Error;

pub use engine::{Agent, AgentConfig, Dispatch, EpisodeLimits};
pub use grammar::{
    parse_planner_action, parse_worker_reply, render_planner_action, render_worker_reply, tag_structure,
    ActionGrammar, ParseError, PlannerAction, Step, Subquestion, WorkerReply,
};
pub use message::{Message, Role};
pub use trajectory::{check_alternation, score_trajectory, EpisodeStatus, Trajectory, WorkerCall, WorkerOrigin};

use crate::env::EnvError;
use crate::gateway::GatewayError;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Backend(#[from] GatewayError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("episode limits must all be at least 1: {0:?}")]
    InvalidLimits(EpisodeLimits),
}
