//! Planner-worker multi-hop question answering with threshold rejection
//! sampling.
//!
//! The crate is organized around the life of one question:
//!
//! - [`env`] holds the retrieval environments (knowledge graph, text corpus)
//!   and dataset loaders.
//! - [`gateway`] talks to a chat model, either over an OpenAI-compatible
//!   HTTP endpoint or through a deterministic scripted backend.
//! - [`protocol`] runs the planner/worker conversation and records the
//!   resulting [`protocol::Trajectory`].
//! - [`metrics`] scores answers (EM / token F1); F1 doubles as the reward.
//! - [`mygo`] repeatedly samples trajectories, keeps those whose reward clears
//!   a progressive threshold, and writes masked chat datasets for an external
//!   SFT trainer.
//! - [`theory`] evaluates truncated Boltzmann distributions over finite reward
//!   landscapes.
//!
//! Batch work (questions in a sampling batch, worker calls in one planner
//! iteration) fans out through [`par`], which uses rayon when the `parallel`
//! feature is enabled.

pub mod env;
pub mod fixtures;
pub mod gateway;
pub mod metrics;
pub mod mygo;
pub mod par;
pub mod protocol;
pub mod seed;
pub mod theory;

pub use env::{Corpus, Environment, KgStore, QAInstance};
pub use gateway::{ChatBackend, ChatRequest, ScriptedBackend};
pub use metrics::{exact_match, f1, normalize_answer, ScorePair};
pub use par::Parallelism;
pub use protocol::{Agent, AgentConfig, EpisodeLimits, Message, Role, Trajectory};
