use serde::{Deserialize, Serialize};

use super::grammar::{first_tag, ActionGrammar};
use super::{Message, Role};
use crate::env::Material;
use crate::metrics;

/// Where a worker call's reply came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkerOrigin {
    /// A well-formed model reply.
    Model,
    /// Retrieval returned nothing; no model call was made.
    NoMaterials,
    /// The model failed to produce a usable reply (parse or backend error).
    Fallback,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkerCall {
    /// Planner iteration (0-based) that dispatched this call.
    pub iteration: usize,
    pub subquestion: String,
    /// Entity handle searched (knowledge-graph environments).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub materials: Vec<Material>,
    /// System and user messages sent to the worker.
    pub prompt: Vec<Message>,
    pub reply_raw: String,
    pub selected: Vec<i64>,
    pub sentence: String,
    pub origin: WorkerOrigin,
}

impl WorkerCall {
    /// Single-turn conversation: prompt plus the worker's reply.
    pub fn conversation(&self) -> Vec<Message> {
        let mut m = self.prompt.clone();
        m.push(Message::assistant(self.reply_raw.clone()));
        m
    }

    /// Tail entities of the selected triples.
    pub fn selected_entities(&self) -> impl Iterator<Item = &str> {
        self.selected
            .iter()
            .filter_map(|&i| usize::try_from(i).ok())
            .filter_map(|i| self.materials.get(i))
            .filter_map(|m| m.entity.as_deref())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Answered,
    IterationLimit,
    Malformed,
}

/// One planner episode: the full planner conversation plus every worker call
/// it spawned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub question_id: String,
    pub question: String,
    pub messages: Vec<Message>,
    pub final_answer: Option<String>,
    pub reward: Option<f64>,
    pub em: Option<u8>,
    pub worker_calls: Vec<WorkerCall>,
    /// Search iterations dispatched to workers.
    pub iterations_used: usize,
    pub status: EpisodeStatus,
    pub seed: u64,
}

impl Trajectory {
    /// Assistant turns taken by the planner.
    pub fn planner_turns(&self) -> usize {
        self.messages.iter().filter(|m| m.role == Role::Assistant).count()
    }

    /// Checks the recorded-trajectory invariants; returns a description of
    /// the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        check_alternation(&self.messages)?;
        let last_assistant = self.messages.iter().rev().find(|m| m.role == Role::Assistant);
        let tagged = last_assistant
            .and_then(|m| first_tag(&m.content, "answer"))
            .is_some_and(|a| !a.trim().is_empty());
        if tagged != self.final_answer.is_some() {
            return Err("final_answer does not match the last assistant message".into());
        }
        if self.reward.is_some() && self.final_answer.is_none() && self.reward != Some(0.0) {
            return Err("non-zero reward without a final answer".into());
        }
        if self.iterations_used > 0 && self.worker_calls.is_empty() {
            return Err("iterations recorded without worker calls".into());
        }
        for m in &self.messages {
            if m.role == Role::Assistant && m.content.is_empty() {
                return Err("empty assistant message".into());
            }
        }
        Ok(())
    }

    pub fn is_scored(&self) -> bool {
        self.reward.is_some()
    }
}

/// System message, then user, then strict assistant/user alternation.
pub fn check_alternation(messages: &[Message]) -> Result<(), String> {
    match messages {
        [] | [_] => return Err("conversation shorter than system + user".into()),
        [s, u, ..] if s.role != Role::System || u.role != Role::User => {
            return Err("conversation must open with system then user".into())
        }
        _ => {}
    }
    for (i, pair) in messages[1..].windows(2).enumerate() {
        let ok = matches!(
            (pair[0].role, pair[1].role),
            (Role::User, Role::Assistant) | (Role::Assistant, Role::User)
        );
        if !ok {
            return Err(format!("roles do not alternate at message {}", i + 2));
        }
    }
    Ok(())
}

/// Sets the reward to the answer's F1 against the gold answers (best over
/// aliases), or 0 when there is no answer. EM is recorded alongside.
pub fn score_trajectory(mut t: Trajectory, gold: &[String]) -> Trajectory {
    match &t.final_answer {
        Some(answer) => {
            let s = metrics::score_best(answer, gold);
            t.reward = Some(s.f1);
            t.em = Some(s.em);
        }
        None => {
            t.reward = Some(0.0);
            t.em = Some(0);
        }
    }
    t
}

/// Grammar for a planner with `candidates` entities (or the text grammar).
pub(crate) fn grammar_for(candidates: Option<usize>) -> ActionGrammar {
    match candidates {
        Some(n) => ActionGrammar::Kg { candidates: n },
        None => ActionGrammar::Text,
    }
}
