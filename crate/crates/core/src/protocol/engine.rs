//! Planner loop and worker dispatch.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::grammar::{parse_planner_action, parse_worker_reply, ParseError, PlannerAction, Step, Subquestion};
use super::prompts::{self, NO_INFORMATION, PROMPTS};
use super::trajectory::{grammar_for, EpisodeStatus, Trajectory, WorkerCall, WorkerOrigin};
use super::{AgentError, Message};
use crate::env::{EnvKind, Environment, QAInstance};
use crate::gateway::{ChatBackend, ChatRequest, DEFAULT_MAX_TOKENS, EVAL_TEMPERATURE};
use crate::par::{self, Parallelism};
use crate::seed::SeedHasher;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeLimits {
    pub max_iterations: usize,
    pub top_k: usize,
    pub max_searches_per_turn: usize,
}

impl Default for EpisodeLimits {
    fn default() -> Self {
        EpisodeLimits {
            max_iterations: 6,
            top_k: 5,
            max_searches_per_turn: 4,
        }
    }
}

impl EpisodeLimits {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.max_iterations == 0 || self.top_k == 0 || self.max_searches_per_turn == 0 {
            return Err(AgentError::InvalidLimits(*self));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Append the worked example to system prompts.
    pub few_shot: bool,
    pub limits: EpisodeLimits,
    /// How worker calls within one iteration are executed.
    pub parallelism: Parallelism,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            model: "default".into(),
            temperature: EVAL_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            few_shot: true,
            limits: EpisodeLimits::default(),
            parallelism: Parallelism::default(),
        }
    }
}

/// One planner/worker agent bound to an environment and a chat backend.
/// Planner and worker share the backend; only their prompts differ.
pub struct Agent<'a> {
    pub env: &'a Environment,
    pub backend: &'a dyn ChatBackend,
    pub config: &'a AgentConfig,
}

/// A subquestion with its knowledge-graph target resolved to a handle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dispatch {
    pub target: Option<String>,
    pub question: String,
}

impl<'a> Agent<'a> {
    pub fn new(env: &'a Environment, backend: &'a dyn ChatBackend, config: &'a AgentConfig) -> Self {
        Agent { env, backend, config }
    }

    fn request(&self, messages: Vec<Message>, seed: u64) -> ChatRequest {
        ChatRequest {
            model: self.config.model.clone(),
            messages,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
            stop: None,
            seed: Some(seed),
        }
    }

    /// Retrieves materials, asks the worker once (plus one retry on an
    /// unusable reply) and records the call. Retrieval failures and backend
    /// errors are returned to the caller.
    pub fn run_worker(&self, question: &QAInstance, sub: &Dispatch, seed: u64) -> Result<WorkerCall, AgentError> {
        let kind = self.env.kind();
        let materials = self
            .env
            .fetch(question, sub.target.as_deref(), &sub.question, self.config.limits.top_k)?;
        let template = PROMPTS.worker(kind);
        let prompt = vec![
            Message::system(template.system_message(self.config.few_shot)),
            Message::user(prompts::worker_question(kind, &sub.question, &materials)),
        ];
        let mut call = WorkerCall {
            iteration: 0,
            subquestion: sub.question.clone(),
            target: sub.target.clone(),
            materials,
            prompt,
            reply_raw: String::new(),
            selected: vec![-1],
            sentence: NO_INFORMATION.to_owned(),
            origin: WorkerOrigin::NoMaterials,
        };
        if call.materials.is_empty() {
            call.reply_raw = format!("<select>[-1]</select>\n<sentence>{NO_INFORMATION}</sentence>");
            return Ok(call);
        }
        for attempt in 0..2u64 {
            let s = SeedHasher::new(seed).write_u64(attempt).finish();
            let raw = self.backend.chat(&self.request(call.prompt.clone(), s))?;
            let parsed = parse_worker_reply(&raw).and_then(|r| {
                let n = call.materials.len() as i64;
                if r.selected.iter().any(|&i| i >= n) {
                    Err(ParseError::MalformedReply(format!("selected index beyond {n} materials")))
                } else {
                    Ok(r)
                }
            });
            call.reply_raw = raw;
            match parsed {
                Ok(reply) => {
                    call.selected = reply.selected;
                    call.sentence = reply.sentence;
                    call.origin = WorkerOrigin::Model;
                    return Ok(call);
                }
                Err(e) => debug!("worker reply unusable (attempt {attempt}): {e}"),
            }
        }
        call.selected = vec![-1];
        call.sentence = NO_INFORMATION.to_owned();
        call.origin = WorkerOrigin::Fallback;
        Ok(call)
    }

    /// Runs every worker call of one planner iteration and merges their
    /// sentences, in dispatch order, into an `Obs:` message. Calls are
    /// independent and may run concurrently; a failed call contributes the
    /// fallback sentence.
    pub fn dispatch_iteration(
        &self,
        question: &QAInstance,
        subs: &[Dispatch],
        iteration: usize,
        seed: u64,
    ) -> (String, Vec<WorkerCall>) {
        let calls = par::map_indexed(self.config.parallelism, subs, |i, sub| {
            let s = SeedHasher::new(seed)
                .write_str("worker")
                .write_u64(iteration as u64)
                .write_u64(i as u64)
                .finish();
            let mut call = self.run_worker(question, sub, s).unwrap_or_else(|e| {
                warn!("worker call `{}` failed: {e}", sub.question);
                WorkerCall {
                    iteration,
                    subquestion: sub.question.clone(),
                    target: sub.target.clone(),
                    materials: Vec::new(),
                    prompt: Vec::new(),
                    reply_raw: String::new(),
                    selected: vec![-1],
                    sentence: NO_INFORMATION.to_owned(),
                    origin: WorkerOrigin::Fallback,
                }
            });
            call.iteration = iteration;
            call
        });
        let sentences: Vec<&str> = calls.iter().map(|c| c.sentence.as_str()).collect();
        (prompts::observation(&sentences), calls)
    }

    /// Plays one episode: planner turn, parse, then answer or dispatch and
    /// observe, for at most `max_iterations` dispatches. A planner reply that
    /// does not parse gets one re-prompt with a format reminder; the reminder
    /// exchange is not recorded. Backend errors abort the episode.
    pub fn run_episode(&self, question: &QAInstance, seed: u64) -> Result<Trajectory, AgentError> {
        let limits = self.config.limits;
        limits.validate()?;
        let kind = self.env.kind();
        let mut candidates: Vec<String> = Vec::new();
        let first_user = match (kind, self.env.kg()) {
            (EnvKind::Kg, Some(store)) => {
                for t in &question.topic_entities {
                    if !store.contains_entity(t) {
                        return Err(AgentError::Env(crate::env::EnvError::UnknownEntity(t.clone())));
                    }
                    candidates.push(t.clone());
                }
                let labels: Vec<&str> = candidates.iter().map(|h| store.label(h)).collect();
                prompts::planner_question(&question.question, Some(&labels))
            }
            _ => prompts::planner_question(&question.question, None),
        };
        let mut messages = vec![
            Message::system(PROMPTS.planner(kind).system_message(self.config.few_shot)),
            Message::user(first_user),
        ];
        let mut t = Trajectory {
            question_id: question.id.clone(),
            question: question.question.clone(),
            messages: Vec::new(),
            final_answer: None,
            reward: None,
            em: None,
            worker_calls: Vec::new(),
            iterations_used: 0,
            status: EpisodeStatus::IterationLimit,
            seed,
        };

        for turn in 0..=limits.max_iterations {
            let grammar = grammar_for((kind == EnvKind::Kg).then_some(candidates.len()));
            let turn_seed = SeedHasher::new(seed).write_str("planner").write_u64(turn as u64).finish();
            let raw = self.backend.chat(&self.request(messages.clone(), turn_seed))?;
            let (raw, action) = match parse_planner_action(&raw, grammar) {
                Ok(a) => (raw, a),
                Err(e) => {
                    debug!("planner reply unusable at turn {turn}: {e}");
                    let mut repair = messages.clone();
                    repair.push(Message::assistant(non_empty(raw)));
                    repair.push(Message::user(prompts::planner_reminder(kind)));
                    let s = SeedHasher::new(turn_seed).write_str("repair").finish();
                    let retry = self.backend.chat(&self.request(repair, s))?;
                    match parse_planner_action(&retry, grammar) {
                        Ok(a) => (retry, a),
                        Err(_) => {
                            messages.push(Message::assistant(non_empty(retry)));
                            t.status = EpisodeStatus::Malformed;
                            break;
                        }
                    }
                }
            };
            messages.push(Message::assistant(raw));
            let subs = match action {
                PlannerAction {
                    step: Step::Answer(answer),
                    ..
                } => {
                    t.final_answer = Some(answer);
                    t.status = EpisodeStatus::Answered;
                    break;
                }
                PlannerAction {
                    step: Step::Search(subs),
                    ..
                } => subs,
            };
            if turn == limits.max_iterations {
                break;
            }
            let dispatch: Vec<Dispatch> = subs
                .into_iter()
                .take(limits.max_searches_per_turn)
                .map(|s| self.resolve(s, &candidates))
                .collect();
            let (mut obs, calls) = self.dispatch_iteration(question, &dispatch, turn, seed);
            if let Some(store) = self.env.kg() {
                let before = candidates.len();
                for e in calls.iter().flat_map(|c| c.selected_entities()) {
                    if store.has_outgoing(e) && !candidates.iter().any(|c| c == e) {
                        candidates.push(e.to_owned());
                    }
                }
                if candidates.len() > before {
                    let labels: Vec<&str> = candidates.iter().map(|h| store.label(h)).collect();
                    obs.push_str(&format!("\nCandidate: {}", prompts::candidate_line(&labels)));
                }
            }
            messages.push(Message::user(obs));
            t.worker_calls.extend(calls);
            t.iterations_used += 1;
        }
        t.messages = messages;
        Ok(t)
    }

    fn resolve(&self, sub: Subquestion, candidates: &[String]) -> Dispatch {
        Dispatch {
            target: sub.target.and_then(|i| candidates.get(i).cloned()),
            question: sub.question,
        }
    }
}

fn non_empty(s: String) -> String {
    if s.trim().is_empty() {
        "(empty reply)".to_owned()
    } else {
        s
    }
}
