//! Tag grammar for planner and worker messages.
//!
//! Planner, text environments:
//! `<think>…</think>` then one `<search>query</search>` per subquestion, or
//! `<answer>…</answer>`.
//!
//! Planner, knowledge-graph environments: the same `<think>`/`<answer>` tags,
//! with subquestions written as `Search([i], "question")` lines inside
//! `<action>…</action>`, where `i` indexes the candidate entity list.
//!
//! Worker: `<think>…</think><select>[i][j]…</select><sentence>…</sentence>`,
//! with `[-1]` alone meaning nothing relevant was found.
//!
//! Tag names are case-sensitive. The first well-formed `<think>`, `<answer>`,
//! `<action>`, `<select>` and `<sentence>` wins; every `<search>` is
//! collected. An answer takes precedence over searches in the same message.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed planner action: {0}")]
    MalformedAction(String),
    #[error("search references candidate {index} but only {candidates} exist")]
    IndexOutOfRange { index: i64, candidates: usize },
    #[error("malformed worker reply: {0}")]
    MalformedReply(String),
}

/// Which planner grammar applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionGrammar {
    Text,
    Kg { candidates: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subquestion {
    /// Candidate index (knowledge-graph environments only).
    pub target: Option<usize>,
    pub question: String,
}

impl Subquestion {
    pub fn text(question: impl Into<String>) -> Self {
        Subquestion {
            target: None,
            question: question.into(),
        }
    }

    pub fn targeted(target: usize, question: impl Into<String>) -> Self {
        Subquestion {
            target: Some(target),
            question: question.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    Search(Vec<Subquestion>),
    Answer(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerAction {
    pub think: String,
    pub step: Step,
}

impl PlannerAction {
    pub fn is_answer(&self) -> bool {
        matches!(self.step, Step::Answer(_))
    }

    pub fn answer(&self) -> Option<&str> {
        match &self.step {
            Step::Answer(a) => Some(a),
            Step::Search(_) => None,
        }
    }

    pub fn subquestions(&self) -> &[Subquestion] {
        match &self.step {
            Step::Search(s) => s,
            Step::Answer(_) => &[],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerReply {
    pub think: String,
    /// Selected material indices; `[-1]` means no supporting material.
    pub selected: Vec<i64>,
    pub sentence: String,
}

impl WorkerReply {
    pub fn found_nothing(&self) -> bool {
        self.selected == [-1]
    }
}

/// Inner text of the first `<tag>…</tag>` pair.
pub fn first_tag<'a>(raw: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = raw.find(&open)? + open.len();
    let len = raw[start..].find(&close)?;
    Some(&raw[start..start + len])
}

/// Inner text of every `<tag>…</tag>` pair, in order.
pub fn all_tags<'a>(raw: &'a str, tag: &str) -> Vec<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let mut out = Vec::new();
    let mut rest = raw;
    while let Some(i) = rest.find(&open) {
        let after = &rest[i + open.len()..];
        let Some(j) = after.find(&close) else { break };
        out.push(&after[..j]);
        rest = &after[j + close.len()..];
    }
    out
}

static SEARCH_CALL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"Search\(\s*\[\s*([+-]?\d+)\s*\]\s*,\s*"(.*?)"\s*\)"#).unwrap());
static INDEX: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[\s*([+-]?\d+)\s*\]").unwrap());
static LEADING_IDS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\s*\[\s*-?\d+\s*\])+\s*").unwrap());

pub fn parse_planner_action(raw: &str, grammar: ActionGrammar) -> Result<PlannerAction, ParseError> {
    let think = first_tag(raw, "think").map(str::trim).unwrap_or_default().to_owned();
    if let Some(answer) = first_tag(raw, "answer").map(str::trim) {
        if !answer.is_empty() {
            return Ok(PlannerAction {
                think,
                step: Step::Answer(answer.to_owned()),
            });
        }
    }
    let subquestions = match grammar {
        ActionGrammar::Text => {
            let qs: Vec<Subquestion> = all_tags(raw, "search")
                .into_iter()
                .map(str::trim)
                .filter(|q| !q.is_empty())
                .map(Subquestion::text)
                .collect();
            if qs.is_empty() {
                return Err(ParseError::MalformedAction("no <search> or <answer> tag".into()));
            }
            qs
        }
        ActionGrammar::Kg { candidates } => {
            let body = first_tag(raw, "action")
                .ok_or_else(|| ParseError::MalformedAction("no <action> or <answer> tag".into()))?;
            let mut qs = Vec::new();
            for cap in SEARCH_CALL.captures_iter(body) {
                let index: i64 = cap[1]
                    .parse()
                    .map_err(|_| ParseError::MalformedAction(format!("bad candidate index `{}`", &cap[1])))?;
                if index < 0 || index as u64 >= candidates as u64 {
                    return Err(ParseError::IndexOutOfRange { index, candidates });
                }
                let q = cap[2].trim();
                if q.is_empty() {
                    return Err(ParseError::MalformedAction("empty Search question".into()));
                }
                qs.push(Subquestion::targeted(index as usize, q));
            }
            if qs.is_empty() {
                return Err(ParseError::MalformedAction("<action> holds no Search([i], \"…\") call".into()));
            }
            qs
        }
    };
    Ok(PlannerAction {
        think,
        step: Step::Search(subquestions),
    })
}

pub fn parse_worker_reply(raw: &str) -> Result<WorkerReply, ParseError> {
    let think = first_tag(raw, "think").map(str::trim).unwrap_or_default().to_owned();
    let select = first_tag(raw, "select").ok_or_else(|| ParseError::MalformedReply("no <select> tag".into()))?;
    let mut selected = Vec::new();
    for cap in INDEX.captures_iter(select) {
        let i: i64 = cap[1]
            .parse()
            .map_err(|_| ParseError::MalformedReply(format!("index `{}` is not an integer", &cap[1])))?;
        selected.push(i);
    }
    let leftover = INDEX.replace_all(select, "");
    if leftover.chars().any(|c| !(c.is_whitespace() || c == ',')) {
        return Err(ParseError::MalformedReply(format!("unexpected text in <select>: `{}`", select.trim())));
    }
    if selected.is_empty() {
        return Err(ParseError::MalformedReply("<select> holds no [i] index".into()));
    }
    if selected.iter().any(|&i| i < -1) {
        return Err(ParseError::MalformedReply("negative index other than -1".into()));
    }
    if selected.contains(&-1) && selected.len() > 1 {
        return Err(ParseError::MalformedReply("[-1] combined with other indices".into()));
    }
    let sentence = first_tag(raw, "sentence").ok_or_else(|| ParseError::MalformedReply("no <sentence> tag".into()))?;
    let sentence = LEADING_IDS.replace(sentence.trim(), "").trim().to_owned();
    if sentence.is_empty() {
        return Err(ParseError::MalformedReply("empty <sentence>".into()));
    }
    Ok(WorkerReply {
        think,
        selected,
        sentence,
    })
}

/// Canonical message text for a planner action.
pub fn render_planner_action(action: &PlannerAction, grammar: ActionGrammar) -> String {
    let mut out = format!("<think>\n{}\n</think>\n", action.think);
    match &action.step {
        Step::Answer(a) => out.push_str(&format!("<answer>{a}</answer>")),
        Step::Search(qs) => match grammar {
            ActionGrammar::Text => {
                let tags: Vec<String> = qs.iter().map(|q| format!("<search>{}</search>", q.question)).collect();
                out.push_str(&tags.join("\n"));
            }
            ActionGrammar::Kg { .. } => {
                out.push_str("<action>\n");
                for q in qs {
                    out.push_str(&format!("Search([{}], \"{}\")\n", q.target.unwrap_or(0), q.question));
                }
                out.push_str("</action>");
            }
        },
    }
    out
}

pub fn render_worker_reply(reply: &WorkerReply) -> String {
    let idx: String = reply.selected.iter().map(|i| format!("[{i}]")).collect();
    format!(
        "<think>{}</think>\n<select>{idx}</select>\n<sentence>{}</sentence>",
        reply.think, reply.sentence
    )
}

const STRUCTURAL_TAGS: [&str; 6] = ["think", "search", "answer", "action", "select", "sentence"];

/// Sequence of `(tag, inner text)` for the recognized tags, in document
/// order, with each inner line trimmed and blank lines dropped. Two messages
/// with equal structure carry the same information.
pub fn tag_structure(raw: &str) -> Vec<(String, String)> {
    let mut found: Vec<(usize, String, String)> = Vec::new();
    for tag in STRUCTURAL_TAGS {
        let open = format!("<{tag}>");
        let close = format!("</{tag}>");
        let mut offset = 0;
        while let Some(i) = raw[offset..].find(&open) {
            let start = offset + i + open.len();
            let Some(j) = raw[start..].find(&close) else { break };
            let inner: Vec<&str> = raw[start..start + j]
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            found.push((offset + i, tag.to_owned(), inner.join("\n")));
            offset = start + j + close.len();
        }
    }
    found.sort_by_key(|(pos, _, _)| *pos);
    found.into_iter().map(|(_, t, c)| (t, c)).collect()
}
