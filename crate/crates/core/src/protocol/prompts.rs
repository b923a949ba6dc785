//! Prompt templates and message rendering.
//!
//! Each asset under `assets/prompts/` holds one template: a
//! `## System Prompts ##` section followed by a worked example as alternating
//! `## User ##` / `## Assistant ##` sections. With few-shot prompting on, the
//! example is appended to the system message; without it only the
//! instructions are sent.

use std::sync::LazyLock;

use crate::env::{format_materials, EnvKind, Material};
use crate::protocol::Message;

pub const PLANNER_TEXT: &str = include_str!("../../assets/prompts/planner_text.txt");
pub const WORKER_TEXT: &str = include_str!("../../assets/prompts/worker_text.txt");
pub const PLANNER_KG: &str = include_str!("../../assets/prompts/planner_kg.txt");
pub const WORKER_KG: &str = include_str!("../../assets/prompts/worker_kg.txt");

/// Fallback worker sentence when no usable reply was obtained.
pub const NO_INFORMATION: &str = "No relevant information found.";

const SYSTEM_HEADER: &str = "## System Prompts ##";
const USER_HEADER: &str = "## User ##";
const ASSISTANT_HEADER: &str = "## Assistant ##";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    pub system: String,
    /// Worked example, user/assistant alternating.
    pub example: Vec<Message>,
}

impl Template {
    pub fn parse(src: &str) -> Template {
        let mut system = String::new();
        let mut example = Vec::new();
        let mut current: Option<&str> = None;
        let mut buf: Vec<&str> = Vec::new();
        let mut flush = |header: Option<&str>, buf: &mut Vec<&str>| {
            let body = buf.join("\n").trim().to_owned();
            match header {
                Some(SYSTEM_HEADER) => system = body,
                Some(USER_HEADER) => example.push(Message::user(body)),
                Some(ASSISTANT_HEADER) => example.push(Message::assistant(body)),
                _ => {}
            }
            buf.clear();
        };
        for line in src.lines() {
            if matches!(line.trim(), SYSTEM_HEADER | USER_HEADER | ASSISTANT_HEADER) {
                flush(current, &mut buf);
                current = Some(line.trim());
            } else {
                buf.push(line);
            }
        }
        flush(current, &mut buf);
        Template { system, example }
    }

    /// System message content, with the worked example when `few_shot`.
    pub fn system_message(&self, few_shot: bool) -> String {
        if !few_shot || self.example.is_empty() {
            return self.system.clone();
        }
        let mut out = format!("{}\n\nExample:", self.system);
        for m in &self.example {
            let header = match m.role {
                crate::protocol::Role::User => USER_HEADER,
                _ => ASSISTANT_HEADER,
            };
            out.push_str(&format!("\n{header}\n{}", m.content));
        }
        out
    }
}

pub struct PromptSet {
    pub planner_text: Template,
    pub worker_text: Template,
    pub planner_kg: Template,
    pub worker_kg: Template,
}

pub static PROMPTS: LazyLock<PromptSet> = LazyLock::new(|| PromptSet {
    planner_text: Template::parse(PLANNER_TEXT),
    worker_text: Template::parse(WORKER_TEXT),
    planner_kg: Template::parse(PLANNER_KG),
    worker_kg: Template::parse(WORKER_KG),
});

impl PromptSet {
    pub fn planner(&self, kind: EnvKind) -> &Template {
        match kind {
            EnvKind::Text => &self.planner_text,
            EnvKind::Kg => &self.planner_kg,
        }
    }

    pub fn worker(&self, kind: EnvKind) -> &Template {
        match kind {
            EnvKind::Text => &self.worker_text,
            EnvKind::Kg => &self.worker_kg,
        }
    }
}

/// `[0] A [1] B`
pub fn candidate_line(labels: &[&str]) -> String {
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| format!("[{i}] {l}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn planner_question(question: &str, candidates: Option<&[&str]>) -> String {
    match candidates {
        Some(c) => format!("Question: {question}\nCandidate: {}", candidate_line(c)),
        None => format!("Question: {question}"),
    }
}

pub fn worker_question(kind: EnvKind, question: &str, materials: &[Material]) -> String {
    let texts: Vec<&str> = materials.iter().map(|m| m.text.as_str()).collect();
    let label = match kind {
        EnvKind::Text => "Context",
        EnvKind::Kg => "Materials",
    };
    format!("Question: {question}\n{label}:\n{}", format_materials(&texts))
}

/// `Obs: s1 s2 …` with worker sentences in dispatch order.
pub fn observation<S: AsRef<str>>(sentences: &[S]) -> String {
    let joined: Vec<&str> = sentences.iter().map(AsRef::as_ref).collect();
    format!("Obs: {}", joined.join(" "))
}

pub fn planner_reminder(kind: EnvKind) -> &'static str {
    match kind {
        EnvKind::Text => {
            "Your reply could not be parsed. Think inside <think>...</think>, then either put each search query in its own <search>...</search> tag or give the final answer inside <answer>...</answer>."
        }
        EnvKind::Kg => {
            "Your reply could not be parsed. Think inside <think>...</think>, then either list Search([i], \"question\") calls inside <action>...</action> using a listed candidate index, or give the final answer inside <answer>...</answer>."
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Role;

    #[test]
    fn templates_parse_into_sections() {
        let p = &PROMPTS.planner_text;
        assert!(p.system.starts_with("**Your Task:**"));
        assert!(p.system.ends_with("put your final answer within '<answer>' tags."));
        assert_eq!(p.example.len(), 6);
        assert_eq!(p.example[0].content, "Question: Who succeeded the first President of Namibia?");
        assert_eq!(p.example[5].role, Role::Assistant);

        let k = &PROMPTS.planner_kg;
        assert_eq!(
            k.example[0].content,
            "Question: Which film came out first, Blind Shaft or The Mask Of Fu Manchu?\nCandidate: [0] Blind Shaft [1] The Mask Of Fu Manchu"
        );
        assert_eq!(k.example.len(), 4);
        assert_eq!(PROMPTS.worker_kg.example.len(), 2);
        assert_eq!(PROMPTS.worker_text.example.len(), 2);
    }

    #[test]
    fn example_user_turns_match_renderers() {
        let k = &PROMPTS.planner_kg;
        assert_eq!(
            planner_question(
                "Which film came out first, Blind Shaft or The Mask Of Fu Manchu?",
                Some(&["Blind Shaft", "The Mask Of Fu Manchu"])
            ),
            k.example[0].content
        );
        let mats: Vec<Material> = crate::fixtures::XAWERY_TRIPLES
            .iter()
            .map(|(h, r, t)| Material::text(format!("{h}, {r}, {t}")))
            .collect();
        assert_eq!(
            worker_question(EnvKind::Kg, "Who is the mother of Xawery Żuławski?", &mats),
            PROMPTS.worker_kg.example[0].content
        );
    }

    #[test]
    fn few_shot_toggle() {
        let t = &PROMPTS.worker_kg;
        assert_eq!(t.system_message(false), t.system);
        let with = t.system_message(true);
        assert!(with.starts_with(&t.system));
        assert!(with.contains("## User ##\nQuestion: Who is the mother of Xawery Żuławski?"));
    }

    #[test]
    fn observation_format() {
        assert_eq!(observation(&["a."]), "Obs: a.");
        assert_eq!(observation(&["a.", "b."]), "Obs: a. b.");
    }
}
