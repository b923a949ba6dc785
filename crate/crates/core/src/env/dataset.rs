//! QA datasets in the 2Wiki / HotpotQA JSON shape.

use std::io::Read;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::corpus::Passage;
use super::kg::KgStore;
use super::EnvError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QAInstance {
    pub id: String,
    pub question: String,
    pub gold_answers: Vec<String>,
    /// Entry points for knowledge-graph environments.
    #[serde(default)]
    pub topic_entities: Vec<String>,
    /// Per-question passages, used by the per-question text environment.
    #[serde(default)]
    pub context: Vec<Passage>,
}

impl QAInstance {
    pub fn new(id: impl Into<String>, question: impl Into<String>, gold: impl Into<String>) -> Self {
        QAInstance {
            id: id.into(),
            question: question.into(),
            gold_answers: vec![gold.into()],
            topic_entities: Vec::new(),
            context: Vec::new(),
        }
    }

    pub fn with_topics<I, S>(mut self, topics: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.topic_entities = topics.into_iter().map(Into::into).collect();
        self
    }

    /// Primary gold answer.
    pub fn gold(&self) -> &str {
        &self.gold_answers[0]
    }

    /// Rewrites topic entities given as labels into store handles.
    pub fn resolve_topics(&mut self, store: &KgStore) -> Result<(), EnvError> {
        for t in &mut self.topic_entities {
            let handle = store
                .resolve(t)
                .ok_or_else(|| EnvError::UnknownEntity(t.clone()))?;
            *t = handle.to_owned();
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawInstance {
    #[serde(rename = "_id")]
    id: Value,
    question: String,
    answer: Value,
    #[serde(default)]
    answer_aliases: Vec<String>,
    #[serde(default)]
    topic_entities: Vec<String>,
    #[serde(default)]
    context: Option<Value>,
}

fn value_to_string(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// `[[title, [sentence, ...]], ...]` as shipped by 2Wiki and HotpotQA.
fn parse_context(qid: &str, v: &Value) -> Result<Vec<Passage>, EnvError> {
    let bad = || EnvError::Parse(format!("question {qid}: context must be [[title, [sentences]]]"));
    let items = v.as_array().ok_or_else(bad)?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let pair = item.as_array().filter(|p| p.len() == 2).ok_or_else(bad)?;
            let title = pair[0].as_str().ok_or_else(bad)?;
            let text = match &pair[1] {
                Value::String(s) => s.trim().to_owned(),
                Value::Array(sents) => sents
                    .iter()
                    .filter_map(Value::as_str)
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .collect::<Vec<_>>()
                    .join(" "),
                _ => return Err(bad()),
            };
            Ok(Passage::new(format!("{qid}#{i}"), title, text))
        })
        .filter(|p| !matches!(p, Ok(p) if p.text.is_empty()))
        .collect()
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Vec<QAInstance>, EnvError> {
    let raw: Vec<RawInstance> =
        serde_json::from_reader(reader).map_err(|e| EnvError::Parse(format!("dataset: {e}")))?;
    raw.into_iter()
        .map(|r| {
            let id = value_to_string(&r.id);
            let mut gold_answers = Vec::new();
            let answer = value_to_string(&r.answer);
            if !answer.trim().is_empty() {
                gold_answers.push(answer);
            }
            gold_answers.extend(r.answer_aliases.into_iter().filter(|a| !a.trim().is_empty()));
            if gold_answers.is_empty() {
                return Err(EnvError::Parse(format!("question {id}: no gold answer")));
            }
            let context = match &r.context {
                Some(v) => parse_context(&id, v)?,
                None => Vec::new(),
            };
            Ok(QAInstance {
                id,
                question: r.question,
                gold_answers,
                topic_entities: r.topic_entities,
                context,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_2wiki_shape() {
        let src = r#"[
          {"_id": "a1", "question": "Q?", "answer": "Town of Brookhaven", "answer_aliases": ["Brookhaven"],
           "topic_entities": ["Q1"],
           "context": [["T0", ["First.", " Second."]], ["T1", []]]},
          {"_id": 7, "question": "Q2?", "answer": "yes"}
        ]"#;
        let ds = read_dataset(src.as_bytes()).unwrap();
        assert_eq!(ds[0].gold_answers, ["Town of Brookhaven", "Brookhaven"]);
        assert_eq!(ds[0].context.len(), 1);
        assert_eq!(ds[0].context[0].text, "First. Second.");
        assert_eq!(ds[0].context[0].id, "a1#0");
        assert_eq!(ds[1].id, "7");
        assert_eq!(ds[1].gold(), "yes");
    }

    #[test]
    fn rejects_missing_answer() {
        let src = r#"[{"_id": "x", "question": "Q?", "answer": ""}]"#;
        assert!(read_dataset(src.as_bytes()).is_err());
    }

    #[test]
    fn resolves_topic_labels() {
        let mut kg = KgStore::new();
        kg.insert("Q1", "director", "Q2");
        kg.set_label("Q1", "Polish-Russian War");
        let mut q = QAInstance::new("1", "q", "a").with_topics(["Polish-Russian War"]);
        q.resolve_topics(&kg).unwrap();
        assert_eq!(q.topic_entities, ["Q1"]);
        let mut bad = QAInstance::new("1", "q", "a").with_topics(["nope"]);
        assert!(bad.resolve_topics(&kg).is_err());
    }
}
