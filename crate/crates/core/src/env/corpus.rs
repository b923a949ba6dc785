//! Passage corpora.

use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::EnvError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

impl Passage {
    pub fn new(id: impl Into<String>, title: impl Into<String>, text: impl Into<String>) -> Self {
        Passage {
            id: id.into(),
            title: title.into(),
            text: text.into(),
        }
    }
}

/// Validated passage list: unique ids, non-empty bodies.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    passages: Vec<Passage>,
}

impl Corpus {
    pub fn new(passages: Vec<Passage>) -> Result<Self, EnvError> {
        let mut ids = HashSet::new();
        for p in &passages {
            if !ids.insert(p.id.as_str()) {
                return Err(EnvError::DuplicateId(p.id.clone()));
            }
            if p.text.trim().is_empty() {
                return Err(EnvError::EmptyBody(p.id.clone()));
            }
        }
        Ok(Corpus { passages })
    }

    /// JSON-lines, one `{"id", "title", "text"}` object per line.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, EnvError> {
        let mut passages = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let p: Passage = serde_json::from_str(&line)
                .map_err(|e| EnvError::Parse(format!("corpus line {}: {e}", lineno + 1)))?;
            passages.push(p);
        }
        Corpus::new(passages)
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }
}
