//! Masked chat records for supervised fine-tuning.
//!
//! Every message carries a `train` flag that is set exactly on assistant
//! messages, so a trainer computes the loss only on tokens the agent
//! produced.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::protocol::{Message, Role};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Planner,
    Worker,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SftMessage {
    pub role: Role,
    pub content: String,
    pub train: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SftRecord {
    pub source: Source,
    pub question_id: String,
    pub reward: f64,
    pub messages: Vec<SftMessage>,
}

impl SftRecord {
    pub fn new(source: Source, question_id: &str, reward: f64, messages: &[Message]) -> Self {
        SftRecord {
            source,
            question_id: question_id.to_owned(),
            reward,
            messages: messages
                .iter()
                .map(|m| SftMessage {
                    role: m.role,
                    content: m.content.clone(),
                    train: m.role == Role::Assistant,
                })
                .collect(),
        }
    }

    /// `train` is set exactly on assistant messages and at least one
    /// message is trained.
    pub fn mask_is_sound(&self) -> bool {
        self.messages.iter().all(|m| m.train == (m.role == Role::Assistant)) && self.messages.iter().any(|m| m.train)
    }
}

/// Writes one JSON object per line and returns the number of lines.
pub fn emit_sft(records: &[SftRecord], path: &Path) -> std::io::Result<usize> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(records.len())
}

pub fn read_sft(path: &Path) -> std::io::Result<Vec<SftRecord>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(std::io::Error::from))
        .collect()
}
