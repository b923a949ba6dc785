//! Answer normalization and EM / token-F1 scoring.
//!
//! Normalization follows the SQuAD/HotpotQA evaluation convention: lowercase,
//! delete punctuation, drop the articles `a`, `an`, `the`, split on
//! whitespace. Punctuation is any character in a Unicode `P*` category so
//! non-ASCII answers normalize the same way ASCII ones do.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

static PUNCT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\p{P}").unwrap());

const ARTICLES: [&str; 3] = ["a", "an", "the"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("cannot aggregate an empty set of predictions")]
    EmptySet,
}

/// Token list produced by [`normalize_answer`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NormalizedAnswer {
    tokens: Vec<String>,
}

impl NormalizedAnswer {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

pub fn normalize_answer(raw: &str) -> NormalizedAnswer {
    let lower = raw.to_lowercase();
    let stripped = PUNCT.replace_all(&lower, "");
    let tokens = stripped
        .split_whitespace()
        .filter(|t| !ARTICLES.contains(t))
        .map(str::to_owned)
        .collect();
    NormalizedAnswer { tokens }
}

/// Per-answer score. `em` is 0 or 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    pub em: u8,
    pub f1: f64,
}

pub fn score(pred: &str, gold: &str) -> ScorePair {
    let p = normalize_answer(pred);
    let g = normalize_answer(gold);
    ScorePair {
        em: u8::from(p == g),
        f1: token_f1(p.tokens(), g.tokens()),
    }
}

/// Best score over a set of acceptable gold answers (highest F1, then EM).
pub fn score_best(pred: &str, golds: &[String]) -> ScorePair {
    golds
        .iter()
        .map(|g| score(pred, g))
        .fold(ScorePair { em: 0, f1: 0.0 }, |best, s| ScorePair {
            em: best.em.max(s.em),
            f1: best.f1.max(s.f1),
        })
}

pub fn exact_match(pred: &str, gold: &str) -> u8 {
    u8::from(normalize_answer(pred) == normalize_answer(gold))
}

pub fn f1(pred: &str, gold: &str) -> f64 {
    token_f1(normalize_answer(pred).tokens(), normalize_answer(gold).tokens())
}

/// Bag-of-tokens F1. Each shared token counts `min(count_pred, count_gold)`
/// times.
pub fn token_f1(pred: &[String], gold: &[String]) -> f64 {
    if pred.is_empty() && gold.is_empty() {
        return 1.0;
    }
    if pred.is_empty() || gold.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in gold {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in pred {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred.len() as f64;
    let recall = overlap as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Mean EM and F1 over `(prediction, gold)` pairs, as percentages rounded to
/// two decimals.
pub fn aggregate<P, G>(pairs: &[(P, G)]) -> Result<(f64, f64), MetricsError>
where
    P: AsRef<str>,
    G: AsRef<str>,
{
    let scores: Vec<ScorePair> = pairs
        .iter()
        .map(|(p, g)| score(p.as_ref(), g.as_ref()))
        .collect();
    aggregate_scores(&scores)
}

pub fn aggregate_scores(scores: &[ScorePair]) -> Result<(f64, f64), MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let n = scores.len() as f64;
    let em = scores.iter().map(|s| f64::from(s.em)).sum::<f64>() / n;
    let f1 = scores.iter().map(|s| s.f1).sum::<f64>() / n;
    Ok((round2(em * 100.0), round2(f1 * 100.0)))
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}
