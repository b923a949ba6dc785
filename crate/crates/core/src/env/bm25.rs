//! Okapi BM25 over title + body.
//!
//! `score(D, Q) = Σ_{q ∈ Q} idf(q) · tf(q,D)·(k1+1) / (tf(q,D) + k1·(1 − b + b·|D|/avgdl))`
//! with `idf(q) = ln(1 + (N − df + 0.5)/(df + 0.5))`, which is always
//! positive, so a document scores above zero iff it shares a query term.
//! Query terms are deduplicated before scoring.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::corpus::{Corpus, Passage};
use super::{EnvError, Hit, Retriever};

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Bm25Index {
    passages: Vec<Passage>,
    doc_len: Vec<u32>,
    avgdl: f64,
    /// term → (doc index, term frequency), doc indices ascending
    postings: BTreeMap<String, Vec<(u32, u32)>>,
    k1: f64,
    b: f64,
}

impl Bm25Index {
    pub fn build(corpus: &Corpus) -> Result<Self, EnvError> {
        Self::with_params(corpus, K1, B)
    }

    pub fn with_params(corpus: &Corpus, k1: f64, b: f64) -> Result<Self, EnvError> {
        if corpus.is_empty() {
            return Err(EnvError::EmptyCorpus);
        }
        let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
        let mut doc_len = Vec::with_capacity(corpus.len());
        for (i, p) in corpus.passages().iter().enumerate() {
            let toks = tokenize(&format!("{} {}", p.title, p.text));
            doc_len.push(toks.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in toks {
                *tf.entry(t).or_default() += 1;
            }
            for (t, c) in tf {
                postings.entry(t).or_default().push((i as u32, c));
            }
        }
        let avgdl = doc_len.iter().map(|&l| f64::from(l)).sum::<f64>() / doc_len.len() as f64;
        Ok(Bm25Index {
            passages: corpus.passages().to_vec(),
            doc_len,
            avgdl,
            postings,
            k1,
            b,
        })
    }

    pub fn num_docs(&self) -> usize {
        self.passages.len()
    }

    pub fn num_terms(&self) -> usize {
        self.postings.len()
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.passages.len() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Scores every document; index i is the score of passage i.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        let mut scores = vec![0.0; self.passages.len()];
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        for term in &terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(list.len());
            for &(doc, tf) in list {
                let tf = f64::from(tf);
                let len_norm = 1.0 - self.b + self.b * f64::from(self.doc_len[doc as usize]) / self.avgdl;
                scores[doc as usize] += idf * tf * (self.k1 + 1.0) / (tf + self.k1 * len_norm);
            }
        }
        scores
    }

    /// Top-`k` passages with positive score; ties go to the smaller id.
    pub fn search(&self, query: &str, k: usize) -> Vec<Hit> {
        let scores = self.scores(query);
        let mut ranked: Vec<(usize, f64)> = scores
            .into_iter()
            .enumerate()
            .filter(|(_, s)| *s > 0.0)
            .collect();
        ranked.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.passages[a.0].id.cmp(&self.passages[b.0].id))
        });
        ranked
            .into_iter()
            .take(k)
            .map(|(i, score)| Hit {
                passage: self.passages[i].clone(),
                score,
            })
            .collect()
    }
}

impl Retriever for Bm25Index {
    fn retrieve(&self, query: &str, k: usize) -> Result<Vec<Hit>, EnvError> {
        Ok(self.search(query, k))
    }
}
