//! Retrieval environments the worker consults.
//!
//! Three flavours:
//! - a shared text corpus behind any [`Retriever`] (BM25 by default, dense
//!   retrieval through an embedding service optionally);
//! - a per-question corpus built from the passages shipped with each
//!   question;
//! - a knowledge graph, where visiting an entity exposes the triples it heads.

pub mod bm25;
pub mod corpus;
pub mod dataset;
pub mod embed;
pub mod kg;
pub mod materials;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bm25::Bm25Index;
pub use corpus::{Corpus, Passage};
pub use dataset::{read_dataset, QAInstance};
pub use embed::{embed_retrieve, DenseRetriever, Embedder, EmbeddingIndex, HttpEmbedder};
pub use kg::{KgStore, Triple};
pub use materials::{format_materials, Material, MAX_MATERIALS};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("duplicate passage id `{0}`")]
    DuplicateId(String),
    #[error("passage `{0}` has an empty body")]
    EmptyBody(String),
    #[error("embedding service unavailable: {0}")]
    ServiceUnavailable(String),
    #[error("embedding dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("knowledge-graph search needs a target entity")]
    MissingTarget,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A ranked passage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub passage: Passage,
    pub score: f64,
}

pub trait Retriever: Send + Sync {
    fn retrieve(&self, query: &str, k: usize) -> Result<Vec<Hit>, EnvError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Text,
    Kg,
}

pub enum Environment {
    Text(Box<dyn Retriever>),
    /// BM25 over each question's own `context` passages.
    PerQuestion,
    Kg(KgStore),
}

impl Environment {
    pub fn text(retriever: impl Retriever + 'static) -> Self {
        Environment::Text(Box::new(retriever))
    }

    pub fn kind(&self) -> EnvKind {
        match self {
            Environment::Text(_) | Environment::PerQuestion => EnvKind::Text,
            Environment::Kg(_) => EnvKind::Kg,
        }
    }

    pub fn kg(&self) -> Option<&KgStore> {
        match self {
            Environment::Kg(s) => Some(s),
            _ => None,
        }
    }

    /// Materials for one worker call.
    ///
    /// Text environments return the top-`k` passage bodies. The knowledge
    /// graph returns every triple headed by `target`; when that exceeds
    /// [`MAX_MATERIALS`], the most lexically relevant ones are kept, still in
    /// insertion order.
    pub fn fetch(
        &self,
        question: &QAInstance,
        target: Option<&str>,
        subquestion: &str,
        top_k: usize,
    ) -> Result<Vec<Material>, EnvError> {
        let k = top_k.min(MAX_MATERIALS);
        match self {
            Environment::Text(r) => Ok(hits_to_materials(r.retrieve(subquestion, k)?)),
            Environment::PerQuestion => {
                if question.context.is_empty() {
                    return Ok(Vec::new());
                }
                let corpus = Corpus::new(question.context.clone())?;
                Ok(hits_to_materials(Bm25Index::build(&corpus)?.search(subquestion, k)))
            }
            Environment::Kg(store) => {
                let entity = target.ok_or(EnvError::MissingTarget)?;
                let triples = store.neighbors(entity)?;
                let keep: Vec<usize> = if triples.len() <= MAX_MATERIALS {
                    (0..triples.len()).collect()
                } else {
                    most_relevant(store, &triples, subquestion)
                };
                Ok(keep
                    .into_iter()
                    .map(|i| Material {
                        text: store.render(triples[i]),
                        entity: Some(triples[i].tail.clone()),
                    })
                    .collect())
            }
        }
    }
}

fn hits_to_materials(hits: Vec<Hit>) -> Vec<Material> {
    hits.into_iter().map(|h| Material::text(h.passage.text)).collect()
}

fn most_relevant(store: &KgStore, triples: &[&Triple], query: &str) -> Vec<usize> {
    let passages = triples
        .iter()
        .enumerate()
        .map(|(i, t)| Passage::new(format!("{i:06}"), "", store.render(t)))
        .collect();
    let scores = Corpus::new(passages)
        .and_then(|c| Bm25Index::build(&c))
        .map(|idx| idx.scores(query))
        .unwrap_or_else(|_| vec![0.0; triples.len()]);
    let mut order: Vec<usize> = (0..triples.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(MAX_MATERIALS);
    order.sort_unstable();
    order
}
