//! Dense retrieval through an external embedding service.
//!
//! Passage vectors are computed once (or loaded from a cache file) and stored
//! unit-normalized, so cosine similarity reduces to a dot product.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::corpus::{Corpus, Passage};
use super::{EnvError, Hit, Retriever};

pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EnvError>;
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    input: &'a [String],
    model: &'a str,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

/// Client for `POST {url}` with `{"input": [...], "model": ...}` bodies.
pub struct HttpEmbedder {
    url: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpEmbedder {
    pub fn new(url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Result<Self, EnvError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| EnvError::ServiceUnavailable(e.to_string()))?;
        Ok(HttpEmbedder {
            url: url.into(),
            model: model.into(),
            api_key,
            client,
        })
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EnvError> {
        let mut req = self.client.post(&self.url).json(&EmbeddingRequest {
            input: texts,
            model: &self.model,
        });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| EnvError::ServiceUnavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(EnvError::ServiceUnavailable(format!("status {}", resp.status())));
        }
        let body: EmbeddingResponse = resp
            .json()
            .map_err(|e| EnvError::ServiceUnavailable(format!("bad embedding response: {e}")))?;
        if body.data.len() != texts.len() {
            return Err(EnvError::ServiceUnavailable(format!(
                "asked for {} embeddings, got {}",
                texts.len(),
                body.data.len()
            )));
        }
        Ok(body.data.into_iter().map(|d| d.embedding).collect())
    }
}

/// Scales `v` to unit length. Fails on a zero or non-finite vector.
pub fn normalize(mut v: Vec<f64>) -> Result<Vec<f64>, EnvError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(EnvError::DimensionMismatch("zero or non-finite embedding".into()));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

pub fn cosine_unit(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmbeddingIndex {
    passages: Vec<Passage>,
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

impl EmbeddingIndex {
    /// Builds from precomputed vectors (one per passage).
    pub fn from_vectors(corpus: &Corpus, vectors: Vec<Vec<f64>>) -> Result<Self, EnvError> {
        if corpus.is_empty() {
            return Err(EnvError::EmptyCorpus);
        }
        if vectors.len() != corpus.len() {
            return Err(EnvError::DimensionMismatch(format!(
                "{} vectors for {} passages",
                vectors.len(),
                corpus.len()
            )));
        }
        let dim = vectors[0].len();
        let vectors = vectors
            .into_iter()
            .map(|v| {
                if v.len() != dim {
                    return Err(EnvError::DimensionMismatch(format!("expected {dim}, got {}", v.len())));
                }
                normalize(v)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EmbeddingIndex {
            passages: corpus.passages().to_vec(),
            vectors,
            dim,
        })
    }

    /// Embeds every passage (`title text`) through `embedder` in batches.
    pub fn build(corpus: &Corpus, embedder: &dyn Embedder, batch: usize) -> Result<Self, EnvError> {
        let texts: Vec<String> = corpus
            .passages()
            .iter()
            .map(|p| format!("{} {}", p.title, p.text).trim().to_owned())
            .collect();
        let mut vectors = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(batch.max(1)) {
            vectors.extend(embedder.embed(chunk)?);
        }
        Self::from_vectors(corpus, vectors)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Ranks passages by cosine similarity to an already computed query
    /// vector; ties go to the smaller id.
    pub fn rank(&self, query: Vec<f64>, k: usize) -> Result<Vec<Hit>, EnvError> {
        if query.len() != self.dim {
            return Err(EnvError::DimensionMismatch(format!(
                "query has {} dims, index has {}",
                query.len(),
                self.dim
            )));
        }
        let q = normalize(query)?;
        let mut ranked: Vec<(usize, f64)> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (i, cosine_unit(&q, v)))
            .collect();
        ranked.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.passages[a.0].id.cmp(&self.passages[b.0].id))
        });
        Ok(ranked
            .into_iter()
            .take(k)
            .map(|(i, score)| Hit {
                passage: self.passages[i].clone(),
                score,
            })
            .collect())
    }
}

/// Embedding index paired with the service that embeds queries.
pub struct DenseRetriever {
    pub index: EmbeddingIndex,
    pub embedder: Box<dyn Embedder>,
}

impl Retriever for DenseRetriever {
    fn retrieve(&self, query: &str, k: usize) -> Result<Vec<Hit>, EnvError> {
        embed_retrieve(&self.index, self.embedder.as_ref(), query, k)
    }
}

pub fn embed_retrieve(index: &EmbeddingIndex, embedder: &dyn Embedder, query: &str, k: usize) -> Result<Vec<Hit>, EnvError> {
    let mut v = embedder.embed(&[query.to_owned()])?;
    let q = v.pop().ok_or_else(|| EnvError::ServiceUnavailable("empty embedding response".into()))?;
    index.rank(q, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    struct Fixed(Vec<f64>);
    impl Embedder for Fixed {
        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EnvError> {
            Ok(texts.iter().map(|_| self.0.clone()).collect())
        }
    }

    fn three() -> EmbeddingIndex {
        let c = Corpus::new(vec![
            Passage::new("p1", "", "one"),
            Passage::new("p2", "", "two"),
            Passage::new("p3", "", "three"),
        ])
        .unwrap();
        EmbeddingIndex::from_vectors(&c, vec![vec![1.0, 0.0], vec![0.6, 0.8], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn cosine_ordering_matches_hand_arithmetic() {
        let hits = embed_retrieve(&three(), &Fixed(vec![1.0, 0.0]), "q", 3).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.passage.id.as_str()).collect();
        assert_eq!(ids, ["p1", "p2", "p3"]);
        assert!((hits[0].score - 1.0).abs() < 1e-12);
        assert!((hits[1].score - 0.6).abs() < 1e-12);
        assert!(hits[2].score.abs() < 1e-12);
    }

    #[test]
    fn orthogonal_ties_fall_back_to_id() {
        let c = Corpus::new(vec![Passage::new("b", "", "x"), Passage::new("a", "", "y")]).unwrap();
        let idx = EmbeddingIndex::from_vectors(&c, vec![vec![0.0, 1.0], vec![0.0, 2.0]]).unwrap();
        let hits = idx.rank(vec![1.0, 0.0], 2).unwrap();
        assert_eq!(hits[0].passage.id, "a");
        assert_eq!(hits[0].score, 0.0);
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(three().rank(vec![1.0, 0.0, 0.0], 1), Err(EnvError::DimensionMismatch(_))));
        assert!(matches!(normalize(vec![0.0, 0.0]), Err(EnvError::DimensionMismatch(_))));
    }

    #[test]
    fn unreachable_service_is_reported() {
        let e = HttpEmbedder::new("http://127.0.0.1:9/v1/embeddings", "m", None).unwrap();
        assert!(matches!(e.embed(&["x".into()]), Err(EnvError::ServiceUnavailable(_))));
    }

    proptest! {
        #[test]
        fn normalized_and_bounded(a in prop::collection::vec(-10.0f64..10.0, 3), b in prop::collection::vec(-10.0f64..10.0, 3)) {
            prop_assume!(a.iter().any(|x| x.abs() > 1e-3) && b.iter().any(|x| x.abs() > 1e-3));
            let ua = normalize(a).unwrap();
            let ub = normalize(b).unwrap();
            let n = ua.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-6);
            let c = cosine_unit(&ua, &ub);
            prop_assert!((-1.0..=1.0).contains(&c));
        }
    }
}
