//! Run configuration: a TOML file whose relative paths resolve against the
//! file's own directory. Secrets never live here; the API key comes from the
//! environment.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use mujica_core::env::{read_dataset, Bm25Index, DenseRetriever, EmbeddingIndex, HttpEmbedder};
use mujica_core::gateway::{read_script, ChatBackend, OpenAiClient, RetryPolicy};
use mujica_core::mygo::SamplerConfig;
use mujica_core::{AgentConfig, Corpus, Environment, EpisodeLimits, KgStore, Parallelism, QAInstance, ScriptedBackend};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Raised for configuration problems, so the error report can name them.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvChoice {
    #[default]
    Text,
    Kg,
    /// Retrieval over each question's own context passages.
    PerQuestion,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrieverChoice {
    #[default]
    Bm25,
    Dense,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrieverSection {
    pub kind: RetrieverChoice,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub batch: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    #[default]
    Openai,
    Scripted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendChoice,
    pub endpoint: Option<String>,
    pub model: String,
    /// JSON-lines rule file for the scripted backend.
    pub script: Option<PathBuf>,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
}

impl Default for BackendSection {
    fn default() -> Self {
        BackendSection {
            kind: BackendChoice::Openai,
            endpoint: None,
            model: "default".into(),
            script: None,
            max_in_flight: 16,
            timeout_secs: 120,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub few_shot: bool,
    pub max_tokens: u32,
    pub parallelism: Parallelism,
    /// Worker threads; defaults to the backend's in-flight cap.
    pub threads: Option<usize>,
}

impl Default for AgentSection {
    fn default() -> Self {
        let a = AgentConfig::default();
        AgentSection {
            few_shot: a.few_shot,
            max_tokens: a.max_tokens,
            parallelism: a.parallelism,
            threads: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub env: EnvChoice,
    pub dataset: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    /// Prebuilt BM25 index written by `index`.
    pub index: Option<PathBuf>,
    pub kg: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub retriever: RetrieverSection,
    pub backend: BackendSection,
    pub agent: AgentSection,
    pub limits: EpisodeLimits,
    pub sampler: SamplerConfig,
}

impl RunConfig {
    /// Parses `path`, resolves relative paths and checks that referenced
    /// files exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.dataset,
            &mut cfg.corpus,
            &mut cfg.index,
            &mut cfg.kg,
            &mut cfg.labels,
            &mut cfg.backend.script,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.exists() {
                return Err(config_err(format!("{} does not exist", p.display())));
            }
        }
        cfg.sampler.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(cfg)
    }

    /// SHA-256 of the effective configuration.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn threads(&self) -> usize {
        self.agent.threads.unwrap_or(self.backend.max_in_flight)
    }

    /// Agent settings for evaluation runs (greedy decoding).
    pub fn eval_agent(&self) -> AgentConfig {
        AgentConfig {
            model: self.backend.model.clone(),
            temperature: mujica_core::gateway::EVAL_TEMPERATURE,
            max_tokens: self.agent.max_tokens,
            few_shot: self.agent.few_shot,
            limits: self.limits,
            parallelism: self.agent.parallelism,
        }
    }

    fn require<'a>(&self, p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        p.as_deref()
            .ok_or_else(|| config_err(format!("`{what}` must be set for env `{:?}`", self.env)))
    }

    pub fn corpus(&self) -> Result<Corpus> {
        let path = self.require(&self.corpus, "corpus")?;
        Ok(Corpus::read_jsonl(BufReader::new(File::open(path)?))?)
    }

    pub fn kg_store(&self) -> Result<KgStore> {
        let mut store = KgStore::new();
        store.read_tsv(BufReader::new(File::open(self.require(&self.kg, "kg")?)?))?;
        if let Some(labels) = &self.labels {
            store.read_labels(BufReader::new(File::open(labels)?))?;
        }
        Ok(store)
    }

    pub fn bm25(&self) -> Result<Bm25Index> {
        match &self.index {
            Some(p) => serde_json::from_reader(BufReader::new(File::open(p)?))
                .with_context(|| format!("loading index {}", p.display())),
            None => Ok(Bm25Index::build(&self.corpus()?)?),
        }
    }

    pub fn environment(&self) -> Result<Environment> {
        Ok(match self.env {
            EnvChoice::Kg => Environment::Kg(self.kg_store()?),
            EnvChoice::PerQuestion => Environment::PerQuestion,
            EnvChoice::Text => match self.retriever.kind {
                RetrieverChoice::Bm25 => Environment::text(self.bm25()?),
                RetrieverChoice::Dense => {
                    let r = &self.retriever;
                    let endpoint = r.endpoint.clone().ok_or_else(|| config_err("dense retrieval needs retriever.endpoint"))?;
                    let model = r.model.clone().unwrap_or_else(|| "default".into());
                    let key = std::env::var(mujica_core::gateway::openai::API_KEY_ENV).ok();
                    let embedder = HttpEmbedder::new(endpoint, model, key)?;
                    let index = EmbeddingIndex::build(&self.corpus()?, &embedder, r.batch.unwrap_or(64))?;
                    Environment::text(DenseRetriever {
                        index,
                        embedder: Box::new(embedder),
                    })
                }
            },
        })
    }

    /// Questions with knowledge-graph topic labels resolved to handles.
    pub fn questions(&self, env: &Environment) -> Result<Vec<QAInstance>> {
        let path = self.dataset.as_deref().ok_or_else(|| config_err("`dataset` must be set"))?;
        let mut qs = read_dataset(BufReader::new(File::open(path)?))?;
        if let Some(store) = env.kg() {
            for q in &mut qs {
                q.resolve_topics(store)?;
            }
        }
        Ok(qs)
    }

    pub fn backend(&self) -> Result<Arc<dyn ChatBackend>> {
        let b = &self.backend;
        Ok(match b.kind {
            BackendChoice::Scripted => {
                let path = b.script.as_deref().ok_or_else(|| config_err("scripted backend needs backend.script"))?;
                let rules = read_script(BufReader::new(File::open(path)?))?;
                Arc::new(ScriptedBackend::new(rules, self.seed)?)
            }
            BackendChoice::Openai => {
                let endpoint = b.endpoint.clone().ok_or_else(|| config_err("backend.endpoint must be set"))?;
                let key = std::env::var(mujica_core::gateway::openai::API_KEY_ENV).ok().filter(|k| !k.is_empty());
                Arc::new(OpenAiClient::with_options(
                    endpoint,
                    key,
                    RetryPolicy::default(),
                    Duration::from_secs(b.timeout_secs),
                    b.max_in_flight,
                )?)
            }
        })
    }
}

pub fn check_exists(p: &Path) -> Result<()> {
    if !p.exists() {
        bail!(ConfigError(format!("{} does not exist", p.display())));
    }
    Ok(())
}
