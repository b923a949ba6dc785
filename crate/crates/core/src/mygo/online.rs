//! Batch loops: online iterations with a progressive threshold, and a single
//! offline pass with a fixed one.

use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hook::{NextEndpoint, TrainerHook};
use super::sampler::{Sampled, Sampler, SamplerConfig};
use super::select::select_all;
use super::sft::emit_sft;
use super::threshold::{update_threshold, ThresholdState};
use super::MygoError;
use crate::env::{Environment, QAInstance};
use crate::gateway::ChatBackend;
use crate::par;
use crate::protocol::{AgentConfig, Trajectory};
use crate::seed::SeedHasher;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub iteration: usize,
    pub questions: usize,
    /// Episodes run.
    pub attempted: usize,
    /// Trajectories kept.
    pub accepted: usize,
    pub records: usize,
    /// Mean first-attempt reward.
    pub mean_reward: f64,
    pub k_before: f64,
    pub k_after: f64,
    pub dataset: PathBuf,
}

#[derive(Debug)]
pub struct OnlineRun {
    pub reports: Vec<BatchReport>,
    pub threshold: ThresholdState,
    pub sampled: Vec<Sampled>,
}

#[derive(Debug)]
pub struct OfflineRun {
    pub dataset: PathBuf,
    pub report: BatchReport,
    pub sampled: Vec<Sampled>,
}

/// `t` contiguous ranges covering `0..n`; sizes differ by at most one, the
/// larger ones first.
pub fn partition(n: usize, t: usize) -> Vec<Range<usize>> {
    let (base, extra) = (n / t, n % t);
    let mut start = 0;
    (0..t)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Question indices split into `t` batches over a seeded shuffle. Each batch
/// lists its indices in ascending order, so a single batch is exactly the
/// input order.
pub fn plan_batches(n: usize, t: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(SeedHasher::new(seed).write_str("batches").finish()));
    partition(n, t)
        .into_iter()
        .map(|r| {
            let mut b = order[r].to_vec();
            b.sort_unstable();
            b
        })
        .collect()
}

struct BatchResult {
    sampled: Vec<Sampled>,
    mean: f64,
    k: f64,
    threshold: Option<ThresholdState>,
}

/// First attempts for every question, then the threshold update (when a
/// state is given), then the remaining attempts judged against the updated
/// threshold.
fn sample_batch(
    sampler: &Sampler<'_>,
    batch: &[&QAInstance],
    k: f64,
    state: Option<&ThresholdState>,
) -> Result<BatchResult, MygoError> {
    let mode = sampler.agent.parallelism;
    let first: Vec<Option<Trajectory>> = par::map(mode, batch, |q| sampler.attempt(q, 0))
        .into_iter()
        .collect::<Result<_, _>>()?;
    let rewards: Vec<f64> = first
        .iter()
        .map(|t| t.as_ref().and_then(|t| t.reward).unwrap_or(0.0))
        .collect();
    let mean = if rewards.is_empty() {
        0.0
    } else {
        rewards.iter().sum::<f64>() / rewards.len() as f64
    };
    let threshold = state.map(|s| update_threshold(s, &rewards)).transpose()?;
    let k = threshold.as_ref().map_or(k, |s| s.k);
    let pairs: Vec<(&QAInstance, Option<Trajectory>)> = batch.iter().copied().zip(first).collect();
    let sampled = par::map(mode, &pairs, |(q, t)| sampler.continue_question(q, t.clone(), k))
        .into_iter()
        .collect::<Result<_, _>>()?;
    Ok(BatchResult {
        sampled,
        mean,
        k,
        threshold,
    })
}

fn finish_batch(
    iteration: usize,
    result: &BatchResult,
    k_before: f64,
    dataset: PathBuf,
) -> Result<BatchReport, MygoError> {
    let kept: Vec<Trajectory> = result.sampled.iter().flat_map(|s| s.kept.iter().cloned()).collect();
    let records = select_all(&kept, result.k);
    emit_sft(&records, &dataset)?;
    Ok(BatchReport {
        iteration,
        questions: result.sampled.len(),
        attempted: result.sampled.iter().map(|s| s.attempts).sum(),
        accepted: kept.len(),
        records: records.len(),
        mean_reward: result.mean,
        k_before,
        k_after: result.k,
        dataset,
    })
}

/// Splits `questions` into `t` batches and, per batch: samples, updates the
/// threshold, selects and writes `batch_NNN.jsonl`, persists
/// `threshold.json`, then runs the trainer hook when one is given. A hook
/// failure stops the loop; the reports gathered so far travel with the
/// error.
#[allow(clippy::too_many_arguments)]
pub fn run_online(
    questions: &[QAInstance],
    t: usize,
    env: &Environment,
    backend: Arc<dyn ChatBackend>,
    agent: &AgentConfig,
    cfg: &SamplerConfig,
    hook: Option<&TrainerHook>,
    out_dir: &Path,
) -> Result<OnlineRun, MygoError> {
    cfg.validate()?;
    if t == 0 || questions.len() < t {
        return Err(MygoError::InvalidConfig(format!(
            "need 1 <= T <= #questions, got T={t} with {} questions",
            questions.len()
        )));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut state = ThresholdState::new(cfg.k_init, cfg.r_sup)?;
    let mut backend = backend;
    let mut agent = agent.clone();
    let mut run = OnlineRun {
        reports: Vec::new(),
        threshold: state.clone(),
        sampled: Vec::new(),
    };
    for (iteration, idx) in plan_batches(questions.len(), t, cfg.seed).into_iter().enumerate() {
        let batch: Vec<&QAInstance> = idx.iter().map(|&i| &questions[i]).collect();
        let sampler = Sampler::new(env, backend.as_ref(), &agent, cfg);
        let k_before = state.k;
        let result = sample_batch(&sampler, &batch, k_before, Some(&state))?;
        state = result.threshold.clone().expect("online batches update the threshold");
        let dataset = out_dir.join(format!("batch_{iteration:03}.jsonl"));
        let report = finish_batch(iteration, &result, k_before, dataset)?;
        state.save(&out_dir.join("threshold.json"))?;
        info!(
            "iteration {iteration}: {} accepted of {} attempts, k {:.4} -> {:.4}",
            report.accepted, report.attempted, report.k_before, report.k_after
        );
        run.sampled.extend(result.sampled);
        run.reports.push(report);
        run.threshold = state.clone();
        if let Some(hook) = hook {
            let data = &run.reports[iteration].dataset;
            match hook.invoke(data, iteration) {
                Ok(NextEndpoint::Unchanged) => {}
                Ok(NextEndpoint::Model(name)) => agent.model = name,
                Ok(NextEndpoint::Url(url)) => match backend.retarget(&url) {
                    Some(b) => backend = b,
                    None => warn!("backend cannot be re-targeted; ignoring `{url}`"),
                },
                Err(message) => {
                    return Err(MygoError::HookFailed {
                        iteration,
                        message,
                        partial: run.reports,
                    })
                }
            }
        }
    }
    Ok(run)
}

/// One pass over all questions at the fixed threshold `k_init`, written to
/// `offline.jsonl`.
pub fn run_offline(
    questions: &[QAInstance],
    env: &Environment,
    backend: &dyn ChatBackend,
    agent: &AgentConfig,
    cfg: &SamplerConfig,
    out_dir: &Path,
) -> Result<OfflineRun, MygoError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let sampler = Sampler::new(env, backend, agent, cfg);
    let batch: Vec<&QAInstance> = questions.iter().collect();
    let result = sample_batch(&sampler, &batch, cfg.k_init, None)?;
    let dataset = out_dir.join("offline.jsonl");
    let report = finish_batch(0, &result, cfg.k_init, dataset.clone())?;
    Ok(OfflineRun {
        dataset,
        report,
        sampled: result.sampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn partition_arithmetic() {
        let p = partition(20, 4);
        assert_eq!(p.len(), 4);
        assert!(p.iter().all(|r| r.len() == 5));
        assert_eq!(partition(7, 3).iter().map(|r| r.len()).collect::<Vec<_>>(), [3, 2, 2]);
    }

    #[test]
    fn one_batch_is_input_order() {
        assert_eq!(plan_batches(6, 1, 42), vec![vec![0, 1, 2, 3, 4, 5]]);
    }

    proptest! {
        #[test]
        fn batches_cover_each_question_once(n in 1usize..200, t in 1usize..20, seed in any::<u64>()) {
            prop_assume!(t <= n);
            let plan = plan_batches(n, t, seed);
            prop_assert_eq!(plan.len(), t);
            let mut all: Vec<usize> = plan.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let sizes: Vec<usize> = plan.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
