use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use mujica_core::env::read_dataset;
use mujica_core::metrics::{aggregate_scores, score_best, ScorePair};
use mujica_core::mygo::{
    emit_sft, run_offline, run_online, select_all, warmup_select, BatchReport, MygoError, Sampled, TrainerHook,
};
use mujica_core::protocol::score_trajectory;
use mujica_core::seed::attempt_seed;
use mujica_core::theory::{min_threshold_for_delta, render_table, report, RewardLandscape};
use mujica_core::{par, Agent, Trajectory};
use serde::{Deserialize, Serialize};

use crate::config::{check_exists, ConfigError, EnvChoice, RunConfig};
use crate::manifest::Manifest;

pub struct Ctx {
    pub config: Option<RunConfig>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Ctx {
    fn config(&self) -> Result<&RunConfig> {
        self.config
            .as_ref()
            .ok_or_else(|| ConfigError("this command needs --config".into()).into())
    }

    fn manifest(&self, command: &str) -> Manifest {
        Manifest::new(command, self.config.as_ref().map(RunConfig::hash), self.seed)
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<usize> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    let mut n = 0;
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    check_exists(path)?;
    BufReader::new(File::open(path)?)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, l)| {
            serde_json::from_str(&l?).with_context(|| format!("{} line {}", path.display(), i + 1))
        })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn print_scores(scores: &[ScorePair]) -> Result<(f64, f64)> {
    let (em, f1) = aggregate_scores(scores)?;
    println!("EM {em:.2}  F1 {f1:.2}  ({} questions)", scores.len());
    Ok((em, f1))
}

pub fn index(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.config()?;
    let mut m = ctx.manifest("index");
    let mut files = Vec::new();
    match cfg.env {
        EnvChoice::Kg => {
            let store = cfg.kg_store()?;
            m.count("triples", store.len());
        }
        EnvChoice::Text | EnvChoice::PerQuestion => {
            let corpus = cfg.corpus()?;
            let index = mujica_core::env::Bm25Index::build(&corpus)?;
            let path = ctx.out("index.json");
            serde_json::to_writer(BufWriter::new(File::create(&path)?), &index)?;
            m.count("documents", index.num_docs()).count("terms", index.num_terms());
            println!("indexed {} passages, {} terms -> {}", index.num_docs(), index.num_terms(), path.display());
            files.push(path);
        }
    }
    m.write(&ctx.out_dir, &files)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct Prediction {
    #[serde(rename = "_id")]
    pub id: String,
    pub prediction: String,
    pub em: u8,
    pub f1: f64,
    pub iterations: usize,
    pub worker_calls: usize,
}

pub fn qa(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.config()?;
    let env = cfg.environment()?;
    let questions = cfg.questions(&env)?;
    let backend = cfg.backend()?;
    let agent_cfg = cfg.eval_agent();
    let agent = Agent::new(&env, backend.as_ref(), &agent_cfg);
    let trajectories: Vec<Trajectory> = par::map(agent_cfg.parallelism, &questions, |q| {
        agent
            .run_episode(q, attempt_seed(ctx.seed, &q.id, 0))
            .map(|t| score_trajectory(t, &q.gold_answers))
            .with_context(|| format!("question {}", q.id))
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let predictions: Vec<Prediction> = trajectories
        .iter()
        .map(|t| Prediction {
            id: t.question_id.clone(),
            prediction: t.final_answer.clone().unwrap_or_default(),
            em: t.em.unwrap_or(0),
            f1: t.reward.unwrap_or(0.0),
            iterations: t.iterations_used,
            worker_calls: t.worker_calls.len(),
        })
        .collect();
    let scores: Vec<ScorePair> = predictions.iter().map(|p| ScorePair { em: p.em, f1: p.f1 }).collect();
    let (em, f1) = print_scores(&scores)?;

    let (pred_path, traj_path) = (ctx.out("predictions.jsonl"), ctx.out("trajectories.jsonl"));
    write_jsonl(&pred_path, &predictions)?;
    write_jsonl(&traj_path, &trajectories)?;
    let mut m = ctx.manifest("qa");
    m.count("questions", questions.len()).count("em", em).count("f1", f1);
    m.write(&ctx.out_dir, &[pred_path, traj_path])?;
    Ok(())
}

pub struct SampleArgs {
    pub offline: bool,
    pub k_init: Option<f64>,
    pub iterations: Option<usize>,
    pub hook: Option<String>,
}

fn kept(sampled: &[Sampled]) -> impl Iterator<Item = &Trajectory> {
    sampled.iter().flat_map(|s| s.kept.iter())
}

fn relative(reports: &mut [BatchReport], out_dir: &Path) {
    for r in reports {
        if let Ok(rel) = r.dataset.strip_prefix(out_dir) {
            r.dataset = rel.to_path_buf();
        }
    }
}

pub fn sample(ctx: &Ctx, args: &SampleArgs) -> Result<()> {
    let cfg = ctx.config()?;
    let mut scfg = cfg.sampler.clone();
    scfg.seed = ctx.seed;
    if let Some(k) = args.k_init {
        scfg.k_init = k;
    }
    scfg.validate()?;
    let env = cfg.environment()?;
    let questions = cfg.questions(&env)?;
    let backend = cfg.backend()?;
    let mut agent = cfg.eval_agent();
    agent.temperature = scfg.temperature;
    let mut m = ctx.manifest("sample");
    let kept_path = ctx.out("kept.jsonl");
    let reports_path = ctx.out("reports.json");

    if args.offline {
        let run = run_offline(&questions, &env, backend.as_ref(), &agent, &scfg, &ctx.out_dir)?;
        write_jsonl(&kept_path, kept(&run.sampled))?;
        let mut reports = vec![run.report];
        relative(&mut reports, &ctx.out_dir);
        write_json(&reports_path, &reports)?;
        let r = &reports[0];
        println!("offline: {} accepted of {} attempts, {} records", r.accepted, r.attempted, r.records);
        m.count("questions", questions.len())
            .count("attempted", r.attempted)
            .count("accepted", r.accepted)
            .count("records", r.records);
        m.k_trace = Some(vec![scfg.k_init]);
        m.write(&ctx.out_dir, &[run.dataset, kept_path, reports_path])?;
        return Ok(());
    }

    let t = args
        .iterations
        .unwrap_or_else(|| questions.len().div_ceil(scfg.batch_size).max(1));
    let hook = match &args.hook {
        Some(h) => Some(TrainerHook::parse(h).ok_or_else(|| ConfigError("empty --hook command".into()))?),
        None => None,
    };
    match run_online(&questions, t, &env, backend, &agent, &scfg, hook.as_ref(), &ctx.out_dir) {
        Ok(mut run) => {
            write_jsonl(&kept_path, kept(&run.sampled))?;
            let files: Vec<PathBuf> = run.reports.iter().map(|r| r.dataset.clone()).collect();
            relative(&mut run.reports, &ctx.out_dir);
            write_json(&reports_path, &run.reports)?;
            for r in &run.reports {
                println!(
                    "iteration {}: {} accepted of {} attempts, k {:.4} -> {:.4}",
                    r.iteration, r.accepted, r.attempted, r.k_before, r.k_after
                );
            }
            m.count("questions", questions.len())
                .count("iterations", run.reports.len())
                .count("attempted", run.reports.iter().map(|r| r.attempted).sum::<usize>())
                .count("accepted", run.reports.iter().map(|r| r.accepted).sum::<usize>())
                .count("records", run.reports.iter().map(|r| r.records).sum::<usize>());
            m.k_trace = Some(run.threshold.trace(scfg.k_init));
            let mut all = files;
            all.extend([ctx.out("threshold.json"), kept_path, reports_path]);
            m.write(&ctx.out_dir, &all)?;
            Ok(())
        }
        Err(MygoError::HookFailed {
            iteration,
            message,
            mut partial,
        }) => {
            relative(&mut partial, &ctx.out_dir);
            write_json(&reports_path, &partial)?;
            m.count("iterations", partial.len());
            m.k_trace = Some(std::iter::once(scfg.k_init).chain(partial.iter().map(|r| r.k_after)).collect());
            m.write(&ctx.out_dir, &[reports_path])?;
            Err(MygoError::HookFailed {
                iteration,
                message,
                partial,
            }
            .into())
        }
        Err(e) => Err(e.into()),
    }
}

pub fn warmup(ctx: &Ctx, trajectories: &Path, limit: usize) -> Result<()> {
    let ts: Vec<Trajectory> = read_jsonl(trajectories)?;
    let records = warmup_select(&ts, limit, ctx.seed);
    let path = ctx.out("warmup.jsonl");
    let n = emit_sft(&records, &path)?;
    println!("{n} warmup records from {} of {} trajectories", limit.min(ts.len()), ts.len());
    let mut m = ctx.manifest("warmup");
    m.count("trajectories", ts.len()).count("limit", limit).count("records", n);
    m.write(&ctx.out_dir, &[path])?;
    Ok(())
}

pub fn emit(ctx: &Ctx, trajectories: &Path, k: f64) -> Result<()> {
    let ts: Vec<Trajectory> = read_jsonl(trajectories)?;
    let records = select_all(&ts, k);
    let path = ctx.out("sft.jsonl");
    let n = emit_sft(&records, &path)?;
    println!("{n} records from {} trajectories above k={k}", ts.len());
    let mut m = ctx.manifest("emit-sft");
    m.count("trajectories", ts.len()).count("records", n);
    m.k_trace = Some(vec![k]);
    m.write(&ctx.out_dir, &[path])?;
    Ok(())
}

pub fn eval(ctx: &Ctx, pred: &Path, gold: &Path) -> Result<()> {
    let preds: Vec<serde_json::Value> = read_jsonl(pred)?;
    check_exists(gold)?;
    let dataset = read_dataset(BufReader::new(File::open(gold)?))?;
    let by_id: std::collections::HashMap<&str, &[String]> =
        dataset.iter().map(|q| (q.id.as_str(), q.gold_answers.as_slice())).collect();
    let mut scores = Vec::with_capacity(preds.len());
    for p in &preds {
        let id = p["_id"].as_str().ok_or_else(|| anyhow!("prediction without string `_id`: {p}"))?;
        let answer = p["prediction"].as_str().unwrap_or_default();
        let golds = by_id.get(id).ok_or_else(|| anyhow!("`{id}` is not in {}", gold.display()))?;
        scores.push(if answer.trim().is_empty() {
            ScorePair { em: 0, f1: 0.0 }
        } else {
            score_best(answer, golds)
        });
    }
    let (em, f1) = print_scores(&scores)?;
    let path = ctx.out("eval.json");
    write_json(&path, &serde_json::json!({"em": em, "f1": f1, "count": scores.len()}))?;
    let mut m = ctx.manifest("eval");
    m.count("predictions", scores.len()).count("em", em).count("f1", f1);
    m.write(&ctx.out_dir, &[path])?;
    Ok(())
}

pub fn verify(ctx: &Ctx, landscape: &Path, alphas: &[f64], k: f64, delta: Option<f64>) -> Result<()> {
    check_exists(landscape)?;
    let l = RewardLandscape::read(BufReader::new(File::open(landscape)?))?;
    let rows = report(&l, alphas, k)?;
    print!("{}", render_table(&rows));
    let mut thresholds = Vec::new();
    if let Some(d) = delta {
        for &a in alphas {
            let t = min_threshold_for_delta(&l, a, d)?;
            println!("alpha {a}: largest k with KL < {d} is {t:?}");
            thresholds.push(serde_json::json!({"alpha": a, "delta": d, "k": t}));
        }
    }
    let path = ctx.out("verify.json");
    write_json(&path, &serde_json::json!({"rows": rows, "thresholds": thresholds}))?;
    let mut m = ctx.manifest("verify");
    m.count("alphas", alphas.len()).count("atoms", l.atoms.len());
    m.write(&ctx.out_dir, &[path])?;
    Ok(())
}
