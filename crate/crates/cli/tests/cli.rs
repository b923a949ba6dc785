use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mujica_core::fixtures;
use mujica_core::gateway::ScriptedRule;
use serde_json::{json, Value};

fn toy_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy")
}

fn script_jsonl(rules: &[ScriptedRule]) -> String {
    rules.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect()
}

/// Contents of every file under `data/toy`, derived from the core fixtures.
fn expected_toy_files() -> Vec<(&'static str, String)> {
    let kg = fixtures::toy_kg();
    let tsv: String = kg
        .triples()
        .iter()
        .map(|t| format!("{}\t{}\t{}\n", t.head, t.relation, t.tail))
        .collect();
    let kg_questions = json!([
        {"_id": "prw", "question": fixtures::POLISH_RUSSIAN_QUESTION, "answer": "Małgorzata Braunek",
         "topic_entities": [fixtures::POLISH_RUSSIAN_WAR]},
        {"_id": "films", "question": fixtures::FILMS_QUESTION, "answer": "The Mask Of Fu Manchu",
         "answer_aliases": ["The Mask of Fu Manchu"], "topic_entities": ["Blind Shaft", "The Mask Of Fu Manchu"]},
    ]);
    let mut kg_rules = fixtures::polish_russian_script();
    kg_rules.extend(fixtures::films_script());

    let corpus: String = fixtures::ten_passages()
        .passages()
        .iter()
        .map(|p| serde_json::to_string(p).unwrap() + "\n")
        .collect();
    let text_questions = json!([
        {"_id": "namibia", "question": fixtures::NAMIBIA_QUESTION, "answer": "Hifikepunye Pohamba"},
    ]);

    let coin_questions: Vec<Value> = (0..40)
        .map(|i| json!({"_id": format!("c{i:02}"), "question": format!("What is the capital of France? (variant {i})"), "answer": "Paris"}))
        .collect();
    let landscape = json!({"atoms": [[0.0, 40], [0.25, 12], [0.5, 6], [0.75, 3], [1.0, 1]]});

    vec![
        ("kg/kg.tsv", tsv),
        ("kg/questions.json", serde_json::to_string_pretty(&kg_questions).unwrap() + "\n"),
        ("kg/script.jsonl", script_jsonl(&kg_rules)),
        (
            "kg/config.toml",
            "seed = 7\nenv = \"kg\"\ndataset = \"questions.json\"\nkg = \"kg.tsv\"\n\n[backend]\nkind = \"scripted\"\nscript = \"script.jsonl\"\n\n[limits]\nmax_iterations = 4\n".into(),
        ),
        ("text/corpus.jsonl", corpus),
        ("text/questions.json", serde_json::to_string_pretty(&text_questions).unwrap() + "\n"),
        ("text/script.jsonl", script_jsonl(&fixtures::namibia_script())),
        (
            "text/config.toml",
            "seed = 7\nenv = \"text\"\ndataset = \"questions.json\"\ncorpus = \"corpus.jsonl\"\n\n[backend]\nkind = \"scripted\"\nscript = \"script.jsonl\"\n".into(),
        ),
        ("coin/questions.json", serde_json::to_string_pretty(&coin_questions).unwrap() + "\n"),
        ("coin/script.jsonl", script_jsonl(&fixtures::coin_flip_script(0.4, "Paris", "Lyon"))),
        (
            "coin/config.toml",
            "seed = 3\nenv = \"per-question\"\ndataset = \"questions.json\"\n\n[backend]\nkind = \"scripted\"\nscript = \"script.jsonl\"\n\n[sampler]\nbatch_size = 10\nmax_attempts = 8\nm = 2\n".into(),
        ),
        ("landscape.json", serde_json::to_string_pretty(&landscape).unwrap() + "\n"),
    ]
}

/// The shipped toy data must match the fixtures it was generated from.
/// Run with `MUJICA_WRITE_TOY=1` to regenerate it.
#[test]
fn toy_data_matches_fixtures() {
    let regenerate = std::env::var_os("MUJICA_WRITE_TOY").is_some();
    for (rel, content) in expected_toy_files() {
        let path = toy_dir().join(rel);
        if regenerate {
            fs::create_dir_all(path.parent().unwrap()).unwrap();
            fs::write(&path, &content).unwrap();
        }
        let on_disk = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(on_disk, content, "{rel} is stale");
    }
}

fn mujica(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mujica"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) -> String {
    let o = mujica(args, out);
    assert!(
        o.status.success(),
        "mujica {args:?} failed:\n{}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn failure(args: &[&str], out: &Path) -> Value {
    let o = mujica(args, out);
    assert!(!o.status.success(), "mujica {args:?} should fail");
    let stderr = String::from_utf8(o.stderr).unwrap();
    let last = stderr.lines().last().expect("error report on stderr");
    serde_json::from_str(last).unwrap_or_else(|e| panic!("not JSON ({e}): {stderr}"))
}

fn cfg(name: &str) -> String {
    toy_dir().join(name).join("config.toml").to_string_lossy().into_owned()
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

#[test]
fn qa_on_the_toy_graph_is_exact() {
    let out = tempfile::tempdir().unwrap();
    let stdout = ok(&["qa", "--config", &cfg("kg")], out.path());
    assert!(stdout.starts_with("EM 100.00  F1 100.00"), "{stdout}");
    let preds = fs::read_to_string(out.path().join("predictions.jsonl")).unwrap();
    let rows: Vec<Value> = preds.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["_id"], "prw");
    assert_eq!(rows[0]["iterations"], 2);
    assert_eq!(rows[1]["worker_calls"], 2);
    let m = read_json(out.path().join("qa.manifest.json"));
    assert_eq!(m["seed"], 7);
    assert_eq!(m["counts"]["questions"], 2);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn qa_on_text_corpus_and_index() {
    let out = tempfile::tempdir().unwrap();
    let stdout = ok(&["index", "--config", &cfg("text")], out.path());
    assert!(stdout.contains("indexed 10 passages"), "{stdout}");
    let m = read_json(out.path().join("index.manifest.json"));
    assert_eq!(m["counts"]["documents"], 10);
    let stdout = ok(&["qa", "--config", &cfg("text")], out.path());
    assert!(stdout.starts_with("EM 100.00"), "{stdout}");
}

#[test]
fn eval_reproduces_qa_scores() {
    let out = tempfile::tempdir().unwrap();
    let qa = ok(&["qa", "--config", &cfg("kg")], out.path());
    let pred = out.path().join("predictions.jsonl");
    let gold = toy_dir().join("kg/questions.json");
    let eval = ok(
        &["eval", "--pred", pred.to_str().unwrap(), "--gold", gold.to_str().unwrap()],
        out.path(),
    );
    assert_eq!(qa, eval);

    // A prediction for a question the gold file does not have.
    let stray = out.path().join("stray.jsonl");
    fs::write(&stray, "{\"_id\":\"nope\",\"prediction\":\"x\"}\n").unwrap();
    let err = failure(
        &["eval", "--pred", stray.to_str().unwrap(), "--gold", gold.to_str().unwrap()],
        out.path(),
    );
    assert!(err["message"].as_str().unwrap().contains("nope"));
}

#[test]
fn empty_dataset_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.json"), "[]").unwrap();
    let toy = toy_dir().join("kg");
    let config = format!(
        "env = \"kg\"\ndataset = \"empty.json\"\nkg = \"{}\"\n[backend]\nkind = \"scripted\"\nscript = \"{}\"\n",
        toy.join("kg.tsv").display(),
        toy.join("script.jsonl").display()
    );
    let path = dir.path().join("config.toml");
    fs::write(&path, config).unwrap();
    let err = failure(&["qa", "--config", path.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(err["error"], "empty_set");
}

#[test]
fn bad_config_reports_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.toml");
    fs::write(&path, "seed = 1\nunknown_key = true\n").unwrap();
    let err = failure(&["qa", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(err["error"], "config");

    fs::write(&path, "dataset = \"missing.json\"\n").unwrap();
    let err = failure(&["qa", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("missing.json"));

    let err = failure(&["qa"], dir.path());
    assert_eq!(err["error"], "config");
}

#[test]
fn offline_sampling_writes_artifacts() {
    let out = tempfile::tempdir().unwrap();
    let stdout = ok(&["sample", "--offline", "--config", &cfg("coin")], out.path());
    assert!(stdout.starts_with("offline:"), "{stdout}");
    for f in ["offline.jsonl", "kept.jsonl", "reports.json", "sample.manifest.json"] {
        assert!(out.path().join(f).exists(), "{f} missing");
    }
    let m = read_json(out.path().join("sample.manifest.json"));
    assert_eq!(m["k_trace"], json!([0.5]));
    let kept = fs::read_to_string(out.path().join("kept.jsonl")).unwrap();
    for line in kept.lines() {
        let t: Value = serde_json::from_str(line).unwrap();
        assert_eq!(t["final_answer"], "Paris");
    }
    let records = m["counts"]["records"].as_u64().unwrap();
    assert!(records > 0 && records <= 80, "{records}");
}

#[test]
fn online_sampling_traces_the_threshold() {
    let out = tempfile::tempdir().unwrap();
    ok(&["sample", "--k-init", "0", "--config", &cfg("coin")], out.path());
    let m = read_json(out.path().join("sample.manifest.json"));
    let trace: Vec<f64> = m["k_trace"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    // 40 questions in batches of 10, plus the initial value.
    assert_eq!(trace.len(), 5);
    assert_eq!(trace[0], 0.0);
    assert!(trace.windows(2).all(|w| w[1] >= w[0]), "{trace:?}");
    assert!(trace[4] > 0.0);
    let reports = read_json(out.path().join("reports.json"));
    assert_eq!(reports.as_array().unwrap().len(), 4);
    assert_eq!(reports[0]["dataset"], "batch_000.jsonl");
}

#[test]
fn failing_hook_keeps_partial_reports() {
    let out = tempfile::tempdir().unwrap();
    let err = failure(&["sample", "--hook", "false", "--config", &cfg("coin")], out.path());
    assert_eq!(err["error"], "hook_failed");
    let reports = read_json(out.path().join("reports.json"));
    assert_eq!(reports.as_array().unwrap().len(), 1);
}

#[test]
fn sft_and_warmup_from_trajectories() {
    let out = tempfile::tempdir().unwrap();
    ok(&["qa", "--config", &cfg("kg")], out.path());
    let traj = out.path().join("trajectories.jsonl");
    let traj = traj.to_str().unwrap();
    let stdout = ok(&["emit-sft", "--trajectories", traj, "--k", "0.5"], out.path());
    // Two planner records plus one per worker call (2 + 2).
    assert!(stdout.starts_with("6 records"), "{stdout}");
    let stdout = ok(&["emit-sft", "--trajectories", traj, "--k", "1"], out.path());
    assert!(stdout.starts_with("0 records"), "{stdout}");
    let stdout = ok(&["warmup", "--trajectories", traj, "--limit", "1"], out.path());
    // The limit counts trajectories; each toy trajectory yields one planner
    // record and two worker records.
    assert!(stdout.starts_with("3 warmup records"), "{stdout}");
    let m = read_json(out.path().join("warmup.manifest.json"));
    assert_eq!(m["counts"]["limit"], 1);
}

#[test]
fn verify_prints_decreasing_kl() {
    let out = tempfile::tempdir().unwrap();
    let landscape = toy_dir().join("landscape.json");
    let stdout = ok(
        &[
            "verify",
            "--landscape",
            landscape.to_str().unwrap(),
            "--alpha-grid",
            "2,1,0.5,0.25,0.1",
            "--k",
            "0.3",
            "--delta",
            "0.01",
        ],
        out.path(),
    );
    assert!(stdout.contains("alpha"), "{stdout}");
    let v = read_json(out.path().join("verify.json"));
    let kl: Vec<f64> = v["rows"].as_array().unwrap().iter().map(|r| r["kl"].as_f64().unwrap()).collect();
    assert_eq!(kl.len(), 5);
    assert!(kl.windows(2).all(|w| w[1] < w[0]), "{kl:?}");
    assert_eq!(v["thresholds"].as_array().unwrap().len(), 5);

    let err = failure(
        &["verify", "--landscape", landscape.to_str().unwrap(), "--alpha-grid=-1", "--k", "0.3"],
        out.path(),
    );
    assert_eq!(err["error"], "theory");
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for out in [a.path(), b.path()] {
        ok(&["qa", "--config", &cfg("kg")], out);
        ok(&["sample", "--k-init", "0", "--config", &cfg("coin")], out);
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 10);
    for n in names {
        let x = fs::read(a.path().join(&n)).unwrap();
        let y = fs::read(b.path().join(&n)).unwrap();
        assert!(x == y, "{n:?} differs between runs");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let out = tempfile::tempdir().unwrap();
    ok(&["qa", "--seed", "99", "--config", &cfg("kg")], out.path());
    let m = read_json(out.path().join("qa.manifest.json"));
    assert_eq!(m["seed"], 99);
}
