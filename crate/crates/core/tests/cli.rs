use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synoie"))
        .args(args)
        .env_remove("SMILE_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn worked_example_dot_has_nine_const_edges() {
    let fig = data("figure1.jsonl");
    let o = run(&["build-graphs", "--corpus", p(&fig), "--view", "const", "--format", "dot"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.contains(" -- ")).count(), 9);
    assert!(out.contains("n4 -- n9 [label=\"S\"];"));
}

#[test]
fn dep_view_writes_n_minus_one_edges_per_sentence() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = data("synthetic.jsonl");
    let o = run(&["build-graphs", "--corpus", p(&corpus), "--view", "dep", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 50);
    for f in files {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&f).unwrap()).unwrap();
        let n = v["nodes"].as_array().unwrap().len();
        assert_eq!(v["edges"].as_array().unwrap().len(), n - 1, "{}", f.display());
    }
}

#[test]
fn usage_errors_exit_with_one() {
    let fig = data("figure1.jsonl");
    let bad_format = run(&["build-graphs", "--corpus", p(&fig), "--format", "xml"]);
    assert_eq!(bad_format.status.code(), Some(1));
    assert!(stderr(&bad_format).contains("xml"));
    assert_eq!(run(&["build-graphs", "--corpus", p(&fig), "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let gold = data("scorer/gold.jsonl");
    let mode = run(&["score", "--pred", p(&gold), "--gold", p(&gold), "--mode", "fuzzy"]);
    assert_eq!(mode.status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_with_two() {
    let missing = run(&["build-graphs", "--corpus", "/nonexistent/corpus.jsonl"]);
    assert_eq!(missing.status.code(), Some(2));
    let pred = data("scorer/pred.jsonl");
    let other = data("figure1.jsonl");
    let unaligned = run(&["score", "--pred", p(&pred), "--gold", p(&other)]);
    assert_eq!(unaligned.status.code(), Some(2));
    assert!(stderr(&unaligned).contains("ids differ"));
}

#[test]
fn score_reports_fixture_values() {
    let (pred, gold) = (data("scorer/pred.jsonl"), data("scorer/gold.jsonl"));
    let o = run(&["score", "--pred", p(&pred), "--gold", p(&gold), "--mode", "exact", "--report", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["f1"].as_f64().unwrap() - 0.56).abs() < 1e-12);
    assert!((v["auc"].as_f64().unwrap() - 181.0 / 455.0).abs() < 1e-12);
}

#[test]
fn gradcheck_passes_by_default() {
    let o = run(&["gradcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let err: f64 = stdout(&o).split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!(err < 1e-4);
}

#[test]
fn train_extract_score_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = data("synthetic.jsonl");
    let config = data("train.toml");
    let ckpt = dir.path().join("m.json");
    let ckpt2 = dir.path().join("m2.json");
    let pred = dir.path().join("pred.jsonl");
    let common = ["--corpus", p(&corpus), "--config", p(&config), "--epochs", "4", "--d-h", "12", "--quiet"];

    let mut a = common.to_vec();
    a.extend(["--out-ckpt", p(&ckpt), "--workers", "2"]);
    assert_eq!(run(&[&["train"], a.as_slice()].concat()).status.code(), Some(0));

    let with_env = Command::new(env!("CARGO_BIN_EXE_synoie"))
        .args([&["train"], common.as_slice(), &["--out-ckpt", p(&ckpt2)]].concat())
        .env("SMILE_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(with_env.status.code(), Some(0));
    let load = |path: &Path| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
    };
    let (stored, env_run) = (load(&ckpt), load(&ckpt2));
    assert_eq!(stored["tensors"], env_run["tensors"]);
    assert_eq!(stored["history"], env_run["history"]);
    assert_eq!(env_run["config"]["seed"], 42);
    assert_eq!(stored["config"]["epochs"], 4);
    assert_eq!(stored["config"]["d_h"], 12);
    assert_eq!(stored["format"], "synoie-checkpoint");

    let o = run(&["extract", "--ckpt", p(&ckpt), "--corpus", p(&corpus), "--out", p(&pred)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&pred).unwrap().lines().count(), 50);
    let o = run(&["score", "--pred", p(&pred), "--gold", p(&corpus), "--report", "text"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("P "));
}

#[test]
fn seed_sources_take_precedence_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = data("figure1.jsonl");
    let args = |out: &Path| {
        vec![
            "train".to_string(),
            "--corpus".into(),
            p(&corpus).into(),
            "--epochs".into(),
            "1".into(),
            "--d-h".into(),
            "4".into(),
            "--d-l".into(),
            "2".into(),
            "--quiet".into(),
            "--out-ckpt".into(),
            p(out).into(),
        ]
    };
    let seed_of = |path: &Path| -> u64 {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        v["config"]["seed"].as_u64().unwrap()
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let env_only = Command::new(env!("CARGO_BIN_EXE_synoie")).args(args(&a)).env("SMILE_SEED", "9").output().unwrap();
    assert!(env_only.status.success());
    assert_eq!(seed_of(&a), 9);
    let mut flagged = args(&b);
    flagged.extend(["--seed".into(), "3".into()]);
    let both = Command::new(env!("CARGO_BIN_EXE_synoie")).args(flagged).env("SMILE_SEED", "9").output().unwrap();
    assert!(both.status.success());
    assert_eq!(seed_of(&b), 3);
}

#[test]
fn unknown_config_keys_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "epochs = 1\nlearning_rate = 0.1\n").unwrap();
    let corpus = data("figure1.jsonl");
    let out = dir.path().join("m.json");
    let o = run(&["train", "--corpus", p(&corpus), "--config", p(&cfg), "--out-ckpt", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("learning_rate"));
}

#[test]
fn ablate_emits_eight_rows() {
    let corpus = data("synthetic.jsonl");
    let o = run(&["ablate", "--corpus", p(&corpus), "--epochs", "2", "--d-h", "8", "--d-l", "4", "--grid", "table"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 9);
    assert!(out.lines().next().unwrap().starts_with("setting"));
    assert!(out.contains("w/o GCN - w/o R3"));
}
