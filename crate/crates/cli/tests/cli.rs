use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use compgen::decoding::{read_run, write_run, DecodeMode, GenerationRecord};
use compgen::extraction::read_dataset;
use compgen::metrics::references_by_item;
use tempfile::TempDir;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn compgen(out: &Path, args: &[&str]) -> Output {
    let config = fixtures().join("config.toml");
    Command::new(env!("CARGO_BIN_EXE_compgen"))
        .arg("--config")
        .arg(&config)
        .arg("--output-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("spawn compgen")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn trained() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    for step in ["build-dataset", "train"] {
        let o = compgen(dir.path(), &[step]);
        assert!(o.status.success(), "{step}: {}", stderr(&o));
    }
    dir
}

fn dataset_keys(dir: &Path) -> BTreeSet<(String, String)> {
    read_dataset(dir.join("dataset.jsonl"), "x")
        .unwrap()
        .iter()
        .map(|(_, r)| (r.review_id.clone(), r.text.clone()))
        .collect()
}

#[test]
fn build_dataset_writes_dataset_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let o = compgen(dir.path(), &["build-dataset"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["dataset.jsonl", "stats.json", "stats.txt", "classifier.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("#Items"));
}

#[test]
fn stricter_threshold_gives_a_subset() {
    let strict = tempfile::tempdir().unwrap();
    let loose = tempfile::tempdir().unwrap();
    assert!(compgen(strict.path(), &["build-dataset", "--threshold", "0.9"]).status.success());
    assert!(compgen(loose.path(), &["build-dataset", "--threshold", "0.5"]).status.success());
    let (s, l) = (dataset_keys(strict.path()), dataset_keys(loose.path()));
    assert!(!s.is_empty());
    assert!(s.is_subset(&l));
}

#[test]
fn missing_input_is_a_config_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[paths]\nreviews = \"nowhere.jsonl\"\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_compgen"))
        .args(["--config", cfg.to_str().unwrap(), "build-dataset"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nowhere.jsonl"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(compgen(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(compgen(dir.path(), &["generate", "--mode", "beam"]).status.code(), Some(1));
}

#[test]
fn train_without_comparatives_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("reviews.jsonl"),
        "{\"reviewText\":\"I like it. Nice strap.\",\"asin\":\"A1\",\"reviewerID\":\"u\",\"overall\":5}\n",
    )
    .unwrap();
    let cfg = dir.path().join("c.toml");
    let labeled = fixtures().join("labeled_sentences.jsonl");
    fs::write(&cfg, format!("[paths]\nreviews = \"reviews.jsonl\"\nlabeled = {:?}\noutput_dir = \"out\"\n", labeled.to_str().unwrap())).unwrap();
    let run = |cmd: &str| Command::new(env!("CARGO_BIN_EXE_compgen")).args(["--config", cfg.to_str().unwrap(), cmd]).output().unwrap();
    assert_eq!(run("build-dataset").status.code(), Some(0));
    let o = run("train");
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn commands_before_their_inputs_exist_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(compgen(dir.path(), &["train"]).status.code(), Some(2));
    assert_eq!(compgen(dir.path(), &["generate"]).status.code(), Some(2));
}

#[test]
fn generation_and_evaluation_round_trip() {
    let dir = trained();
    let out = dir.path();

    let o = compgen(out, &["generate", "--item", "B00INST003", "--trace"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = read_run(out.join("generations.jsonl")).unwrap();
    assert_eq!(run.len(), 1);
    assert!(run[0].trace.as_ref().is_some_and(|t| t.len() == run[0].tokens.len()));
    // The default source review is the item's lowest review id.
    let reviews = fs::read_to_string(fixtures().join("reviews.jsonl")).unwrap();
    let first = reviews.lines().find(|l| l.contains("\"B00INST003\"")).unwrap();
    let first: serde_json::Value = serde_json::from_str(first).unwrap();
    assert_eq!(run[0].prompt, first["reviewText"].as_str().unwrap());

    assert_eq!(compgen(out, &["generate", "--item", "NOPE"]).status.code(), Some(1));

    assert_eq!(compgen(out, &["evaluate", "--run", "missing.jsonl"]).status.code(), Some(2));
    let o = compgen(out, &["evaluate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let keys: BTreeSet<&str> = report.as_object().unwrap().keys().map(String::as_str).collect();
    for k in ["d1", "d2", "bleu1", "bleu2", "rouge_l_p", "pct_comparative", "pct_aspect"] {
        assert!(keys.contains(k), "{k}");
    }
}

#[test]
fn zero_weights_match_greedy() {
    let dir = trained();
    let out = dir.path();
    let g = out.join("greedy.jsonl");
    let a = out.join("agg.jsonl");
    assert!(compgen(out, &["generate", "--mode", "greedy", "--out", g.to_str().unwrap()]).status.success());
    let k = "100000";
    assert!(compgen(out, &["generate", "--mode", "agg", "--alpha", "0", "--beta", "0", "-k", k, "--out", a.to_str().unwrap()])
        .status
        .success());
    let texts = |p: &Path| read_run(p).unwrap().into_iter().map(|r| r.text).collect::<Vec<_>>();
    assert_eq!(texts(&g), texts(&a));
}

#[test]
fn seeded_stochastic_reruns_are_identical() {
    let dir = trained();
    let out = dir.path();
    let paths = [out.join("s1.jsonl"), out.join("s2.jsonl")];
    for p in &paths {
        let o = compgen(out, &["--seed", "5", "generate", "--mode", "stochastic", "--out", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(&paths[0]).unwrap(), fs::read(&paths[1]).unwrap());
    assert_eq!(read_run(&paths[0]).unwrap()[0].config.mode, DecodeMode::Stochastic);
}

#[test]
fn self_evaluation_scores_one() {
    let dir = trained();
    let out = dir.path();
    let ds = read_dataset(out.join("dataset.jsonl"), "x").unwrap();
    let run: Vec<GenerationRecord> = references_by_item(&ds)
        .values()
        .map(|r| GenerationRecord {
            item_id: r.item_id.clone(),
            prompt: r.text.clone(),
            aspects: Vec::new(),
            config: Default::default(),
            tokens: r.tokens.clone(),
            text: r.text.clone(),
            trace: None,
        })
        .collect();
    let path = out.join("refs.jsonl");
    write_run(&path, &run).unwrap();
    assert!(compgen(out, &["evaluate", "--run", path.to_str().unwrap()]).status.success());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    for k in ["bleu1", "bleu2", "rouge_l_p"] {
        assert_eq!(report[k].as_f64(), Some(1.0), "{k}");
    }
}

#[test]
fn sweep_writes_one_row_per_valid_cell() {
    let dir = trained();
    let o = compgen(dir.path(), &["sweep"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "alpha,beta,k,D-1,D-2,B-1,B-2,RL-P,% Comp.,% Asp.,n");
    // 3 x 3 grid; the largest cell has alpha + beta = 0.8.
    assert_eq!(lines.count(), 9);
}

#[test]
fn output_dir_env_var_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_compgen"))
        .args(["--config", fixtures().join("config.toml").to_str().unwrap(), "build-dataset"])
        .env("COMPGEN_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("dataset.jsonl").is_file());
}
