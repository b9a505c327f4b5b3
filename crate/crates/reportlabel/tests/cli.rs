//! The `reportlabel` binary end to end on a small generated corpus.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use reportlabel::csv_io::{load_reports_csv, write_reports_csv};
use reportlabel_core::corpus::Provenance;
use reportlabel_core::synthetic::{generate, vocab, SyntheticConfig};

const TRAIN_TOML: &str = r#"
out = "run"

[strategy]
kind = "rad"
rad_data = "rad.csv"

[encoder]
vocab = "vocab.txt"
preset = "tiny"
hidden_size = 16
num_heads = 2
intermediate_size = 32
max_tokens = 32

[hyper]
learning_rate = 1e-3
batch_size = 4
max_epochs = 1
eval_every = 0
patience = 0
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reportlabel"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// `rad.csv` (24 labeled reports), `vocab.txt` and `train.toml`.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate(&SyntheticConfig { n_items: 24, seed: 3, ..Default::default() }, "c");
    write_reports_csv(&ds, &dir.path().join("rad.csv")).unwrap();
    fs::write(dir.path().join("vocab.txt"), vocab().to_text()).unwrap();
    fs::write(dir.path().join("train.toml"), TRAIN_TOML).unwrap();
    dir
}

fn rows(path: &Path) -> usize {
    load_reports_csv(path, Provenance::Expert).unwrap().dataset.len()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_succeeds_and_bad_usage_is_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run(dir.path(), &["--help"]));
    assert_eq!(run(dir.path(), &[]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["train", "--no-such-flag"]).status.code(), Some(1));
}

#[test]
fn missing_training_data_names_the_setting() {
    let dir = workspace();
    let out = run(dir.path(), &["train", "--config", "train.toml", "--set", "strategy.rad_data=''"]);
    assert_eq!(out.status.code(), Some(1));
    let dir2 = tempfile::tempdir().unwrap();
    fs::write(dir2.path().join("t.toml"), "[strategy]\nkind = \"rad\"\n").unwrap();
    let out = run(dir2.path(), &["train", "--config", "t.toml", "--out", "run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strategy.rad_data"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = workspace();
    let out = run(dir.path(), &["train", "--config", "train.toml", "--set", "hyper.learning_rat=0.1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rat"));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn train_label_evaluate_compare() {
    let dir = workspace();
    let p = dir.path();
    ok(&run(p, &["train", "--config", "train.toml", "-q"]));
    for f in ["config.toml", "history.jsonl", "summary.json", "checkpoint/manifest.json"] {
        assert!(p.join("run").join(f).exists(), "{f}");
    }

    // Hybrid from a checkpoint trains the rad phase only.
    ok(&run(
        p,
        &[
            "train",
            "--config",
            "train.toml",
            "-q",
            "--out",
            "hybrid",
            "--set",
            "strategy.kind=hybrid",
            "--set",
            "strategy.init_checkpoint=run/checkpoint",
        ],
    ));
    let history = fs::read_to_string(p.join("hybrid/history.jsonl")).unwrap();
    assert!(!history.is_empty());
    assert!(history.lines().all(|l| l.contains("\"phase\":\"rad\"")), "{history}");
    assert!(!p.join("hybrid/auto_checkpoint").exists());
    assert!(json(&p.join("hybrid/summary.json"))["auto_phase"].is_null());

    ok(&run(p, &["label", "--checkpoint", "run/checkpoint", "--reports", "rad.csv", "--out", "pred.csv"]));
    assert_eq!(rows(&p.join("pred.csv")), 24);
    let first = fs::read(p.join("pred.csv")).unwrap();
    ok(&run(p, &["label", "--checkpoint", "run/checkpoint", "--reports", "rad.csv", "--out", "pred.csv"]));
    assert_eq!(fs::read(p.join("pred.csv")).unwrap(), first, "relabeling changed the output");

    fs::write(p.join("empty.csv"), "report_id,patient_id,text\n").unwrap();
    ok(&run(p, &["label", "--checkpoint", "run/checkpoint", "--reports", "empty.csv", "--out", "none.csv"]));
    let none = fs::read_to_string(p.join("none.csv")).unwrap();
    assert_eq!(none.lines().count(), 1, "{none}");

    let bootstrap = ["--set", "bootstrap.n_bootstrap=200"];
    let mut args = vec!["evaluate", "--gold", "rad.csv", "--pred", "rad.csv", "--out", "eval"];
    args.extend(bootstrap);
    ok(&run(p, &args));
    let eval = json(&p.join("eval/evaluation.json"));
    assert_eq!(eval["evaluation"]["macro_f1"], 1.0);
    assert!(fs::read_to_string(p.join("eval/table.csv")).unwrap().contains("Average"));

    let mut args = vec!["compare", "--gold", "rad.csv", "--pred-a", "pred.csv", "--pred-b", "pred.csv", "--out", "cmp"];
    args.extend(bootstrap);
    ok(&run(p, &args));
    let cmp = json(&p.join("cmp/comparison.json"));
    assert_eq!(cmp["comparison"]["mean_diff"], 0.0);
    assert_eq!(cmp["comparison"]["correct_count_diffs"]["total"], 0);

    let mut args = vec!["compare", "--gold", "rad.csv", "--pred-a", "rad.csv", "--pred-b", "pred.csv", "--out", "cmp2"];
    args.extend(bootstrap);
    ok(&run(p, &args));
    assert!(json(&p.join("cmp2/comparison.json"))["comparison"]["mean_diff"].as_f64().unwrap() >= 0.0);
}

#[test]
fn augment_and_prevalence() {
    let dir = workspace();
    let p = dir.path();
    ok(&run(p, &["augment", "--input", "rad.csv", "--out", "aug.csv", "--set", "translation.client=identity"]));
    assert_eq!(rows(&p.join("aug.csv")), 48);
    ok(&run(
        p,
        &["augment", "--input", "rad.csv", "--out", "aug_split.csv", "--set", "train_fraction=0.75", "--seed", "4"],
    ));
    assert_eq!(rows(&p.join("aug_split.csv")), 24 + 18);
    ok(&run(
        p,
        &["augment", "--input", "rad.csv", "--out", "aug_dev.csv", "--set", "train_fraction=0.75", "--augment-dev"],
    ));
    assert_eq!(rows(&p.join("aug_dev.csv")), 48);

    ok(&run(p, &["prevalence", "--input", "rad.csv", "--out", "prev.csv"]));
    let prev = fs::read_to_string(p.join("prev.csv")).unwrap();
    assert_eq!(prev.lines().next(), Some("condition,class,count,fraction"));
    assert_eq!(prev.lines().count(), 1 + 14 * 4);
}

#[test]
fn malformed_input_is_a_user_error() {
    let dir = workspace();
    let p = dir.path();
    let mut text = fs::read_to_string(p.join("rad.csv")).unwrap();
    text = text.replacen(",0.0,", ",maybe,", 1);
    fs::write(p.join("bad.csv"), text).unwrap();
    let out = run(p, &["prevalence", "--input", "bad.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row"));
}
