mod common;

use std::fs;
use std::path::{Path, PathBuf};

use gliomanet::cli;
use tempfile::TempDir;

const FAST: &str = r#"{"model": "reduced", "train": {"max_epochs": 2, "batch_size": 8}}"#;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["gliomanet"];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new(positives: usize, negatives: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        common::synthetic_tree(&dir.path().join("data"), positives, negatives, 32, 1);
        let ws = Workspace { dir };
        ws.config("config.json", FAST);
        ws
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn p(&self, rel: &str) -> String {
        self.path(rel).to_str().unwrap().to_string()
    }

    fn config(&self, name: &str, text: &str) -> String {
        fs::write(self.path(name), text).unwrap();
        self.p(name)
    }

    fn command(&self, cmd: &str, config: &str, out: &str, extra: &[&str]) -> (i32, String, String) {
        let (data, out) = (self.p("data"), self.p(out));
        let mut args = vec![cmd, "--config", config, "--data-root", &data, "--out", &out];
        args.extend_from_slice(extra);
        run(&args)
    }
}

fn run_dir(out: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs[0].clone()
}

#[test]
fn train_writes_a_loadable_checkpoint_and_report() {
    let ws = Workspace::new(10, 10);
    let (code, out, err) = ws.command("train", &ws.p("config.json"), "runs", &["--seed", "3"]);
    assert_eq!(code, 0, "{err}");
    let dir = run_dir(&ws.path("runs"));
    assert!(dir.file_name().unwrap().to_str().unwrap().starts_with("seed3-"));
    for file in ["checkpoint/manifest.json", "history.csv", "dataset.csv", "report.json", "timing.json"] {
        assert!(dir.join(file).is_file(), "missing {file}");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["command"], "train");
    assert!(out.contains("avg / total"), "{out}");

    let checkpoint = dir.join("checkpoint");
    let (code, out, err) = run(&["eval", "--checkpoint", checkpoint.to_str().unwrap(), "--data-root", &ws.p("data")]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("20 images"), "{out}");

    let image = ws.path("data/yes/0000.png");
    let (code, out, err) = run(&["predict", "--checkpoint", checkpoint.to_str().unwrap(), image.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 1);
    let fields: Vec<&str> = lines[0].split(',').collect();
    assert_eq!(fields.len(), 4);
    let p: f64 = fields[2].parse::<f64>().unwrap() + fields[3].parse::<f64>().unwrap();
    assert!((p - 1.0).abs() < 2e-6, "{out}");

    let (code, out, _) = run(&["inspect", "--checkpoint", checkpoint.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("32 x 32"), "{out}");
}

#[test]
fn cv_writes_one_history_per_fold() {
    let ws = Workspace::new(12, 12);
    let (code, out, err) = ws.command("cv", &ws.p("config.json"), "runs", &["--k", "3", "--retrain-full"]);
    assert_eq!(code, 0, "{err}");
    let dir = run_dir(&ws.path("runs"));
    for fold in 1..=3 {
        let history = fs::read_to_string(dir.join(format!("fold_{fold}/history.csv"))).unwrap();
        assert_eq!(history.lines().count(), 3, "header plus two epochs: {history}");
    }
    assert!(dir.join("retrain/history.csv").is_file());
    assert!(!dir.join("fold_4").exists());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 3);
    assert!(out.contains("test set"), "{out}");
}

#[test]
fn thread_count_does_not_change_the_report() {
    let ws = Workspace::new(9, 9);
    let mut reports = Vec::new();
    for (out, threads) in [("one", "1"), ("three", "3")] {
        let (code, _, err) = ws.command("cv", &ws.p("config.json"), out, &["--threads", threads]);
        assert_eq!(code, 0, "{err}");
        reports.push(fs::read(run_dir(&ws.path(out)).join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn missing_data_root_is_a_data_error() {
    let ws = Workspace::new(2, 2);
    let (code, _, err) = run(&["train", "--config", &ws.p("config.json"), "--data-root", &ws.p("nowhere")]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("nowhere"), "{err}");
}

#[test]
fn unknown_config_key_is_named() {
    let ws = Workspace::new(2, 2);
    let config = ws.config("bad.json", r#"{"train": {"learning_rate": 0.1}}"#);
    let (code, _, err) = ws.command("train", &config, "runs", &[]);
    assert_eq!(code, 1);
    assert!(err.contains("learning_rate"), "{err}");
    assert!(!ws.path("runs").exists());
}

#[test]
fn fewer_samples_than_folds() {
    let ws = Workspace::new(2, 2);
    let (code, _, err) = ws.command("cv", &ws.p("config.json"), "runs", &["--k", "5"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn eval_without_readable_images() {
    let ws = Workspace::new(6, 6);
    let (code, _, err) = ws.command("train", &ws.p("config.json"), "runs", &[]);
    assert_eq!(code, 0, "{err}");
    let checkpoint = run_dir(&ws.path("runs")).join("checkpoint");
    let empty = ws.path("empty");
    for class in ["yes", "no"] {
        fs::create_dir_all(empty.join(class)).unwrap();
        fs::write(empty.join(class).join("broken.png"), b"not a png").unwrap();
    }
    let (code, _, err) = run(&["eval", "--checkpoint", checkpoint.to_str().unwrap(), "--data-root", empty.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("broken.png"), "{err}");
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let ws = Workspace::new(6, 6);
    let (code, _, err) = ws.command("train", &ws.p("config.json"), "runs", &[]);
    assert_eq!(code, 0, "{err}");
    let checkpoint = run_dir(&ws.path("runs")).join("checkpoint");
    let weights = fs::read_dir(checkpoint.join("weights")).unwrap().next().unwrap().unwrap().path();
    let bytes = fs::read(&weights).unwrap();
    fs::write(&weights, &bytes[..bytes.len() - 4]).unwrap();
    let image = ws.path("data/no/0000.png");
    let (code, _, err) = run(&["predict", "--checkpoint", checkpoint.to_str().unwrap(), image.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn divergence_exits_with_three() {
    let ws = Workspace::new(6, 6);
    let config = ws.config(
        "diverge.json",
        r#"{"model": "reduced", "train": {"max_epochs": 5, "optimizer": {"kind": "sgd"},
            "schedule": {"kind": "constant", "initial": 1e300}}}"#,
    );
    let (code, _, err) = ws.command("train", &config, "runs", &[]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("diverged"), "{err}");
}

#[test]
fn usage_errors() {
    assert_eq!(run(&[]).0, 1);
    assert_eq!(run(&["fly"]).0, 1);
    assert_eq!(run(&["train", "--bogus"]).0, 1);
    assert_eq!(run(&["predict", "--checkpoint", "x"]).0, 1);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    for cmd in ["train", "cv", "eval", "predict", "inspect"] {
        assert!(out.contains(cmd), "{out}");
    }
}
