//! The `gliomanet` command line: `train`, `cv`, `eval`, `predict` and
//! `inspect`.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 data or
//! checkpoint error, 3 training diverged.

mod config;

pub use config::{ModelConfig, Overrides, Preset, RunConfig, DEFAULT_OUT};

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::data::{self, load_directory, split, ManifestRow, Sample};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::model::{checkpoint, summary, Manifest, Model};
use crate::tensor::{derive_seed, Rng};
use crate::train::{self, cross_validate, fit, write_history, FoldOutcome};

const SPLIT_STREAM: u64 = 10;
const VAL_STREAM: u64 = 11;
const AUGMENT_STREAM: u64 = 12;
const MODEL_STREAM: u64 = 13;

#[derive(Debug, Parser)]
#[command(name = "gliomanet", version, about = "Train, cross-validate and run a CNN MRI slice classifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split, train with a validation hold-out, and evaluate on the test set.
    Train(RunArgs),
    /// Split, select a model by k-fold cross-validation, and evaluate it on the test set.
    Cv(RunArgs),
    /// Print the metric report of a checkpoint on a labelled image directory.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data_root: Option<PathBuf>,
        /// Config file supplying the class map and excluded directories.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print `path,label,p0,p1` for each image.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Print the layer table and parameter count.
    Inspect {
        #[arg(long, required_unless_present = "paper_model", conflicts_with = "paper_model")]
        checkpoint: Option<PathBuf>,
        /// Describe the full-size 256x256 architecture instead of a checkpoint.
        #[arg(long)]
        paper_model: bool,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub data_root: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub retrain_full: bool,
    #[arg(long)]
    pub threads: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            data_root: self.data_root.clone(),
            out: self.out.clone(),
            k: self.k,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            retrain_full: self.retrain_full,
            threads: self.threads,
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Config(_) => 1,
        Error::Diverged { .. } => 3,
        _ => 2,
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, A>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                1
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match command {
        Command::Train(args) => cmd_train(&RunConfig::resolve(args.config.as_deref(), &args.overrides())?, out, err),
        Command::Cv(args) => cmd_cv(&RunConfig::resolve(args.config.as_deref(), &args.overrides())?, out, err),
        Command::Eval {
            checkpoint,
            data_root,
            config,
            threads,
        } => {
            let overrides = Overrides {
                data_root,
                threads,
                ..Overrides::default()
            };
            cmd_eval(&checkpoint, &RunConfig::resolve(config.as_deref(), &overrides)?, out, err)
        }
        Command::Predict { checkpoint, images } => cmd_predict(&checkpoint, &images, out),
        Command::Inspect {
            checkpoint,
            paper_model,
        } => cmd_inspect(checkpoint.as_deref(), paper_model, out),
    }
}

struct Loaded {
    samples: Vec<Sample>,
    skipped: usize,
    train: Vec<usize>,
    test: Vec<usize>,
}

fn load_and_split(config: &RunConfig, err: &mut dyn Write) -> Result<Loaded> {
    let arch = config.model.arch();
    let ds = load_directory(config.data_root()?, &config.layout(), arch.input_size, config.train.threads)?;
    for s in &ds.skipped {
        writeln!(err, "warning: skipped {}: {}", s.path.display(), s.reason)?;
    }
    let labels = data::labels(&ds.samples);
    let parts = split(&labels, config.test_fraction, &mut Rng::derive(config.train.seed, SPLIT_STREAM))?;
    Ok(Loaded {
        samples: ds.samples,
        skipped: ds.skipped.len(),
        train: parts.train,
        test: parts.test,
    })
}

fn relative(path: &Path, root: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).display().to_string()
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn save_checkpoint(model: &Model<f32>, dir: &Path, config: &RunConfig, report: &MetricReport) -> Result<()> {
    let mut manifest = Manifest::describe(model);
    manifest.hyperparameters = serde_json::to_value(config.canonical())?;
    manifest.metrics = serde_json::to_value(report)?;
    checkpoint::save_with(model, dir, &manifest)
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn prepare_run_dir(config: &RunConfig) -> Result<(String, PathBuf)> {
    let id = config.run_id();
    let dir = config.out_dir().join(&id);
    fs::create_dir_all(&dir)?;
    Ok((id, dir))
}

fn cmd_train(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let start = Instant::now();
    let arch = config.model.arch();
    let seed = config.train.seed;
    let loaded = load_and_split(config, err)?;
    let train_all = data::select(&loaded.samples, &loaded.train);
    let test = data::select(&loaded.samples, &loaded.test);
    let hold_out = split(&data::labels(&train_all), config.val_fraction, &mut Rng::derive(seed, VAL_STREAM))?;
    let fit_set = data::select(&train_all, &hold_out.train);
    let val = data::select(&train_all, &hold_out.test);
    let fit_set = if config.train.augment.is_identity() {
        fit_set
    } else {
        data::augment_set(&fit_set, &mut Rng::derive(seed, AUGMENT_STREAM), &config.train.augment)
    };

    let (run_id, dir) = prepare_run_dir(config)?;
    let mut model = Model::<f32>::build(&arch, derive_seed(seed, MODEL_STREAM))?;
    let outcome = fit(&mut model, &fit_set, &val, &config.train)?;
    let report = train::evaluate(&model, &test)?;

    save_checkpoint(&model, &dir.join("checkpoint"), config, &report)?;
    write_history(&dir.join("history.csv"), &outcome.history)?;
    let root = config.data_root()?;
    let mut rows = Vec::new();
    for (pos, &i) in loaded.train.iter().enumerate() {
        let split = if hold_out.test.binary_search(&pos).is_ok() { "val" } else { "train" };
        rows.push(manifest_row(&loaded.samples[i], root, split, None));
    }
    for &i in &loaded.test {
        rows.push(manifest_row(&loaded.samples[i], root, "test", None));
    }
    data::write_manifest(&dir.join("dataset.csv"), &rows)?;
    let best = outcome.best();
    write_json(
        &dir.join("report.json"),
        &json!({
            "command": "train",
            "run_id": run_id,
            "config": config.canonical(),
            "data": {
                "samples": loaded.samples.len(),
                "skipped": loaded.skipped,
                "train": fit_set.len(),
                "val": val.len(),
                "test": test.len(),
            },
            "epochs": outcome.history.len(),
            "best_epoch": outcome.best_epoch,
            "stop_reason": outcome.stop_reason,
            "val_loss": best.val_loss,
            "val_acc": best.val_acc,
            "test": report,
        }),
    )?;
    write_json(
        &dir.join("timing.json"),
        &json!({
            "finished_at": unix_now(),
            "total_seconds": start.elapsed().as_secs_f64(),
            "epoch_seconds": outcome.history.iter().map(|r| r.seconds).collect::<Vec<_>>(),
        }),
    )?;

    writeln!(out, "run {run_id} -> {}", dir.display())?;
    writeln!(
        out,
        "stopped after {} epochs ({}), best epoch {}: val_loss {:.4}, val_acc {:.4}",
        outcome.history.len(),
        outcome.stop_reason,
        outcome.best_epoch,
        best.val_loss,
        best.val_acc
    )?;
    writeln!(out)?;
    write!(out, "{}", table(&report, config))?;
    Ok(())
}

fn manifest_row(s: &Sample, root: &Path, split: &str, fold: Option<usize>) -> ManifestRow {
    ManifestRow {
        path: relative(&s.path, root),
        label: s.label,
        split: split.to_string(),
        fold,
    }
}

fn table(report: &MetricReport, config: &RunConfig) -> String {
    let [no, yes] = config.layout().class_names();
    report.table(&[no.as_str(), yes.as_str()])
}

fn cmd_cv(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let start = Instant::now();
    let arch = config.model.arch();
    let loaded = load_and_split(config, err)?;
    let train_set = data::select(&loaded.samples, &loaded.train);
    let test = data::select(&loaded.samples, &loaded.test);

    let (run_id, dir) = prepare_run_dir(config)?;
    let cv = cross_validate::<f32>(&train_set, &arch, &config.train)?;
    for fold in &cv.folds {
        let fold_dir = dir.join(format!("fold_{}", fold.fold));
        fs::create_dir_all(&fold_dir)?;
        write_history(&fold_dir.join("history.csv"), &fold.history)?;
    }
    let selected = cv.selected().clone();
    let folds: Vec<FoldOutcome> = cv.folds.clone();
    let fold_of = cv.plan.fold_of();
    let mut retrain_seconds = Vec::new();
    let model = if config.train.retrain_full {
        let (model, outcome) = train::retrain_full::<f32>(&train_set, &arch, &config.train, selected.best_epoch)?;
        let retrain_dir = dir.join("retrain");
        fs::create_dir_all(&retrain_dir)?;
        write_history(&retrain_dir.join("history.csv"), &outcome.history)?;
        retrain_seconds = outcome.history.iter().map(|r| r.seconds).collect();
        model
    } else {
        cv.into_selected_model()
    };
    let report = train::evaluate(&model, &test)?;
    save_checkpoint(&model, &dir.join("checkpoint"), config, &report)?;

    let root = config.data_root()?;
    let mut rows = Vec::new();
    for (pos, &i) in loaded.train.iter().enumerate() {
        rows.push(manifest_row(&loaded.samples[i], root, "train", fold_of.get(&pos).map(|f| f + 1)));
    }
    for &i in &loaded.test {
        rows.push(manifest_row(&loaded.samples[i], root, "test", None));
    }
    data::write_manifest(&dir.join("dataset.csv"), &rows)?;
    write_json(
        &dir.join("report.json"),
        &json!({
            "command": "cv",
            "run_id": run_id,
            "config": config.canonical(),
            "data": {
                "samples": loaded.samples.len(),
                "skipped": loaded.skipped,
                "train": train_set.len(),
                "test": test.len(),
            },
            "folds": folds,
            "selected_fold": selected.fold,
            "final_model": if config.train.retrain_full { "retrained_on_full_train_set" } else { "selected_fold" },
            "test": report,
        }),
    )?;
    write_json(
        &dir.join("timing.json"),
        &json!({
            "finished_at": unix_now(),
            "total_seconds": start.elapsed().as_secs_f64(),
            "fold_epoch_seconds": folds.iter().map(|f| f.history.iter().map(|r| r.seconds).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "retrain_epoch_seconds": retrain_seconds,
        }),
    )?;

    writeln!(out, "run {run_id} -> {}", dir.display())?;
    writeln!(out, "{:<6}{:>8}{:>12}{:>10}{:>10}{:>10}  stop", "fold", "epochs", "best epoch", "val loss", "val acc", "val f1")?;
    for f in &folds {
        let mark = if f.fold == selected.fold { " *" } else { "" };
        writeln!(
            out,
            "{:<6}{:>8}{:>12}{:>10.4}{:>10.4}{:>10.4}  {}{mark}",
            f.fold,
            f.history.len(),
            f.best_epoch,
            f.val_loss,
            f.val_acc,
            f.val_f1,
            f.stop_reason
        )?;
    }
    writeln!(out)?;
    writeln!(out, "test set ({} images):", test.len())?;
    write!(out, "{}", table(&report, config))?;
    Ok(())
}

fn cmd_eval(checkpoint_dir: &Path, config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let model = Model::<f32>::load(checkpoint_dir)?;
    let size = model.input_shape()[0];
    let ds = load_directory(config.data_root()?, &config.layout(), size, config.train.threads)?;
    for s in &ds.skipped {
        writeln!(err, "warning: skipped {}: {}", s.path.display(), s.reason)?;
    }
    let report = train::evaluate(&model, &ds.samples)?;
    writeln!(out, "{} images", ds.samples.len())?;
    write!(out, "{}", table(&report, config))?;
    Ok(())
}

fn cmd_predict(checkpoint_dir: &Path, images: &[PathBuf], out: &mut dyn Write) -> Result<()> {
    let model = Model::<f32>::load(checkpoint_dir)?;
    for path in images {
        let p = train::predict(&model, path)?;
        writeln!(out, "{},{},{:.6},{:.6}", path.display(), p.label, p.probs[0], p.probs[1])?;
    }
    Ok(())
}

fn cmd_inspect(checkpoint_dir: Option<&Path>, paper_model: bool, out: &mut dyn Write) -> Result<()> {
    let model = match checkpoint_dir {
        Some(dir) if !paper_model => Model::<f32>::load(dir)?,
        _ => Model::<f32>::paper(0)?,
    };
    write!(out, "{}", summary(&model))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(args, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::config("x")), 1);
        assert_eq!(exit_code(&Error::Diverged { epoch: 3 }), 3);
        assert_eq!(
            exit_code(&Error::Fold {
                fold: 2,
                source: Box::new(Error::Diverged { epoch: 1 })
            }),
            3
        );
        assert_eq!(exit_code(&Error::EmptyDataset("x".into())), 2);
        assert_eq!(exit_code(&Error::CorruptCheckpoint("x".into())), 2);
    }

    #[test]
    fn usage_errors_and_help() {
        let (code, _, err) = run_capture(&["gliomanet", "frobnicate"]);
        assert_eq!(code, 1);
        assert!(!err.is_empty());
        let (code, out, _) = run_capture(&["gliomanet", "--help"]);
        assert_eq!(code, 0);
        for cmd in ["train", "cv", "eval", "predict", "inspect"] {
            assert!(out.contains(cmd));
        }
        let (code, _, _) = run_capture(&["gliomanet", "inspect"]);
        assert_eq!(code, 1);
    }

    #[test]
    fn inspect_paper_model() {
        let (code, out, _) = run_capture(&["gliomanet", "inspect", "--paper-model"]);
        assert_eq!(code, 0);
        assert!(out.contains("254 x 254 x 16"));
        assert!(out.trim_end().ends_with("Total params: 2,393,458"));
    }
}
