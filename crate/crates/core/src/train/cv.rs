use serde::{Deserialize, Serialize};

use super::{evaluate, fit, loss_and_accuracy, EpochRecord, FitOutcome, StopReason, TrainConfig};
use crate::data::{self, augment_set, kfold, stratified_kfold, FoldPlan, Sample};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::model::{ArchConfig, Model};
use crate::tensor::{derive_seed, Rng, Scalar};

const FOLD_PLAN_STREAM: u64 = 1;
const MODEL_STREAM: u64 = 100;
const FIT_STREAM: u64 = 200;
const AUGMENT_STREAM: u64 = 300;
const RETRAIN_STREAM: u64 = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    /// 1-based.
    pub fold: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub best_epoch: usize,
    pub stop_reason: StopReason,
    /// Validation loss and accuracy of the kept weights.
    pub val_loss: f64,
    pub val_acc: f64,
    /// Support-weighted F1 over both classes, the selection metric.
    pub val_f1: f64,
    pub val_report: MetricReport,
    #[serde(skip)]
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone)]
pub struct CvResult<T: Scalar> {
    pub plan: FoldPlan,
    pub folds: Vec<FoldOutcome>,
    /// 1-based number of the selected fold.
    pub selected_fold: usize,
    /// One trained model per fold, in fold order.
    pub models: Vec<Model<T>>,
}

impl<T: Scalar> CvResult<T> {
    pub fn selected(&self) -> &FoldOutcome {
        &self.folds[self.selected_fold - 1]
    }

    pub fn selected_model(&self) -> &Model<T> {
        &self.models[self.selected_fold - 1]
    }

    pub fn into_selected_model(mut self) -> Model<T> {
        self.models.swap_remove(self.selected_fold - 1)
    }
}

/// Index of the best fold by `(f1, loss)`: highest F1, then lowest loss,
/// then the earliest fold.
pub fn select_best(scores: &[(f64, f64)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &(f1, loss)) in scores.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let (bf1, bloss) = scores[b];
                f1 > bf1 || (f1 == bf1 && loss < bloss)
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

fn train_fold<T: Scalar>(
    samples: &[Sample],
    plan: &FoldPlan,
    fold: usize,
    arch: &ArchConfig,
    config: &TrainConfig,
) -> Result<(FoldOutcome, Model<T>)> {
    let train_idx = plan.training(fold);
    let train = data::select(samples, &train_idx);
    let val = data::select(samples, plan.validation(fold));
    let train = if config.augment.is_identity() {
        train
    } else {
        augment_set(&train, &mut Rng::derive(config.seed, AUGMENT_STREAM + fold as u64), &config.augment)
    };
    let mut model = Model::<T>::build(arch, derive_seed(config.seed, MODEL_STREAM + fold as u64))?;
    let fold_config = TrainConfig {
        seed: derive_seed(config.seed, FIT_STREAM + fold as u64),
        ..config.clone()
    };
    let out: FitOutcome = fit(&mut model, &train, &val, &fold_config)?;
    let (val_loss, val_acc) = loss_and_accuracy(&model, &val)?;
    let report = evaluate(&model, &val)?;
    Ok((
        FoldOutcome {
            fold: fold + 1,
            train_size: train.len(),
            val_size: val.len(),
            best_epoch: out.best_epoch,
            stop_reason: out.stop_reason,
            val_loss,
            val_acc,
            val_f1: report.weighted_avg.f1,
            val_report: report,
            history: out.history,
        },
        model,
    ))
}

/// Trains one freshly initialized model per fold on the other folds and
/// validates it on the held-out fold, then selects the best fold. With
/// `config.threads > 1` up to that many folds train concurrently; every fold
/// is seeded independently, so the result does not depend on the thread
/// count.
pub fn cross_validate<T: Scalar>(samples: &[Sample], arch: &ArchConfig, config: &TrainConfig) -> Result<CvResult<T>> {
    config.validate()?;
    let indices: Vec<usize> = (0..samples.len()).collect();
    let mut rng = Rng::derive(config.seed, FOLD_PLAN_STREAM);
    let plan = if config.stratified_folds {
        stratified_kfold(&indices, &data::labels(samples), config.k, &mut rng)?
    } else {
        kfold(&indices, config.k, &mut rng)?
    };
    let run = |fold: usize| {
        train_fold::<T>(samples, &plan, fold, arch, config).map_err(|e| Error::Fold {
            fold: fold + 1,
            source: Box::new(e),
        })
    };
    let results: Vec<Result<(FoldOutcome, Model<T>)>> = if config.threads > 1 {
        let folds: Vec<usize> = (0..config.k).collect();
        let mut out = Vec::with_capacity(config.k);
        for group in folds.chunks(config.threads) {
            std::thread::scope(|s| {
                let handles: Vec<_> = group.iter().map(|&f| s.spawn(move || run(f))).collect();
                out.extend(handles.into_iter().map(|h| h.join().expect("fold thread panicked")));
            });
        }
        out
    } else {
        (0..config.k).map(run).collect()
    };
    let mut folds = Vec::with_capacity(config.k);
    let mut models = Vec::with_capacity(config.k);
    for r in results {
        let (outcome, model) = r?;
        folds.push(outcome);
        models.push(model);
    }
    let scores: Vec<(f64, f64)> = folds.iter().map(|f| (f.val_f1, f.val_loss)).collect();
    let selected_fold = select_best(&scores).expect("k >= 2 folds") + 1;
    Ok(CvResult {
        plan,
        folds,
        selected_fold,
        models,
    })
}

/// Trains a fresh model on all of `samples` for exactly `epochs` epochs with
/// early stopping effectively off. The monitored loss is measured on the
/// unaugmented training samples themselves.
pub fn retrain_full<T: Scalar>(
    samples: &[Sample],
    arch: &ArchConfig,
    config: &TrainConfig,
    epochs: usize,
) -> Result<(Model<T>, FitOutcome)> {
    let train = if config.augment.is_identity() {
        samples.to_vec()
    } else {
        augment_set(samples, &mut Rng::derive(config.seed, AUGMENT_STREAM), &config.augment)
    };
    let mut model = Model::<T>::build(arch, derive_seed(config.seed, MODEL_STREAM))?;
    let mut retrain = TrainConfig {
        seed: derive_seed(config.seed, RETRAIN_STREAM),
        max_epochs: epochs.max(1),
        ..config.clone()
    };
    retrain.early_stop.patience = retrain.max_epochs + 1;
    let out = fit(&mut model, &train, samples, &retrain)?;
    Ok((model, out))
}
