//! Training loop with early stopping, k-fold model selection, evaluation and
//! single-image prediction.

mod cv;
mod early_stop;

pub use cv::{cross_validate, retrain_full, select_best, CvResult, FoldOutcome};
pub use early_stop::{EarlyStopConfig, EarlyStopping, Monitor};

use std::fmt;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{self, csv_error, AugmentConfig, Sample};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricReport};
use crate::model::Model;
use crate::optim::{cross_entropy, LrSchedule, Optimizer, UpdateRule};
use crate::tensor::{Rng, Scalar, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop: EarlyStopConfig,
    pub k: usize,
    pub seed: u64,
    pub optimizer: UpdateRule,
    pub schedule: LrSchedule,
    pub augment: AugmentConfig,
    /// Folds trained concurrently by `cross_validate` and image decoding
    /// threads; 1 keeps everything on the calling thread.
    pub threads: usize,
    /// After fold selection, train a fresh model on the whole training set.
    pub retrain_full: bool,
    /// Keep class proportions equal across folds.
    pub stratified_folds: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            max_epochs: 100,
            early_stop: EarlyStopConfig::default(),
            k: 3,
            seed: 0,
            optimizer: UpdateRule::default(),
            schedule: LrSchedule::default(),
            augment: AugmentConfig::default(),
            threads: 1,
            retrain_full: false,
            stratified_folds: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs must be at least 1"));
        }
        if self.k < 2 {
            return Err(Error::config(format!("k must be at least 2, got {}", self.k)));
        }
        if self.threads == 0 {
            return Err(Error::config("threads must be at least 1"));
        }
        self.early_stop.validate()?;
        self.optimizer.validate()?;
        self.schedule.validate()?;
        self.augment.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub lr: f64,
    /// Wall time of the epoch.
    pub seconds: f64,
}

impl EpochRecord {
    pub fn monitored(&self, monitor: Monitor) -> f64 {
        match monitor {
            Monitor::ValLoss => self.val_loss,
            Monitor::ValAcc => self.val_acc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::MaxEpochs => "max_epochs",
            StopReason::EarlyStop => "early_stop",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl FitOutcome {
    pub fn best(&self) -> &EpochRecord {
        &self.history[self.best_epoch - 1]
    }
}

/// One epoch of work plus best-weight bookkeeping, as driven by [`drive`].
pub trait EpochRunner {
    fn run_epoch(&mut self, epoch: usize) -> Result<EpochRecord>;
    /// Called after an epoch that improved the monitored value.
    fn keep_best(&mut self);
    /// Called once when training ends.
    fn restore_best(&mut self) -> Result<()>;
}

/// Runs epochs `1..=max_epochs`, stopping early once the monitored value
/// has not improved by more than `min_delta` for `patience` epochs, then
/// restores the best epoch's weights.
pub fn drive(runner: &mut impl EpochRunner, max_epochs: usize, early: &EarlyStopConfig) -> Result<FitOutcome> {
    let mut stopper = EarlyStopping::new(early.clone());
    let mut history = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;
    for epoch in 1..=max_epochs {
        let record = runner.run_epoch(epoch)?;
        if stopper.observe(record.monitored(early.monitor)) {
            runner.keep_best();
        }
        history.push(record);
        if stopper.should_stop() {
            stop_reason = StopReason::EarlyStop;
            break;
        }
    }
    runner.restore_best()?;
    Ok(FitOutcome {
        history,
        best_epoch: stopper.best_epoch(),
        stop_reason,
    })
}

struct FitRunner<'a, T: Scalar> {
    model: &'a mut Model<T>,
    train: &'a [Sample],
    val: &'a [Sample],
    config: &'a TrainConfig,
    optimizer: Optimizer<T>,
    best: Vec<Tensor<T>>,
}

const SHUFFLE_STREAM: u64 = 0;
const LAYER_STREAM: u64 = 1;

impl<T: Scalar> EpochRunner for FitRunner<'_, T> {
    fn run_epoch(&mut self, epoch: usize) -> Result<EpochRecord> {
        let start = Instant::now();
        let lr = self.config.schedule.rate_at(epoch - 1);
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        Rng::derive(self.config.seed, 2 * epoch as u64 + SHUFFLE_STREAM).shuffle(&mut order);
        let mut rng = Rng::derive(self.config.seed, 2 * epoch as u64 + LAYER_STREAM);

        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(self.config.batch_size) {
            self.model.zero_grads();
            for &i in batch {
                let sample = &self.train[i];
                let (loss, probs) = self.model.accumulate_sample(&sample.image.cast(), sample.label, &mut rng)?;
                if !loss.is_finite() || probs.data().iter().any(|p| !p.is_finite()) {
                    return Err(Error::Diverged { epoch });
                }
                loss_sum += loss.as_f64();
                correct += usize::from(probs.argmax() == sample.label);
            }
            self.model.scale_grads(T::one() / T::of(batch.len() as f64));
            self.optimizer.step(&mut self.model.params_mut(), lr)?;
        }
        self.model.clear_caches();
        let (val_loss, val_acc) = loss_and_accuracy(self.model, self.val)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let n = self.train.len() as f64;
        Ok(EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            val_loss,
            val_acc,
            lr,
            seconds: start.elapsed().as_secs_f64(),
        })
    }

    fn keep_best(&mut self) {
        self.best = self.model.snapshot();
    }

    fn restore_best(&mut self) -> Result<()> {
        self.model.restore(&self.best)
    }
}

/// Trains `model` in place on `train`, validating on `val` after every
/// epoch. On return the model holds the weights of the best monitored epoch.
pub fn fit<T: Scalar>(model: &mut Model<T>, train: &[Sample], val: &[Sample], config: &TrainConfig) -> Result<FitOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("training set is empty".into()));
    }
    if val.is_empty() {
        return Err(Error::EmptyDataset("validation set is empty".into()));
    }
    let best = model.snapshot();
    let mut runner = FitRunner {
        model,
        train,
        val,
        config,
        optimizer: Optimizer::new(config.optimizer),
        best,
    };
    drive(&mut runner, config.max_epochs, &config.early_stop)
}

fn check_nonempty(samples: &[Sample]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset("no samples to evaluate".into()));
    }
    Ok(())
}

/// Class probabilities for every sample, in inference mode.
pub fn probabilities<T: Scalar>(model: &Model<T>, samples: &[Sample]) -> Result<Vec<Tensor<T>>> {
    samples.iter().map(|s| model.infer(&s.image.cast())).collect()
}

/// Mean cross-entropy and accuracy in inference mode.
pub fn loss_and_accuracy<T: Scalar>(model: &Model<T>, samples: &[Sample]) -> Result<(f64, f64)> {
    check_nonempty(samples)?;
    let (mut loss, mut correct) = (0.0, 0usize);
    for (s, probs) in samples.iter().zip(probabilities(model, samples)?) {
        loss += cross_entropy(&probs, s.label)?.as_f64();
        correct += usize::from(probs.argmax() == s.label);
    }
    let n = samples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Metric report of inference-mode predictions. The predicted class is the
/// argmax of the output; an exact tie goes to class 0.
pub fn evaluate<T: Scalar>(model: &Model<T>, samples: &[Sample]) -> Result<MetricReport> {
    check_nonempty(samples)?;
    let preds: Vec<usize> = probabilities(model, samples)?.iter().map(Tensor::argmax).collect();
    metrics::report(&preds, &data::labels(samples))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: usize,
    pub probs: Vec<f64>,
}

/// Loads, preprocesses and classifies one image file.
pub fn predict<T: Scalar>(model: &Model<T>, path: &Path) -> Result<Prediction> {
    let size = match model.input_shape() {
        &[h, w, 1] if h == w => h,
        other => {
            return Err(Error::shape(format!(
                "prediction needs a square single-channel model input, got {other:?}"
            )))
        }
    };
    let image = data::load_image(path, size)?;
    let probs = model.infer(&image.cast())?;
    Ok(Prediction {
        label: probs.argmax(),
        probs: probs.data().iter().map(|p| p.as_f64()).collect(),
    })
}

/// Writes `epoch,train_loss,train_acc,val_loss,val_acc,lr,seconds`.
pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for record in history {
        w.serialize(record).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Sets a model to predict `class` for every input by zeroing the last dense
/// layer and biasing one output. Used in examples and tests.
pub fn constant_predictor<T: Scalar>(model: &mut Model<T>, class: usize) -> Result<()> {
    let mut params = model.params_mut();
    let n = params.len();
    if n < 2 {
        return Err(Error::shape("model has no output layer parameters"));
    }
    params[n - 2].value.fill(T::zero());
    let bias = &mut params[n - 1].value;
    if class >= bias.len() {
        return Err(Error::ClassIndex {
            index: class,
            classes: bias.len(),
        });
    }
    bias.fill(T::zero());
    bias.data_mut()[class] = T::one();
    model.clear_caches();
    Ok(())
}
