use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    #[default]
    ValLoss,
    ValAcc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EarlyStopConfig {
    pub min_delta: f64,
    pub patience: usize,
    pub monitor: Monitor,
}

impl Default for EarlyStopConfig {
    fn default() -> Self {
        EarlyStopConfig {
            min_delta: 0.001,
            patience: 8,
            monitor: Monitor::ValLoss,
        }
    }
}

impl EarlyStopConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_delta >= 0.0 && self.min_delta.is_finite()) {
            return Err(Error::config(format!("min_delta must be >= 0, got {}", self.min_delta)));
        }
        if self.patience == 0 {
            return Err(Error::config("patience must be at least 1"));
        }
        Ok(())
    }
}

/// Tracks the monitored value epoch by epoch. An epoch improves on the best
/// so far when it beats it by strictly more than `min_delta` (lower for loss,
/// higher for accuracy); training should stop after `patience` epochs in a
/// row without improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    config: EarlyStopConfig,
    best: Option<f64>,
    best_epoch: usize,
    epoch: usize,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(config: EarlyStopConfig) -> Self {
        EarlyStopping {
            config,
            best: None,
            best_epoch: 0,
            epoch: 0,
            wait: 0,
        }
    }

    /// Records the next epoch's value; returns whether it is the new best.
    pub fn observe(&mut self, value: f64) -> bool {
        self.epoch += 1;
        let improved = match self.best {
            None => true,
            Some(best) => match self.config.monitor {
                Monitor::ValLoss => best - value > self.config.min_delta,
                Monitor::ValAcc => value - best > self.config.min_delta,
            },
        };
        if improved {
            self.best = Some(value);
            self.best_epoch = self.epoch;
            self.wait = 0;
        } else {
            self.wait += 1;
        }
        improved
    }

    pub fn should_stop(&self) -> bool {
        self.wait >= self.config.patience
    }

    /// 1-based; 0 before the first observation.
    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }
}
