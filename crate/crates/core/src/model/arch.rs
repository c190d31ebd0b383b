use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{LayerSpec, DEFAULT_LEAKY_ALPHA};

/// A run of same-width 3x3 convolutions closed by a max pool and an optional
/// dropout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvStage {
    pub filters: usize,
    pub convs: usize,
    pub pool: usize,
    pub dropout: Option<f64>,
}

/// Hyperparameters from which the layer stack is generated.
///
/// `paper()` reproduces the 256x256 classifier; `reduced()` is the same
/// pattern shrunk to 32x32 inputs for fast tests and whole-model gradient
/// checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    pub input_size: usize,
    pub channels: usize,
    pub kernel_size: usize,
    pub stages: Vec<ConvStage>,
    pub leaky_alpha: f64,
    pub noise_stddev: f64,
    pub hidden_units: usize,
    pub head_dropout: f64,
    pub classes: usize,
}

pub const CONV_DROPOUT: f64 = 0.25;
pub const HEAD_DROPOUT: f64 = 0.5;
pub const NOISE_STDDEV: f64 = 0.1;

impl ArchConfig {
    pub fn paper() -> Self {
        let stage = |filters, pool, dropout| ConvStage {
            filters,
            convs: 2,
            pool,
            dropout,
        };
        ArchConfig {
            input_size: 256,
            channels: 1,
            kernel_size: 3,
            stages: vec![
                stage(16, 2, Some(CONV_DROPOUT)),
                stage(32, 2, Some(CONV_DROPOUT)),
                stage(64, 2, None),
                stage(128, 5, None),
            ],
            leaky_alpha: DEFAULT_LEAKY_ALPHA,
            noise_stddev: NOISE_STDDEV,
            hidden_units: 1024,
            head_dropout: HEAD_DROPOUT,
            classes: 2,
        }
    }

    /// 32x32 variant: the first stage and the final 5x5 pooling stage, with
    /// narrower filters. 32 -> 30 -> 28 -> 14 -> 12 -> 10 -> 2.
    pub fn reduced() -> Self {
        ArchConfig {
            input_size: 32,
            stages: vec![
                ConvStage {
                    filters: 4,
                    convs: 2,
                    pool: 2,
                    dropout: Some(CONV_DROPOUT),
                },
                ConvStage {
                    filters: 8,
                    convs: 2,
                    pool: 5,
                    dropout: None,
                },
            ],
            hidden_units: 16,
            ..Self::paper()
        }
    }

    pub fn input_shape(&self) -> Vec<usize> {
        vec![self.input_size, self.input_size, self.channels]
    }

    /// The layer stack. The first dense layer's width is whatever the
    /// flattened feature map works out to.
    pub fn layer_specs(&self) -> Result<Vec<LayerSpec>> {
        if self.stages.is_empty() {
            return Err(Error::config("architecture needs at least one conv stage"));
        }
        if self.classes < 2 {
            return Err(Error::config("architecture needs at least two classes"));
        }
        let k = self.kernel_size;
        let mut specs = Vec::new();
        let (mut side, mut channels) = (self.input_size, self.channels);
        for (i, stage) in self.stages.iter().enumerate() {
            for _ in 0..stage.convs {
                if side < k {
                    return Err(Error::config(format!(
                        "stage {i}: feature map {side} x {side} is smaller than the kernel"
                    )));
                }
                specs.push(LayerSpec::Conv2d {
                    in_channels: channels,
                    filters: stage.filters,
                    kernel_size: k,
                    stride: 1,
                    leaky_relu_alpha: Some(self.leaky_alpha),
                });
                side = side - k + 1;
                channels = stage.filters;
            }
            if side < stage.pool {
                return Err(Error::config(format!(
                    "stage {i}: feature map {side} x {side} is smaller than the {p} x {p} pool",
                    p = stage.pool
                )));
            }
            specs.push(LayerSpec::MaxPool2d {
                pool_size: stage.pool,
                stride: stage.pool,
            });
            side = (side - stage.pool) / stage.pool + 1;
            if let Some(rate) = stage.dropout {
                specs.push(LayerSpec::Dropout { rate });
            }
        }
        specs.push(LayerSpec::GaussianNoise {
            stddev: self.noise_stddev,
        });
        specs.push(LayerSpec::Flatten);
        let flat = side * side * channels;
        specs.push(LayerSpec::Dense {
            in_dim: flat,
            out_dim: self.hidden_units,
        });
        specs.push(LayerSpec::Dropout {
            rate: self.head_dropout,
        });
        specs.push(LayerSpec::Dense {
            in_dim: self.hidden_units,
            out_dim: self.classes,
        });
        specs.push(LayerSpec::Softmax);
        Ok(specs)
    }
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self::paper()
    }
}
