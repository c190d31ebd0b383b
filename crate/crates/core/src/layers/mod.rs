//! Layer kinds of the classifier: convolution, max pooling, LeakyReLU, dropout,
//! Gaussian noise, flatten, dense and softmax.
//!
//! Every layer processes one sample at a time. A training-mode forward caches
//! what the backward pass needs; an inference-mode forward clears that cache,
//! so `backward` can only ever see the most recent training forward.

mod activation;
mod conv;
mod dense;
mod pool;
mod regularize;

pub use activation::{softmax, LeakyRelu, Softmax};
pub use conv::Conv2d;
pub use dense::{Dense, Flatten};
pub use pool::MaxPool2d;
pub use regularize::{Dropout, GaussianNoise};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Rng, Scalar, Tensor};

pub const DEFAULT_LEAKY_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Inference,
}

/// A learnable tensor and its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param<T> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape()).expect("param shape already validated");
        Param { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

pub trait LayerOps<T: Scalar> {
    /// Shape produced for a given input shape, or a shape error.
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>>;

    /// Training-mode forward; caches state for `backward`.
    fn forward_train(&mut self, input: &Tensor<T>, rng: &mut Rng) -> Result<Tensor<T>>;

    /// Inference-mode forward. Pure: touches no cache and draws no randomness.
    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>>;

    /// Gradient w.r.t. the input of the last training forward. Parameter
    /// gradients are accumulated into each [`Param::grad`].
    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>>;

    fn clear_cache(&mut self);

    fn params(&self) -> Vec<&Param<T>> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        Vec::new()
    }

    fn forward(&mut self, input: &Tensor<T>, mode: Mode, rng: &mut Rng) -> Result<Tensor<T>> {
        match mode {
            Mode::Training => self.forward_train(input, rng),
            Mode::Inference => {
                self.clear_cache();
                self.infer(input)
            }
        }
    }
}

pub(crate) fn no_cache(layer: &str) -> Error {
    Error::State(format!("{layer}: backward called without a training-mode forward"))
}

pub(crate) fn check_same_shape(what: &str, expected: &[usize], got: &[usize]) -> Result<()> {
    if expected != got {
        return Err(Error::shape(format!(
            "{what}: expected shape {expected:?}, got {got:?}"
        )));
    }
    Ok(())
}

/// Glorot-uniform initialization.
pub(crate) fn glorot<T: Scalar>(
    rng: &mut Rng,
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
) -> Result<Tensor<T>> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::rand_uniform(rng, shape, -bound, bound)
}

/// Serializable description of a layer: its kind and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        filters: usize,
        kernel_size: usize,
        stride: usize,
        /// Fused LeakyReLU slope; `None` leaves the convolution linear.
        leaky_relu_alpha: Option<f64>,
    },
    MaxPool2d {
        pool_size: usize,
        stride: usize,
    },
    LeakyRelu {
        alpha: f64,
    },
    Dropout {
        rate: f64,
    },
    GaussianNoise {
        stddev: f64,
    },
    Flatten,
    Dense {
        in_dim: usize,
        out_dim: usize,
    },
    Softmax,
}

impl LayerSpec {
    /// Instantiates the layer, drawing initial weights from `rng`.
    pub fn build<T: Scalar>(&self, rng: &mut Rng) -> Result<Layer<T>> {
        Ok(match *self {
            LayerSpec::Conv2d {
                in_channels,
                filters,
                kernel_size,
                stride,
                leaky_relu_alpha,
            } => Layer::Conv2d(Conv2d::new(
                in_channels,
                filters,
                kernel_size,
                stride,
                leaky_relu_alpha,
                rng,
            )?),
            LayerSpec::MaxPool2d { pool_size, stride } => {
                Layer::MaxPool2d(MaxPool2d::with_stride(pool_size, stride)?)
            }
            LayerSpec::LeakyRelu { alpha } => Layer::LeakyRelu(LeakyRelu::new(alpha)?),
            LayerSpec::Dropout { rate } => Layer::Dropout(Dropout::new(rate)?),
            LayerSpec::GaussianNoise { stddev } => Layer::GaussianNoise(GaussianNoise::new(stddev)?),
            LayerSpec::Flatten => Layer::Flatten(Flatten::new()),
            LayerSpec::Dense { in_dim, out_dim } => Layer::Dense(Dense::new(in_dim, out_dim, rng)?),
            LayerSpec::Softmax => Layer::Softmax(Softmax::new()),
        })
    }
}

#[derive(Debug, Clone)]
pub enum Layer<T: Scalar> {
    Conv2d(Conv2d<T>),
    MaxPool2d(MaxPool2d),
    LeakyRelu(LeakyRelu<T>),
    Dropout(Dropout<T>),
    GaussianNoise(GaussianNoise),
    Flatten(Flatten),
    Dense(Dense<T>),
    Softmax(Softmax<T>),
}

macro_rules! dispatch {
    ($self:expr, $l:ident => $body:expr) => {
        match $self {
            Layer::Conv2d($l) => $body,
            Layer::MaxPool2d($l) => $body,
            Layer::LeakyRelu($l) => $body,
            Layer::Dropout($l) => $body,
            Layer::GaussianNoise($l) => $body,
            Layer::Flatten($l) => $body,
            Layer::Dense($l) => $body,
            Layer::Softmax($l) => $body,
        }
    };
}

impl<T: Scalar> LayerOps<T> for Layer<T> {
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        dispatch!(self, l => LayerOps::<T>::output_shape(l, input))
    }

    fn forward_train(&mut self, input: &Tensor<T>, rng: &mut Rng) -> Result<Tensor<T>> {
        dispatch!(self, l => l.forward_train(input, rng))
    }

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        dispatch!(self, l => l.infer(input))
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        dispatch!(self, l => l.backward(grad_out))
    }

    fn clear_cache(&mut self) {
        dispatch!(self, l => LayerOps::<T>::clear_cache(l))
    }

    fn params(&self) -> Vec<&Param<T>> {
        dispatch!(self, l => l.params())
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        dispatch!(self, l => l.params_mut())
    }
}

impl<T: Scalar> Layer<T> {
    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Conv2d(c) => LayerSpec::Conv2d {
                in_channels: c.in_channels(),
                filters: c.filters(),
                kernel_size: c.kernel_size(),
                stride: c.stride(),
                leaky_relu_alpha: c.activation_alpha(),
            },
            Layer::MaxPool2d(p) => LayerSpec::MaxPool2d {
                pool_size: p.pool_size(),
                stride: p.stride(),
            },
            Layer::LeakyRelu(a) => LayerSpec::LeakyRelu { alpha: a.alpha() },
            Layer::Dropout(d) => LayerSpec::Dropout { rate: d.rate() },
            Layer::GaussianNoise(g) => LayerSpec::GaussianNoise { stddev: g.stddev() },
            Layer::Flatten(_) => LayerSpec::Flatten,
            Layer::Dense(d) => LayerSpec::Dense {
                in_dim: d.in_dim(),
                out_dim: d.out_dim(),
            },
            Layer::Softmax(_) => LayerSpec::Softmax,
        }
    }

    /// Short name used in summaries and parameter file names.
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv2d(_) => "Convolution",
            Layer::MaxPool2d(_) => "MaxPooling",
            Layer::LeakyRelu(_) => "LeakyReLU",
            Layer::Dropout(_) => "Dropout",
            Layer::GaussianNoise(_) => "GaussianNoise",
            Layer::Flatten(_) => "Flatten",
            Layer::Dense(_) => "FullConnect",
            Layer::Softmax(_) => "Softmax",
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}
