use super::{check_same_shape, no_cache, LayerOps};
use crate::error::{Error, Result};
use crate::tensor::{Rng, Scalar, Tensor};

/// Inverted dropout: during training each unit is zeroed with probability
/// `rate` and survivors are scaled by `1 / (1 - rate)`. Inference is identity.
#[derive(Debug, Clone)]
pub struct Dropout<T> {
    rate: f64,
    /// Per-element multiplier from the last training forward (0 or the scale).
    mask: Option<Tensor<T>>,
}

impl<T: Scalar> Dropout<T> {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::config(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        Ok(Dropout { rate, mask: None })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl<T: Scalar> LayerOps<T> for Dropout<T> {
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }

    fn forward_train(&mut self, input: &Tensor<T>, rng: &mut Rng) -> Result<Tensor<T>> {
        let mut mask = Tensor::full(input.shape(), T::one())?;
        if self.rate > 0.0 {
            let keep = T::of(1.0 / (1.0 - self.rate));
            for m in mask.data_mut() {
                *m = if rng.chance(self.rate) { T::zero() } else { keep };
            }
        }
        let data = input
            .data()
            .iter()
            .zip(mask.data())
            .map(|(&x, &m)| x * m)
            .collect();
        self.mask = Some(mask);
        Tensor::from_vec(input.shape(), data)
    }

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(input.clone())
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let mask = self.mask.as_ref().ok_or_else(|| no_cache("Dropout"))?;
        check_same_shape("dropout backward", mask.shape(), grad_out.shape())?;
        let data = grad_out
            .data()
            .iter()
            .zip(mask.data())
            .map(|(&g, &m)| g * m)
            .collect();
        Tensor::from_vec(grad_out.shape(), data)
    }

    fn clear_cache(&mut self) {
        self.mask = None;
    }
}

/// Adds i.i.d. `N(0, stddev^2)` noise during training; identity at inference.
#[derive(Debug, Clone)]
pub struct GaussianNoise {
    stddev: f64,
    /// Input shape of the last training forward.
    primed: Option<Vec<usize>>,
}

impl GaussianNoise {
    pub fn new(stddev: f64) -> Result<Self> {
        if !(stddev >= 0.0 && stddev.is_finite()) {
            return Err(Error::config(format!(
                "noise stddev must be a non-negative number, got {stddev}"
            )));
        }
        Ok(GaussianNoise {
            stddev,
            primed: None,
        })
    }

    pub fn stddev(&self) -> f64 {
        self.stddev
    }
}

impl<T: Scalar> LayerOps<T> for GaussianNoise {
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }

    fn forward_train(&mut self, input: &Tensor<T>, rng: &mut Rng) -> Result<Tensor<T>> {
        self.primed = Some(input.shape().to_vec());
        if self.stddev == 0.0 {
            return Ok(input.clone());
        }
        let mut out = input.clone();
        for v in out.data_mut() {
            *v += T::of(self.stddev * rng.normal());
        }
        Ok(out)
    }

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(input.clone())
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.primed.as_ref().ok_or_else(|| no_cache("GaussianNoise"))?;
        check_same_shape("noise backward", shape, grad_out.shape())?;
        Ok(grad_out.clone())
    }

    fn clear_cache(&mut self) {
        self.primed = None;
    }
}
