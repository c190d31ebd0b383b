use super::{check_same_shape, no_cache, LayerOps};
use crate::error::{Error, Result};
use crate::tensor::{Rng, Scalar, Tensor};

/// `f(x) = x` for `x >= 0`, `alpha * x` otherwise. The derivative at exactly
/// zero is taken to be `alpha`.
#[derive(Debug, Clone)]
pub struct LeakyRelu<T> {
    alpha: f64,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> LeakyRelu<T> {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::config(format!(
                "LeakyReLU alpha must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(LeakyRelu { alpha, input: None })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    fn apply(&self, x: T) -> T {
        if x >= T::zero() {
            x
        } else {
            T::of(self.alpha) * x
        }
    }
}

impl<T: Scalar> LayerOps<T> for LeakyRelu<T> {
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }

    fn forward_train(&mut self, input: &Tensor<T>, _rng: &mut Rng) -> Result<Tensor<T>> {
        let out = self.infer(input)?;
        self.input = Some(input.clone());
        Ok(out)
    }

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(input.map(|x| self.apply(x)))
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let input = self.input.as_ref().ok_or_else(|| no_cache("LeakyReLU"))?;
        check_same_shape("LeakyReLU backward", input.shape(), grad_out.shape())?;
        let alpha = T::of(self.alpha);
        let data = input
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&x, &g)| if x > T::zero() { g } else { alpha * g })
            .collect();
        Tensor::from_vec(grad_out.shape(), data)
    }

    fn clear_cache(&mut self) {
        self.input = None;
    }
}

/// Numerically stable softmax over a rank-1 tensor.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let max = logits
        .data()
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.data().iter().map(|&x| (x - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    Tensor::from_vec(logits.shape(), exps.into_iter().map(|e| e / total).collect())
        .expect("same shape as input")
}

#[derive(Debug, Clone)]
pub struct Softmax<T> {
    output: Option<Tensor<T>>,
}

impl<T: Scalar> Softmax<T> {
    pub fn new() -> Self {
        Softmax { output: None }
    }
}

impl<T: Scalar> Default for Softmax<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> LayerOps<T> for Softmax<T> {
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match input {
            [c] if *c >= 2 => Ok(input.to_vec()),
            _ => Err(Error::shape(format!(
                "softmax needs a rank-1 input with at least 2 classes, got {input:?}"
            ))),
        }
    }

    fn forward_train(&mut self, input: &Tensor<T>, _rng: &mut Rng) -> Result<Tensor<T>> {
        let out = self.infer(input)?;
        self.output = Some(out.clone());
        Ok(out)
    }

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        LayerOps::<T>::output_shape(self, input.shape())?;
        Ok(softmax(input))
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let p = self.output.as_ref().ok_or_else(|| no_cache("Softmax"))?;
        check_same_shape("Softmax backward", p.shape(), grad_out.shape())?;
        // J^T g = p * (g - <g, p>)
        let dot: T = p
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&pi, &gi)| pi * gi)
            .sum();
        let data = p
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&pi, &gi)| pi * (gi - dot))
            .collect();
        Tensor::from_vec(p.shape(), data)
    }

    fn clear_cache(&mut self) {
        self.output = None;
    }
}
