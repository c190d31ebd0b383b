use super::{check_same_shape, no_cache, LayerOps};
use crate::error::{Error, Result};
use crate::tensor::{Rng, Scalar, Tensor};

/// Max pooling over `[H, W, C]` inputs. Stride defaults to the pool size,
/// giving non-overlapping windows.
#[derive(Debug, Clone)]
pub struct MaxPool2d {
    pool_size: usize,
    stride: usize,
    cache: Option<PoolCache>,
}

#[derive(Debug, Clone)]
struct PoolCache {
    input_shape: Vec<usize>,
    /// Flat input offset of the winning element, per output element.
    argmax: Vec<usize>,
}

impl MaxPool2d {
    pub fn new(pool_size: usize) -> Result<Self> {
        Self::with_stride(pool_size, pool_size)
    }

    pub fn with_stride(pool_size: usize, stride: usize) -> Result<Self> {
        if pool_size == 0 || stride == 0 {
            return Err(Error::config("pool size and stride must be positive"));
        }
        Ok(MaxPool2d {
            pool_size,
            stride,
            cache: None,
        })
    }

    pub fn pool_size(&self) -> usize {
        self.pool_size
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    fn dims(&self, input: &[usize]) -> Result<(usize, usize, usize, usize, usize)> {
        let [h, w, c] = *input else {
            return Err(Error::shape(format!(
                "max pooling expects [H, W, C] input, got {input:?}"
            )));
        };
        if h < self.pool_size || w < self.pool_size {
            return Err(Error::shape(format!(
                "{h} x {w} input is smaller than the {p} x {p} pool",
                p = self.pool_size
            )));
        }
        let oh = (h - self.pool_size) / self.stride + 1;
        let ow = (w - self.pool_size) / self.stride + 1;
        Ok((h, w, c, oh, ow))
    }

    /// Window maxima and their flat input offsets. Ties go to the first
    /// element in row-major window order.
    fn pool<T: Scalar>(&self, input: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
        let (_, w, c, oh, ow) = self.dims(input.shape())?;
        let (p, s) = (self.pool_size, self.stride);
        let x = input.data();
        let mut out = Vec::with_capacity(oh * ow * c);
        let mut argmax = Vec::with_capacity(oh * ow * c);
        for y in 0..oh {
            for xo in 0..ow {
                for ch in 0..c {
                    let mut best = (y * s * w + xo * s) * c + ch;
                    for dy in 0..p {
                        for dx in 0..p {
                            let idx = ((y * s + dy) * w + xo * s + dx) * c + ch;
                            if x[idx] > x[best] {
                                best = idx;
                            }
                        }
                    }
                    out.push(x[best]);
                    argmax.push(best);
                }
            }
        }
        Ok((Tensor::from_vec(&[oh, ow, c], out)?, argmax))
    }
}

impl<T: Scalar> LayerOps<T> for MaxPool2d {
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (_, _, c, oh, ow) = self.dims(input)?;
        Ok(vec![oh, ow, c])
    }

    fn forward_train(&mut self, input: &Tensor<T>, _rng: &mut Rng) -> Result<Tensor<T>> {
        self.cache = None;
        let (out, argmax) = self.pool(input)?;
        self.cache = Some(PoolCache {
            input_shape: input.shape().to_vec(),
            argmax,
        });
        Ok(out)
    }

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.pool(input)?.0)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.as_ref().ok_or_else(|| no_cache("MaxPooling"))?;
        let expected = LayerOps::<T>::output_shape(self, &cache.input_shape)?;
        check_same_shape("max pooling backward", &expected, grad_out.shape())?;
        let mut grad_in = Tensor::zeros(&cache.input_shape)?;
        let gi = grad_in.data_mut();
        for (&idx, &g) in cache.argmax.iter().zip(grad_out.data()) {
            gi[idx] += g;
        }
        Ok(grad_in)
    }

    fn clear_cache(&mut self) {
        self.cache = None;
    }
}
