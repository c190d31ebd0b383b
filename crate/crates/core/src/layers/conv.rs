use super::{check_same_shape, glorot, no_cache, LayerOps, LeakyRelu, Param};
use crate::error::{Error, Result};
use crate::tensor::{Rng, Scalar, Tensor};

/// Valid-padding 2-D convolution over `[H, W, C_in]` inputs with square
/// kernels, optionally followed by a fused LeakyReLU.
///
/// Weights are laid out `[kh, kw, C_in, C_out]`, so for a fixed kernel row the
/// `kw * C_in` input values under the window are contiguous in both the input
/// and the weight buffer. The loops below walk those runs directly rather than
/// materializing an im2col matrix.
#[derive(Debug, Clone)]
pub struct Conv2d<T: Scalar> {
    in_channels: usize,
    filters: usize,
    kernel_size: usize,
    stride: usize,
    pub weights: Param<T>,
    pub bias: Param<T>,
    activation: Option<LeakyRelu<T>>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(
        in_channels: usize,
        filters: usize,
        kernel_size: usize,
        stride: usize,
        leaky_relu_alpha: Option<f64>,
        rng: &mut Rng,
    ) -> Result<Self> {
        if in_channels == 0 || filters == 0 || kernel_size == 0 || stride == 0 {
            return Err(Error::config(format!(
                "convolution needs positive channels, filters, kernel size and stride \
                 (got {in_channels}, {filters}, {kernel_size}, {stride})"
            )));
        }
        let k = kernel_size;
        let weights = glorot(
            rng,
            &[k, k, in_channels, filters],
            k * k * in_channels,
            k * k * filters,
        )?;
        let bias = Tensor::zeros(&[filters])?;
        let activation = leaky_relu_alpha.map(LeakyRelu::new).transpose()?;
        Ok(Conv2d {
            in_channels,
            filters,
            kernel_size,
            stride,
            weights: Param::new(weights),
            bias: Param::new(bias),
            activation,
            input: None,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn filters(&self) -> usize {
        self.filters
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn activation_alpha(&self) -> Option<f64> {
        self.activation.as_ref().map(LeakyRelu::alpha)
    }

    fn dims(&self, input: &[usize]) -> Result<(usize, usize, usize, usize)> {
        let [h, w, c] = *input else {
            return Err(Error::shape(format!(
                "convolution expects [H, W, C] input, got {input:?}"
            )));
        };
        if c != self.in_channels {
            return Err(Error::shape(format!(
                "convolution expects {} input channels, got {c}",
                self.in_channels
            )));
        }
        if h < self.kernel_size || w < self.kernel_size {
            return Err(Error::shape(format!(
                "{h} x {w} input is smaller than the {k} x {k} kernel",
                k = self.kernel_size
            )));
        }
        let oh = (h - self.kernel_size) / self.stride + 1;
        let ow = (w - self.kernel_size) / self.stride + 1;
        Ok((h, w, oh, ow))
    }

    fn linear_forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, w, oh, ow) = self.dims(input.shape())?;
        let (k, s, cin, cout) = (self.kernel_size, self.stride, self.in_channels, self.filters);
        let run = k * cin;
        let x = input.data();
        let wt = self.weights.value.data();
        let bias = self.bias.value.data();
        let mut out = vec![T::zero(); oh * ow * cout];
        for y in 0..oh {
            for xo in 0..ow {
                let px = &mut out[(y * ow + xo) * cout..][..cout];
                px.copy_from_slice(bias);
                for dy in 0..k {
                    let seg = &x[((y * s + dy) * w + xo * s) * cin..][..run];
                    let wseg = &wt[dy * run * cout..][..run * cout];
                    for (&a, wrow) in seg.iter().zip(wseg.chunks_exact(cout)) {
                        for (o, &wv) in px.iter_mut().zip(wrow) {
                            *o += a * wv;
                        }
                    }
                }
            }
        }
        Tensor::from_vec(&[oh, ow, cout], out)
    }

    fn linear_backward(&mut self, input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, w, oh, ow) = self.dims(input.shape())?;
        check_same_shape("convolution backward", &[oh, ow, self.filters], grad_out.shape())?;
        let (k, s, cin, cout) = (self.kernel_size, self.stride, self.in_channels, self.filters);
        let run = k * cin;
        let x = input.data();
        let g = grad_out.data();
        let wt = self.weights.value.data();
        let gw = self.weights.grad.data_mut();
        let mut gin = vec![T::zero(); x.len()];
        for y in 0..oh {
            for xo in 0..ow {
                let gpx = &g[(y * ow + xo) * cout..][..cout];
                for dy in 0..k {
                    let start = ((y * s + dy) * w + xo * s) * cin;
                    let seg = &x[start..][..run];
                    let gseg = &mut gin[start..][..run];
                    let base = dy * run * cout;
                    let wseg = &wt[base..][..run * cout];
                    let gwseg = &mut gw[base..][..run * cout];
                    for (((&a, gi), wrow), gwrow) in seg
                        .iter()
                        .zip(gseg.iter_mut())
                        .zip(wseg.chunks_exact(cout))
                        .zip(gwseg.chunks_exact_mut(cout))
                    {
                        let mut acc = T::zero();
                        for ((&gv, &wv), gwv) in gpx.iter().zip(wrow).zip(gwrow.iter_mut()) {
                            *gwv += a * gv;
                            acc += wv * gv;
                        }
                        *gi += acc;
                    }
                }
            }
        }
        let gb = self.bias.grad.data_mut();
        for px in g.chunks_exact(cout) {
            for (b, &gv) in gb.iter_mut().zip(px) {
                *b += gv;
            }
        }
        Tensor::from_vec(input.shape(), gin)
    }
}

impl<T: Scalar> LayerOps<T> for Conv2d<T> {
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (_, _, oh, ow) = self.dims(input)?;
        Ok(vec![oh, ow, self.filters])
    }

    fn forward_train(&mut self, input: &Tensor<T>, rng: &mut Rng) -> Result<Tensor<T>> {
        self.input = None;
        let z = self.linear_forward(input)?;
        let out = match self.activation.as_mut() {
            Some(act) => act.forward_train(&z, rng)?,
            None => z,
        };
        self.input = Some(input.clone());
        Ok(out)
    }

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let z = self.linear_forward(input)?;
        match &self.activation {
            Some(act) => act.infer(&z),
            None => Ok(z),
        }
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let input = self.input.take().ok_or_else(|| no_cache("Convolution"))?;
        let grad_z = match self.activation.as_mut() {
            Some(act) => act.backward(grad_out),
            None => Ok(grad_out.clone()),
        };
        let result = grad_z.and_then(|gz| self.linear_backward(&input, &gz));
        self.input = Some(input);
        result
    }

    fn clear_cache(&mut self) {
        self.input = None;
        if let Some(act) = self.activation.as_mut() {
            act.clear_cache();
        }
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weights, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weights, &mut self.bias]
    }
}
