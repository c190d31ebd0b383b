//! Sequential models, the architecture builder, checkpoints and the layer table.

mod arch;
pub mod checkpoint;
mod summary;

pub use arch::{ArchConfig, ConvStage, CONV_DROPOUT, HEAD_DROPOUT, NOISE_STDDEV};
pub use checkpoint::{Manifest, FORMAT_VERSION};
pub use summary::summary;

use crate::error::{Error, Result};
use crate::layers::{Layer, LayerOps, LayerSpec, Mode, Param};
use crate::optim::{cross_entropy, xent_grad_from_probs};
use crate::tensor::{Rng, Scalar, Tensor};

#[derive(Debug, Clone)]
pub struct Model<T: Scalar> {
    name: String,
    seed: u64,
    input_shape: Vec<usize>,
    layers: Vec<Layer<T>>,
    /// Output shape of each layer, validated at construction.
    shapes: Vec<Vec<usize>>,
    /// Whether every layer holds a cache from the same training forward.
    primed: bool,
}

impl<T: Scalar> Model<T> {
    /// Assembles a model, checking that every layer accepts the previous
    /// layer's output shape.
    pub fn new(name: &str, seed: u64, input_shape: &[usize], layers: Vec<Layer<T>>) -> Result<Self> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::shape(format!("invalid model input shape {input_shape:?}")));
        }
        let mut shapes = Vec::with_capacity(layers.len());
        let mut current = input_shape.to_vec();
        for (i, layer) in layers.iter().enumerate() {
            current = layer.output_shape(&current).map_err(|e| {
                Error::shape(format!("layer {i} ({}): {e}", layer.name()))
            })?;
            shapes.push(current.clone());
        }
        Ok(Model {
            name: name.to_string(),
            seed,
            input_shape: input_shape.to_vec(),
            layers,
            shapes,
            primed: false,
        })
    }

    pub fn from_specs(name: &str, seed: u64, input_shape: &[usize], specs: &[LayerSpec]) -> Result<Self> {
        let mut rng = Rng::new(seed);
        let layers = specs
            .iter()
            .map(|s| s.build(&mut rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, seed, input_shape, layers)
    }

    /// Builds the stack described by `arch` with weights drawn from `seed`.
    pub fn build(arch: &ArchConfig, seed: u64) -> Result<Self> {
        let name = if *arch == ArchConfig::paper() {
            "paper"
        } else if *arch == ArchConfig::reduced() {
            "reduced"
        } else {
            "custom"
        };
        Self::from_specs(name, seed, &arch.input_shape(), &arch.layer_specs()?)
    }

    /// The 256x256 single-channel classifier with default hyperparameters.
    pub fn paper(seed: u64) -> Result<Self> {
        Self::build(&ArchConfig::paper(), seed)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().map_or(&self.input_shape, |s| s)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Output shape of every layer, in order.
    pub fn layer_shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(Error::shape(format!(
                "model expects input {:?}, got {:?}",
                self.input_shape,
                input.shape()
            )));
        }
        Ok(())
    }

    /// Runs the input through every layer. Training mode caches state for
    /// [`backward`](Self::backward) and draws dropout masks and noise from
    /// `rng`; inference mode clears all caches.
    pub fn forward(&mut self, input: &Tensor<T>, mode: Mode, rng: &mut Rng) -> Result<Tensor<T>> {
        self.check_input(input)?;
        self.primed = false;
        if mode == Mode::Inference {
            self.clear_caches();
            return self.infer(input);
        }
        let mut x = input.clone();
        for layer in &mut self.layers {
            x = layer.forward_train(&x, rng)?;
        }
        self.primed = true;
        Ok(x)
    }

    /// Inference-mode forward that leaves the model untouched.
    pub fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(input)?;
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer.infer(&x)?;
        }
        Ok(x)
    }

    pub fn clear_caches(&mut self) {
        self.primed = false;
        for layer in &mut self.layers {
            layer.clear_cache();
        }
    }

    /// Back-propagates `grad_out` (w.r.t. the model output) through all
    /// layers, accumulating parameter gradients.
    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        self.backward_through(grad_out, self.layers.len())
    }

    /// Like [`backward`](Self::backward), but `grad_logits` is taken w.r.t.
    /// the input of a trailing softmax, which is skipped.
    pub fn backward_logits(&mut self, grad_logits: &Tensor<T>) -> Result<Tensor<T>> {
        let end = match self.layers.last() {
            Some(Layer::Softmax(_)) => self.layers.len() - 1,
            _ => self.layers.len(),
        };
        self.backward_through(grad_logits, end)
    }

    fn backward_through(&mut self, grad: &Tensor<T>, end: usize) -> Result<Tensor<T>> {
        if !self.primed {
            return Err(Error::State(
                "model backward called without a training-mode forward".into(),
            ));
        }
        let mut g = grad.clone();
        for layer in self.layers[..end].iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    /// One training-mode forward and backward for a labelled sample, with
    /// the fused softmax/cross-entropy gradient. Returns the loss and the
    /// predicted distribution.
    pub fn accumulate_sample(&mut self, input: &Tensor<T>, label: usize, rng: &mut Rng) -> Result<(T, Tensor<T>)> {
        let probs = self.forward(input, Mode::Training, rng)?;
        let loss = cross_entropy(&probs, label)?;
        let grad = xent_grad_from_probs(&probs, label)?;
        self.backward_logits(&grad)?;
        Ok((loss, probs))
    }

    /// Every learnable tensor with a stable name, in layer order.
    pub fn named_params(&self) -> Vec<(String, &Param<T>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            for (j, p) in layer.params().into_iter().enumerate() {
                out.push((param_name(i, layer, j), p));
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn scale_grads(&mut self, factor: T) {
        for p in self.params_mut() {
            p.grad.scale(factor);
        }
    }

    /// Copies of all parameter values, for best-epoch restoration.
    pub fn snapshot(&self) -> Vec<Tensor<T>> {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .map(|p| p.value.clone())
            .collect()
    }

    pub fn restore(&mut self, snapshot: &[Tensor<T>]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != snapshot.len() {
            return Err(Error::State(format!(
                "snapshot holds {} tensors, model has {}",
                snapshot.len(),
                params.len()
            )));
        }
        for (p, v) in params.iter_mut().zip(snapshot) {
            if p.value.shape() != v.shape() {
                return Err(Error::shape("snapshot tensor shape differs from model"));
            }
            p.value = v.clone();
        }
        self.clear_caches();
        Ok(())
    }

    /// Converts every parameter to another element type.
    pub fn cast<U: Scalar>(&self) -> Result<Model<U>> {
        let mut out = Model::<U>::from_specs(&self.name, self.seed, &self.input_shape, &self.specs())?;
        let values = self.snapshot();
        let cast: Vec<Tensor<U>> = values.iter().map(Tensor::cast).collect();
        out.restore(&cast)?;
        Ok(out)
    }
}

fn param_name<T: Scalar>(index: usize, layer: &Layer<T>, slot: usize) -> String {
    let kind = match layer {
        Layer::Conv2d(_) => "conv2d",
        Layer::Dense(_) => "dense",
        _ => "layer",
    };
    let role = if slot == 0 { "weights" } else { "bias" };
    format!("{index:02}_{kind}_{role}")
}
