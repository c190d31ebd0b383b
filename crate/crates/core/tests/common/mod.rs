#![allow(dead_code)]

use std::path::Path;

use gliomanet::data::{synthetic_dataset, write_image_dir};
use gliomanet::layers::{Layer, LayerOps, LayerSpec};
use gliomanet::{Model, Mode, Rng, Tensor};

pub const H: f64 = 1e-5;
pub const ABS_TOL: f64 = 1e-6;
pub const REL_TOL: f64 = 1e-4;

/// Coordinates checked per tensor when it is larger than this.
const MAX_COORDS: usize = 12;

#[derive(Debug, Default)]
pub struct GradReport {
    pub checked: usize,
    /// Coordinates skipped because the stencil crossed a kink.
    pub kinks: usize,
    pub worst_abs: f64,
    pub failures: Vec<String>,
}

impl GradReport {
    fn compare(&mut self, what: &str, analytic: f64, numeric: f64) {
        self.checked += 1;
        let abs = (analytic - numeric).abs();
        let rel = abs / analytic.abs().max(numeric.abs()).max(f64::MIN_POSITIVE);
        self.worst_abs = self.worst_abs.max(abs);
        if !(abs <= ABS_TOL || rel <= REL_TOL) {
            self.failures.push(format!("{what}: analytic {analytic:e} numeric {numeric:e}"));
        }
    }

    pub fn merge(&mut self, other: GradReport) {
        self.checked += other.checked;
        self.kinks += other.kinks;
        self.worst_abs = self.worst_abs.max(other.worst_abs);
        self.failures.extend(other.failures);
    }
}

fn coords(len: usize, rng: &mut Rng) -> Vec<usize> {
    if len <= MAX_COORDS {
        return (0..len).collect();
    }
    let mut all: Vec<usize> = (0..len).collect();
    rng.shuffle(&mut all);
    all.truncate(MAX_COORDS);
    all
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Checks the input and parameter gradients of `layer` for the scalar loss
/// `<g, layer(x)>` against central differences. Every loss evaluation
/// re-seeds the layer's RNG so dropout masks and noise stay fixed.
pub fn check_layer(layer: &mut Layer<f64>, input_shape: &[usize], seed: u64) -> GradReport {
    let mut rng = Rng::new(seed);
    let x = Tensor::rand_uniform(&mut rng, input_shape, -1.0, 1.0).unwrap();
    let out_shape = layer.output_shape(input_shape).unwrap();
    let g = Tensor::rand_uniform(&mut rng, &out_shape, -1.0, 1.0).unwrap();
    let fwd_seed = rng.next_u64();

    let loss = |layer: &mut Layer<f64>, x: &Tensor<f64>| {
        let y = layer.forward(x, Mode::Training, &mut Rng::new(fwd_seed)).unwrap();
        dot(&y, &g)
    };

    for p in layer.params_mut() {
        p.zero_grad();
    }
    layer.forward(&x, Mode::Training, &mut Rng::new(fwd_seed)).unwrap();
    let dx = layer.backward(&g).unwrap();
    let param_grads: Vec<Tensor<f64>> = layer.params().iter().map(|p| p.grad.clone()).collect();

    let mut report = GradReport::default();
    for c in coords(x.len(), &mut rng) {
        let mut xp = x.clone();
        xp.data_mut()[c] += H;
        let mut xm = x.clone();
        xm.data_mut()[c] -= H;
        let numeric = (loss(layer, &xp) - loss(layer, &xm)) / (2.0 * H);
        report.compare(&format!("input[{c}]"), dx.data()[c], numeric);
    }
    for (j, grad) in param_grads.iter().enumerate() {
        for c in coords(grad.len(), &mut rng) {
            let original = layer.params()[j].value.data()[c];
            layer.params_mut()[j].value.data_mut()[c] = original + H;
            let plus = loss(layer, &x);
            layer.params_mut()[j].value.data_mut()[c] = original - H;
            let minus = loss(layer, &x);
            layer.params_mut()[j].value.data_mut()[c] = original;
            report.compare(&format!("param{j}[{c}]"), grad.data()[c], (plus - minus) / (2.0 * H));
        }
    }
    report
}

/// Which piece of the piecewise-smooth network `x` falls in: the sign of
/// every LeakyReLU output and the argmax of every pooling window.
fn activation_pattern(model: &Model<f64>, x: &Tensor<f64>, fwd_seed: u64) -> Vec<usize> {
    let mut rng = Rng::new(fwd_seed);
    let mut pattern = Vec::new();
    let mut current = x.clone();
    for layer in model.layers() {
        let mut layer = layer.clone();
        let next = layer.forward_train(&current, &mut rng).unwrap();
        match layer.spec() {
            LayerSpec::Conv2d { leaky_relu_alpha: Some(_), .. } | LayerSpec::LeakyRelu { .. } => {
                pattern.extend(next.data().iter().map(|&v| usize::from(v > 0.0)));
            }
            LayerSpec::MaxPool2d { pool_size, stride } => {
                let (w, c) = (current.shape()[1], current.shape()[2]);
                let (oh, ow) = (next.shape()[0], next.shape()[1]);
                for i in 0..oh {
                    for j in 0..ow {
                        for ch in 0..c {
                            let at = |k: usize| {
                                let (di, dj) = (k / pool_size, k % pool_size);
                                current.data()[((i * stride + di) * w + j * stride + dj) * c + ch]
                            };
                            let best = (0..pool_size * pool_size).fold(0, |b, k| if at(k) > at(b) { k } else { b });
                            pattern.push(best);
                        }
                    }
                }
            }
            _ => {}
        }
        current = next;
    }
    pattern
}

/// Checks parameter gradients of the cross-entropy loss of a whole model on
/// one labelled input, with the fused softmax/cross-entropy backward. A
/// coordinate whose `±H` stencil changes the activation pattern straddles a
/// point where the loss is not differentiable; it is counted in `kinks` and
/// replaced by another coordinate of the same tensor.
pub fn check_model(model: &mut Model<f64>, seed: u64) -> GradReport {
    let mut rng = Rng::new(seed);
    let x = Tensor::rand_uniform(&mut rng, model.input_shape(), 0.0, 1.0).unwrap();
    let label = rng.below(2);
    let fwd_seed = rng.next_u64();

    model.zero_grads();
    model.accumulate_sample(&x, label, &mut Rng::new(fwd_seed)).unwrap();
    let grads: Vec<Tensor<f64>> = model.named_params().iter().map(|(_, p)| p.grad.clone()).collect();
    let base = activation_pattern(model, &x, fwd_seed);

    let loss = |model: &mut Model<f64>| {
        let probs = model.forward(&x, Mode::Training, &mut Rng::new(fwd_seed)).unwrap();
        gliomanet::optim::cross_entropy(&probs, label).unwrap()
    };

    let mut report = GradReport::default();
    for (j, grad) in grads.iter().enumerate() {
        let mut order: Vec<usize> = (0..grad.len()).collect();
        rng.shuffle(&mut order);
        let mut done = 0;
        for c in order {
            if done == 4 {
                break;
            }
            let original = model.params_mut()[j].value.data()[c];
            model.params_mut()[j].value.data_mut()[c] = original + H;
            let plus = loss(model);
            let smooth_plus = activation_pattern(model, &x, fwd_seed) == base;
            model.params_mut()[j].value.data_mut()[c] = original - H;
            let minus = loss(model);
            let smooth_minus = activation_pattern(model, &x, fwd_seed) == base;
            model.params_mut()[j].value.data_mut()[c] = original;
            if !(smooth_plus && smooth_minus) {
                report.kinks += 1;
                continue;
            }
            report.compare(&format!("param{j}[{c}]"), grad.data()[c], (plus - minus) / (2.0 * H));
            done += 1;
        }
    }
    report
}

/// Writes `positives` blob and `negatives` blank PNGs under `root/yes` and
/// `root/no`.
pub fn synthetic_tree(root: &Path, positives: usize, negatives: usize, size: usize, seed: u64) {
    write_image_dir(root, &synthetic_dataset(positives, negatives, size, seed)).unwrap();
}
