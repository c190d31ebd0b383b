//! Compares backpropagated gradients of a small convolution against central
//! finite differences in double precision.

use gliomanet::layers::{LayerOps, LayerSpec};
use gliomanet::{Rng, Tensor};

fn main() -> gliomanet::Result<()> {
    let mut rng = Rng::new(1);
    let spec = LayerSpec::Conv2d {
        in_channels: 2,
        filters: 3,
        kernel_size: 3,
        stride: 1,
        leaky_relu_alpha: Some(0.01),
    };
    let mut conv = spec.build::<f64>(&mut rng)?;
    let x = Tensor::<f64>::rand_uniform(&mut rng, &[6, 6, 2], -1.0, 1.0)?;
    let y = conv.forward_train(&x, &mut rng)?;
    // Loss is <g, conv(x)>, so its gradient with respect to the output is g.
    let g = Tensor::<f64>::rand_uniform(&mut rng, y.shape(), -1.0, 1.0)?;
    let grad_x = conv.backward(&g)?;

    let loss = |conv: &mut gliomanet::layers::Layer<f64>, x: &Tensor<f64>| -> f64 {
        let y = conv.forward_train(x, &mut Rng::new(0)).unwrap();
        y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
    };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += h;
        let mut minus = x.clone();
        minus.data_mut()[i] -= h;
        let numeric = (loss(&mut conv, &plus) - loss(&mut conv, &minus)) / (2.0 * h);
        worst = worst.max((numeric - grad_x.data()[i]).abs());
    }
    println!("checked {} input coordinates, worst absolute error {worst:.2e}", x.len());
    Ok(())
}
