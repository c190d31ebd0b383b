use super::{check_same_shape, glorot, no_cache, LayerOps, Param};
use crate::error::{Error, Result};
use crate::tensor::{Rng, Scalar, Tensor};

/// Fully connected layer, `y = x W + b` with `W: [in_dim, out_dim]`.
#[derive(Debug, Clone)]
pub struct Dense<T: Scalar> {
    in_dim: usize,
    out_dim: usize,
    pub weights: Param<T>,
    pub bias: Param<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::config("dense layer dimensions must be positive"));
        }
        let weights = glorot(rng, &[in_dim, out_dim], in_dim, out_dim)?;
        Ok(Dense {
            in_dim,
            out_dim,
            weights: Param::new(weights),
            bias: Param::new(Tensor::zeros(&[out_dim])?),
            input: None,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        if shape != [self.in_dim] {
            return Err(Error::shape(format!(
                "dense layer expects input [{}], got {shape:?}",
                self.in_dim
            )));
        }
        Ok(())
    }
}

impl<T: Scalar> LayerOps<T> for Dense<T> {
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.check_input(input)?;
        Ok(vec![self.out_dim])
    }

    fn forward_train(&mut self, input: &Tensor<T>, _rng: &mut Rng) -> Result<Tensor<T>> {
        self.input = None;
        let out = self.infer(input)?;
        self.input = Some(input.clone());
        Ok(out)
    }

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(input.shape())?;
        let mut out = self.bias.value.data().to_vec();
        let w = self.weights.value.data();
        for (&x, row) in input.data().iter().zip(w.chunks_exact(self.out_dim)) {
            if x == T::zero() {
                continue;
            }
            for (o, &wv) in out.iter_mut().zip(row) {
                *o += x * wv;
            }
        }
        Tensor::from_vec(&[self.out_dim], out)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let input = self.input.as_ref().ok_or_else(|| no_cache("FullConnect"))?;
        check_same_shape("dense backward", &[self.out_dim], grad_out.shape())?;
        let g = grad_out.data();
        let w = self.weights.value.data();
        let gw = self.weights.grad.data_mut();
        let mut gin = Vec::with_capacity(self.in_dim);
        for ((&x, row), grow) in input
            .data()
            .iter()
            .zip(w.chunks_exact(self.out_dim))
            .zip(gw.chunks_exact_mut(self.out_dim))
        {
            let mut acc = T::zero();
            for ((&gv, &wv), gwv) in g.iter().zip(row).zip(grow.iter_mut()) {
                *gwv += x * gv;
                acc += wv * gv;
            }
            gin.push(acc);
        }
        for (b, &gv) in self.bias.grad.data_mut().iter_mut().zip(g) {
            *b += gv;
        }
        Tensor::from_vec(&[self.in_dim], gin)
    }

    fn clear_cache(&mut self) {
        self.input = None;
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weights, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weights, &mut self.bias]
    }
}

/// Collapses any input to rank 1, keeping row-major element order.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    input_shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Flatten { input_shape: None }
    }
}

impl<T: Scalar> LayerOps<T> for Flatten {
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(vec![input.iter().product()])
    }

    fn forward_train(&mut self, input: &Tensor<T>, _rng: &mut Rng) -> Result<Tensor<T>> {
        self.input_shape = Some(input.shape().to_vec());
        self.infer(input)
    }

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        input.clone().reshape(&[input.len()])
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.input_shape.as_ref().ok_or_else(|| no_cache("Flatten"))?;
        grad_out.clone().reshape(shape)
    }

    fn clear_cache(&mut self) {
        self.input_shape = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Mode;

    fn dense(w: Vec<f64>, b: Vec<f64>, i: usize, o: usize) -> Dense<f64> {
        let mut d = Dense::new(i, o, &mut Rng::new(0)).unwrap();
        d.weights.value = Tensor::from_vec(&[i, o], w).unwrap();
        d.bias.value = Tensor::from_vec(&[o], b).unwrap();
        d
    }

    #[test]
    fn identity_weights() {
        let d = dense(vec![1., 0., 0., 0., 1., 0., 0., 0., 1.], vec![0.; 3], 3, 3);
        let x = Tensor::vector(&[0.5, -2.0, 3.0]);
        assert_eq!(d.infer(&x).unwrap(), x);
    }

    #[test]
    fn hand_computed_affine() {
        let d = dense(vec![1., 0., 0., 2.], vec![1., 1.], 2, 2);
        // [1,2] . [[1,0],[0,2]] + [1,1] = [2, 5]
        assert_eq!(d.infer(&Tensor::vector(&[1., 2.])).unwrap().data(), &[2., 5.]);
    }

    #[test]
    fn backward_formulas() {
        let mut d = dense(vec![1., 2., 3., 4.], vec![0., 0.], 2, 2);
        let x = Tensor::vector(&[5., 7.]);
        d.forward(&x, Mode::Training, &mut Rng::new(0)).unwrap();
        let gin = d.backward(&Tensor::vector(&[1., -1.])).unwrap();
        // W g = [1-2, 3-4]
        assert_eq!(gin.data(), &[-1., -1.]);
        // x^T g
        assert_eq!(d.weights.grad.data(), &[5., -5., 7., -7.]);
        assert_eq!(d.bias.grad.data(), &[1., -1.]);
    }

    #[test]
    fn flatten_to_dense_contract() {
        let d = Dense::<f32>::new(2048, 1024, &mut Rng::new(0)).unwrap();
        let f = Flatten::new();
        let flat = LayerOps::<f32>::output_shape(&f, &[4, 4, 128]).unwrap();
        assert_eq!(flat, vec![2048]);
        assert_eq!(d.output_shape(&flat).unwrap(), vec![1024]);
        assert!(matches!(d.output_shape(&[2047]), Err(Error::Shape(_))));
    }

    #[test]
    fn flatten_round_trips_gradient_shape() {
        let mut f = Flatten::new();
        let x = Tensor::<f64>::rand_uniform(&mut Rng::new(1), &[2, 3, 4], 0.0, 1.0).unwrap();
        let y = f.forward(&x, Mode::Training, &mut Rng::new(0)).unwrap();
        assert_eq!(y.data(), x.data());
        assert_eq!(f.backward(&y).unwrap(), x);
    }
}
