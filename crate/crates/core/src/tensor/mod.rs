//! Dense row-major tensors.
//!
//! Image-like tensors use channels-last `[H, W, C]` order, so the shape of the
//! first convolution's output prints as `254 x 254 x 16`.

pub mod ptf;
mod rng;
mod scalar;

pub use rng::{derive_seed, Rng};
pub use scalar::Scalar;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

fn checked_len(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::shape("tensor rank must be at least 1"));
    }
    if let Some(bad) = shape.iter().position(|&d| d == 0) {
        return Err(Error::shape(format!(
            "extent {bad} of shape {shape:?} is zero"
        )));
    }
    Ok(shape.iter().product())
}

/// Formats a shape the way layer tables print it: `254 x 254 x 16`.
pub fn shape_string(shape: &[usize]) -> String {
    shape
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(" x ")
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Result<Self> {
        let len = checked_len(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![value; len],
        })
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let len = checked_len(shape)?;
        if len != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {len} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Rank-1 tensor over `values`. Panics on an empty slice.
    pub fn vector(values: &[T]) -> Self {
        Self::from_vec(&[values.len()], values.to_vec()).expect("non-empty vector")
    }

    pub fn rand_uniform(rng: &mut Rng, shape: &[usize], lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::config(format!(
                "uniform bounds must satisfy lo < hi, got [{lo}, {hi})"
            )));
        }
        let len = checked_len(shape)?;
        let data = (0..len).map(|_| T::of(rng.uniform_in(lo, hi))).collect();
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn rand_normal(rng: &mut Rng, shape: &[usize], mean: f64, stddev: f64) -> Result<Self> {
        if stddev.is_nan() || stddev < 0.0 {
            return Err(Error::config(format!(
                "normal stddev must be non-negative, got {stddev}"
            )));
        }
        let len = checked_len(shape)?;
        let data = if stddev == 0.0 {
            vec![T::of(mean); len]
        } else {
            (0..len)
                .map(|_| T::of(mean + stddev * rng.normal()))
                .collect()
        };
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn reshape(self, new_shape: &[usize]) -> Result<Self> {
        let len = checked_len(new_shape)?;
        if len != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} ({} elements) into {new_shape:?} ({len} elements)",
                self.shape,
                self.data.len()
            )));
        }
        Ok(Tensor {
            shape: new_shape.to_vec(),
            data: self.data,
        })
    }

    /// Matrix product of `[m, k]` and `[k, n]`.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let (m, k) = match self.shape[..] {
            [m, k] => (m, k),
            _ => return Err(Error::shape(format!("matmul lhs must be rank 2, got {:?}", self.shape))),
        };
        let (k2, n) = match other.shape[..] {
            [k2, n] => (k2, n),
            _ => return Err(Error::shape(format!("matmul rhs must be rank 2, got {:?}", other.shape))),
        };
        if k != k2 {
            return Err(Error::shape(format!(
                "matmul inner extents differ: {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                let b_row = &other.data[p * n..(p + 1) * n];
                for (o, &b) in row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Tensor::from_vec(&[m, n], out)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    /// Index of the largest element; the first one wins on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        best
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn scale(&mut self, factor: T) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self += other`, elementwise.
    pub fn add_assign(&mut self, other: &Tensor<T>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "elementwise add of {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Element at a multi-index. Panics when out of range.
    pub fn at(&self, index: &[usize]) -> T {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: T) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.shape.len(), "index rank");
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| {
                assert!(i < d, "index {i} out of range for extent {d}");
                acc * d + i
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::tensor::Rng;

    #[test]
    fn zeros_has_requested_shape() {
        let t = Tensor::<f32>::zeros(&[2, 2]).unwrap();
        assert_eq!(t.shape(), &[2, 2]);
        assert_eq!(t.data(), &[0.0; 4]);
        assert_eq!(Tensor::<f32>::zeros(&[1]).unwrap().data(), &[0.0]);
    }

    #[test]
    fn zero_extent_is_rejected() {
        assert!(matches!(Tensor::<f32>::zeros(&[2, 0]), Err(Error::Shape(_))));
    }

    #[test]
    fn flatten_reshape_matches_layer_table() {
        let t = Tensor::<f32>::zeros(&[4, 4, 128]).unwrap().reshape(&[2048]).unwrap();
        assert_eq!(t.shape(), &[2048]);
    }

    #[test]
    fn reshape_preserves_order() {
        let t = Tensor::from_vec(&[6], vec![1.0f64, 2., 3., 4., 5., 6.]).unwrap();
        let r = t.clone().reshape(&[2, 3]).unwrap();
        assert_eq!(r.data(), t.data());
        assert_eq!(r.at(&[1, 0]), 4.0);
    }

    #[test]
    fn reshape_length_mismatch() {
        let t = Tensor::<f32>::zeros(&[4]).unwrap();
        assert!(matches!(t.reshape(&[3]), Err(Error::Shape(_))));
    }

    #[test]
    fn matmul_identity_and_dot() {
        let eye = Tensor::from_vec(&[2, 2], vec![1.0f64, 0., 0., 1.]).unwrap();
        let m = Tensor::from_vec(&[2, 2], vec![1.0f64, 2., 3., 4.]).unwrap();
        assert_eq!(eye.matmul(&m).unwrap(), m);

        let a = Tensor::from_vec(&[1, 2], vec![1.0f64, 2.]).unwrap();
        let b = Tensor::from_vec(&[2, 1], vec![3.0f64, 4.]).unwrap();
        // 1*3 + 2*4
        assert_eq!(a.matmul(&b).unwrap().data(), &[11.0]);
    }

    #[test]
    fn matmul_mismatch() {
        let a = Tensor::<f64>::zeros(&[2, 3]).unwrap();
        assert!(matches!(a.matmul(&a), Err(Error::Shape(_))));
    }

    #[test]
    fn degenerate_normal_is_mean() {
        let mut rng = Rng::new(1);
        let t = Tensor::<f32>::rand_normal(&mut rng, &[4, 4, 128], 0.0, 0.0).unwrap();
        assert!(t.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_is_seed_deterministic() {
        let a = Tensor::<f32>::rand_uniform(&mut Rng::new(5), &[3, 7], -1.0, 1.0).unwrap();
        let b = Tensor::<f32>::rand_uniform(&mut Rng::new(5), &[3, 7], -1.0, 1.0).unwrap();
        assert_eq!(a, b);
        assert!(a.data().iter().all(|&v| (-1.0..1.0).contains(&v)));
    }

    #[test]
    fn invalid_bounds() {
        let mut rng = Rng::new(1);
        assert!(Tensor::<f32>::rand_uniform(&mut rng, &[2], 1.0, 1.0).is_err());
        assert!(Tensor::<f32>::rand_normal(&mut rng, &[2], 0.0, -1.0).is_err());
    }

    #[test]
    fn normal_sample_moments() {
        // Standard error of the mean at n=10^4 is 0.01; +-0.05 is five of them.
        let t = Tensor::<f64>::rand_normal(&mut Rng::new(2024), &[10_000], 0.0, 1.0).unwrap();
        let n = t.len() as f64;
        let mean = t.sum() / n;
        let var = t.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.05, "stddev {}", var.sqrt());
    }

    fn int_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor<f64>> {
        proptest::collection::vec(-8i32..=8, rows * cols).prop_map(move |v| {
            Tensor::from_vec(&[rows, cols], v.into_iter().map(f64::from).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn reshape_round_trip(data in proptest::collection::vec(-1e3f64..1e3, 24), pick in 0usize..4) {
            let shapes: [&[usize]; 4] = [&[24], &[2, 12], &[2, 3, 4], &[4, 3, 2]];
            let t = Tensor::from_vec(&[6, 4], data).unwrap();
            let back = t.clone().reshape(shapes[pick]).unwrap().reshape(&[6, 4]).unwrap();
            prop_assert_eq!(back, t);
        }

        #[test]
        fn matmul_is_associative_on_small_integers(
            (a, b, c) in (1usize..=4, 1usize..=4, 1usize..=4, 1usize..=4)
                .prop_flat_map(|(m, k, l, n)| (int_matrix(m, k), int_matrix(k, l), int_matrix(l, n)))
        ) {
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn rand_normal_replays_bitwise(seed in any::<u64>()) {
            let a = Tensor::<f32>::rand_normal(&mut Rng::new(seed), &[33], 0.5, 2.0).unwrap();
            let b = Tensor::<f32>::rand_normal(&mut Rng::new(seed), &[33], 0.5, 2.0).unwrap();
            let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&a), bits(&b));
        }
    }
}
