use std::fs;
use std::path::{Path, PathBuf};

use super::Sample;
use crate::error::{Error, Result};
use crate::tensor::{Rng, Tensor};

/// A `[size, size, 1]` image of faint uniform noise. With `blob` set, a
/// bright Gaussian spot of random position, width and brightness is added.
pub fn blob_image(size: usize, blob: bool, rng: &mut Rng) -> Tensor<f32> {
    let mut data: Vec<f64> = (0..size * size).map(|_| rng.uniform_in(0.0, 0.15)).collect();
    if blob {
        let s = size as f64;
        let cx = rng.uniform_in(0.25 * s, 0.75 * s);
        let cy = rng.uniform_in(0.25 * s, 0.75 * s);
        let sigma = rng.uniform_in(s / 16.0, s / 8.0);
        let amp = rng.uniform_in(0.6, 0.9);
        for y in 0..size {
            for x in 0..size {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                data[y * size + x] += amp * (-d2 / (2.0 * sigma * sigma)).exp();
            }
        }
    }
    let data = data.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect();
    Tensor::from_vec(&[size, size, 1], data).expect("square image")
}

/// `positives` blob images (label 1) followed by `negatives` blank ones
/// (label 0), with paths of the form `yes/0003.png` and `no/0000.png`.
pub fn synthetic_dataset(positives: usize, negatives: usize, size: usize, seed: u64) -> Vec<Sample> {
    let mut rng = Rng::new(seed);
    let mut out = Vec::with_capacity(positives + negatives);
    for (label, n, dir) in [(1, positives, "yes"), (0, negatives, "no")] {
        for i in 0..n {
            out.push(Sample {
                image: blob_image(size, label == 1, &mut rng),
                label,
                path: PathBuf::from(dir).join(format!("{i:04}.png")),
            });
        }
    }
    out
}

/// Writes samples as 8-bit grayscale PNGs under `root`, at each sample's
/// relative path.
pub fn write_image_dir(root: &Path, samples: &[Sample]) -> Result<()> {
    for s in samples {
        let shape = s.image.shape();
        if shape.len() != 3 || shape[2] != 1 {
            return Err(Error::shape(format!("expected a [H, W, 1] image, got {shape:?}")));
        }
        let path = root.join(&s.path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let pixels: Vec<u8> = s.image.data().iter().map(|&v| (v * 255.0).round() as u8).collect();
        image::GrayImage::from_raw(shape[1] as u32, shape[0] as u32, pixels)
            .expect("buffer matches dimensions")
            .save(&path)
            .map_err(|e| Error::Image {
                path: path.clone(),
                reason: e.to_string(),
            })?;
    }
    Ok(())
}
