use serde::{Deserialize, Serialize};

use super::Sample;
use crate::tensor::{Rng, Scalar, Tensor};

/// Transforms emitted next to each original sample. Everything is off by
/// default; a zero rotation or translation bound disables that transform.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub hflip: bool,
    pub vflip: bool,
    /// Rotation angle is drawn uniformly from `[-max, max]` degrees.
    pub max_rotation_deg: f64,
    /// Shift is drawn uniformly from `[-max, max]` pixels on each axis.
    pub max_translation_px: usize,
    /// Oversample the minority class until both classes match.
    pub balance: bool,
}

impl AugmentConfig {
    pub fn is_identity(&self) -> bool {
        !self.hflip && !self.vflip && self.max_rotation_deg == 0.0 && self.max_translation_px == 0 && !self.balance
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(0.0..=180.0).contains(&self.max_rotation_deg) {
            return Err(crate::Error::Config(format!(
                "rotation bound must lie in [0, 180] degrees, got {}",
                self.max_rotation_deg
            )));
        }
        Ok(())
    }

    fn transforms(&self) -> usize {
        usize::from(self.hflip)
            + usize::from(self.vflip)
            + usize::from(self.max_rotation_deg > 0.0)
            + usize::from(self.max_translation_px > 0)
    }

    fn apply(&self, which: usize, image: &Tensor<f32>, rng: &mut Rng) -> Tensor<f32> {
        let mut enabled = Vec::with_capacity(4);
        if self.hflip {
            enabled.push(0);
        }
        if self.vflip {
            enabled.push(1);
        }
        if self.max_rotation_deg > 0.0 {
            enabled.push(2);
        }
        if self.max_translation_px > 0 {
            enabled.push(3);
        }
        match enabled[which] {
            0 => hflip(image),
            1 => vflip(image),
            2 => rotate(image, rng.uniform_in(-self.max_rotation_deg, self.max_rotation_deg)),
            _ => {
                let m = self.max_translation_px;
                let mut shift = || rng.below(2 * m + 1) as isize - m as isize;
                let (dx, dy) = (shift(), shift());
                translate(image, dx, dy)
            }
        }
    }
}

fn dims<T: Scalar>(t: &Tensor<T>) -> (usize, usize, usize) {
    let s = t.shape();
    (s[0], s[1], s[2])
}

/// Mirrors an `[H, W, C]` image left to right.
pub fn hflip<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    let (h, w, c) = dims(t);
    let src = t.data();
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        for x in (0..w).rev() {
            out.extend_from_slice(&src[(y * w + x) * c..(y * w + x + 1) * c]);
        }
    }
    Tensor::from_vec(t.shape(), out).expect("same shape")
}

/// Mirrors an `[H, W, C]` image top to bottom.
pub fn vflip<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    let (h, w, c) = dims(t);
    let row = w * c;
    let src = t.data();
    let mut out = Vec::with_capacity(src.len());
    for y in (0..h).rev() {
        out.extend_from_slice(&src[y * row..(y + 1) * row]);
    }
    Tensor::from_vec(t.shape(), out).expect("same shape")
}

/// Rotates about the image center by `degrees` (counter-clockwise on screen),
/// sampling bilinearly; pixels that come from outside the image are zero.
pub fn rotate<T: Scalar>(t: &Tensor<T>, degrees: f64) -> Tensor<T> {
    let (h, w, c) = dims(t);
    let (sin, cos) = degrees.to_radians().sin_cos();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let src = t.data();
    let at = |x: isize, y: isize, ch: usize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            src[(y as usize * w + x as usize) * c + ch].as_f64()
        }
    };
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            // Inverse map: where in the source does this output pixel come from.
            let sx = cos * dx - sin * dy + cx;
            let sy = sin * dx + cos * dy + cy;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            for ch in 0..c {
                let v = (at(x0, y0, ch) * (1.0 - fx) + at(x0 + 1, y0, ch) * fx) * (1.0 - fy)
                    + (at(x0, y0 + 1, ch) * (1.0 - fx) + at(x0 + 1, y0 + 1, ch) * fx) * fy;
                out.push(T::of(v));
            }
        }
    }
    Tensor::from_vec(t.shape(), out).expect("same shape")
}

/// Shifts content by `dx` columns right and `dy` rows down, zero-filling.
pub fn translate<T: Scalar>(t: &Tensor<T>, dx: isize, dy: isize) -> Tensor<T> {
    let (h, w, c) = dims(t);
    let src = t.data();
    let mut out = vec![T::zero(); src.len()];
    for y in 0..h {
        let sy = y as isize - dy;
        if sy < 0 || sy >= h as isize {
            continue;
        }
        for x in 0..w {
            let sx = x as isize - dx;
            if sx < 0 || sx >= w as isize {
                continue;
            }
            let s = (sy as usize * w + sx as usize) * c;
            let d = (y * w + x) * c;
            out[d..d + c].copy_from_slice(&src[s..s + c]);
        }
    }
    Tensor::from_vec(t.shape(), out).expect("same shape")
}

fn derived(sample: &Sample, image: Tensor<f32>) -> Sample {
    Sample {
        image,
        label: sample.label,
        path: sample.path.clone(),
    }
}

/// The original sample followed by one copy per enabled transform.
pub fn augment(sample: &Sample, rng: &mut Rng, config: &AugmentConfig) -> Vec<Sample> {
    let mut out = vec![sample.clone()];
    for which in 0..config.transforms() {
        out.push(derived(sample, config.apply(which, &sample.image, rng)));
    }
    out
}

/// Augments every sample, then, in balance mode, adds randomly transformed
/// copies of random minority-class samples until the class counts match.
pub fn augment_set(samples: &[Sample], rng: &mut Rng, config: &AugmentConfig) -> Vec<Sample> {
    let mut out: Vec<Sample> = samples.iter().flat_map(|s| augment(s, rng, config)).collect();
    if !config.balance {
        return out;
    }
    let count = |label| out.iter().filter(|s| s.label == label).count();
    let (zeros, ones) = (count(0), count(1));
    if zeros == 0 || ones == 0 || zeros == ones {
        return out;
    }
    let minority = usize::from(ones < zeros);
    let pool: Vec<usize> = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.label == minority)
        .map(|(i, _)| i)
        .collect();
    if pool.is_empty() {
        return out;
    }
    let deficit = zeros.abs_diff(ones);
    for _ in 0..deficit {
        let source = &samples[pool[rng.below(pool.len())]];
        let image = match config.transforms() {
            0 => source.image.clone(),
            n => config.apply(rng.below(n), &source.image, rng),
        };
        out.push(derived(source, image));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn sample(label: usize, seed: u64) -> Sample {
        Sample {
            image: Tensor::rand_uniform(&mut Rng::new(seed), &[6, 5, 1], 0.0, 1.0).unwrap(),
            label,
            path: PathBuf::from(format!("{seed}.png")),
        }
    }

    #[test]
    fn identity_config_returns_original() {
        let s = sample(1, 0);
        let out = augment(&s, &mut Rng::new(0), &AugmentConfig::default());
        assert_eq!(out, vec![s]);
    }

    #[test]
    fn flips_are_involutions() {
        let s = sample(0, 1);
        assert_eq!(hflip(&hflip(&s.image)), s.image);
        assert_eq!(vflip(&vflip(&s.image)), s.image);
        assert_ne!(hflip(&s.image), s.image);
        assert_eq!(hflip(&s.image).at(&[2, 0, 0]), s.image.at(&[2, 4, 0]));
        assert_eq!(vflip(&s.image).at(&[0, 3, 0]), s.image.at(&[5, 3, 0]));
    }

    #[test]
    fn zero_rotation_is_identity() {
        let s = sample(0, 2);
        assert_eq!(rotate(&s.image, 0.0), s.image);
    }

    #[test]
    fn quarter_turn_moves_corners() {
        let mut t = Tensor::<f64>::zeros(&[3, 3, 1]).unwrap();
        t.set(&[0, 2, 0], 1.0);
        let r = rotate(&t, 90.0);
        // Top-right corner goes to top-left under a counter-clockwise turn.
        assert!((r.at(&[0, 0, 0]) - 1.0).abs() < 1e-12);
        assert!(r.at(&[0, 2, 0]).abs() < 1e-12);
    }

    #[test]
    fn rotation_zero_fills() {
        let t = Tensor::<f64>::full(&[8, 8, 1], 1.0).unwrap();
        let r = rotate(&t, 15.0);
        assert!(r.at(&[0, 0, 0]) < 1.0);
        assert!((r.at(&[4, 4, 0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn translation_shifts_and_fills() {
        let t = Tensor::<f64>::from_vec(&[2, 3, 1], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let r = translate(&t, 1, 0);
        assert_eq!(r.data(), &[0., 1., 2., 0., 4., 5.]);
        let r = translate(&t, 0, -1);
        assert_eq!(r.data(), &[4., 5., 6., 0., 0., 0.]);
        assert_eq!(translate(&t, 0, 0), t);
    }

    #[test]
    fn every_transform_keeps_the_label() {
        let config = AugmentConfig {
            hflip: true,
            vflip: true,
            max_rotation_deg: 15.0,
            max_translation_px: 10,
            balance: false,
        };
        let s = sample(1, 3);
        let out = augment(&s, &mut Rng::new(3), &config);
        assert_eq!(out.len(), 5);
        assert!(out.iter().all(|o| o.label == 1 && o.image.shape() == s.image.shape()));
    }

    #[test]
    fn balancing_counts() {
        let samples: Vec<Sample> = (0..155).map(|i| sample(1, i)).chain((0..98).map(|i| sample(0, 1000 + i))).collect();
        let config = AugmentConfig {
            hflip: true,
            balance: true,
            ..AugmentConfig::default()
        };
        let out = augment_set(&samples, &mut Rng::new(7), &config);
        let ones = out.iter().filter(|s| s.label == 1).count();
        let zeros = out.iter().filter(|s| s.label == 0).count();
        assert!(ones.abs_diff(zeros) <= 1);
        assert_eq!(ones, 310);

        let plain = AugmentConfig {
            balance: true,
            ..AugmentConfig::default()
        };
        let out = augment_set(&samples, &mut Rng::new(7), &plain);
        assert_eq!(out.iter().filter(|s| s.label == 0).count(), 155);
    }

    #[test]
    fn augmentation_is_seeded() {
        let config = AugmentConfig {
            max_rotation_deg: 10.0,
            max_translation_px: 2,
            ..AugmentConfig::default()
        };
        let s = sample(0, 4);
        assert_eq!(augment(&s, &mut Rng::new(1), &config), augment(&s, &mut Rng::new(1), &config));
    }
}
