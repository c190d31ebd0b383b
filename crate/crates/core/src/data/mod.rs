//! Dataset ingestion: a `<root>/<class>/<image>` tree decoded into grayscale
//! `[size, size, 1]` tensors in `[0, 1]`, plus stratified splitting, k-fold
//! plans, augmentation and a synthetic blob-vs-blank generator.

mod augment;
mod split;
mod synthetic;

pub use augment::{augment, augment_set, hflip, rotate, translate, vflip, AugmentConfig};
pub use split::{kfold, split, stratified_kfold, DatasetSplit, FoldPlan};
pub use synthetic::{blob_image, synthetic_dataset, write_image_dir};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_IMAGE_SIZE: usize = 256;
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];
const EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Tensor<f32>,
    pub label: usize,
    pub path: PathBuf,
}

/// Which class directories map to which label, and which directories to
/// ignore entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Layout {
    pub classes: BTreeMap<String, usize>,
    pub exclude: Vec<String>,
}

impl Default for Layout {
    fn default() -> Self {
        Layout {
            classes: BTreeMap::from([("no".to_string(), 0), ("yes".to_string(), 1)]),
            exclude: Vec::new(),
        }
    }
}

impl Layout {
    pub fn validate(&self) -> Result<()> {
        let mut seen = [false; 2];
        for (dir, &label) in &self.classes {
            if label > 1 {
                return Err(Error::config(format!("class `{dir}` maps to label {label}; labels must be 0 or 1")));
            }
            if self.exclude.contains(dir) {
                return Err(Error::config(format!("class `{dir}` is also excluded")));
            }
            seen[label] = true;
        }
        if seen != [true, true] {
            return Err(Error::config("class map must assign both label 0 and label 1"));
        }
        Ok(())
    }

    /// Display name per label: the class directories joined by `/`.
    pub fn class_names(&self) -> [String; 2] {
        let name = |label| {
            self.classes
                .iter()
                .filter(|&(_, &l)| l == label)
                .map(|(d, _)| d.as_str())
                .collect::<Vec<_>>()
                .join("/")
        };
        [name(0), name(1)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    /// Sorted by path.
    pub samples: Vec<Sample>,
    /// Image files that could not be decoded.
    pub skipped: Vec<Skipped>,
}

/// An 8-bit image with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl RawImage {
    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if !(1..=4).contains(&channels) || data.len() != width * height * channels {
            return Err(Error::Data(format!(
                "{width}x{height}x{channels} image needs {} bytes, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(RawImage {
            width,
            height,
            channels,
            data,
        })
    }

    fn from_dynamic(img: DynamicImage) -> Self {
        let (width, height) = (img.width() as usize, img.height() as usize);
        match img.color() {
            ColorType::L8 | ColorType::La8 | ColorType::L16 | ColorType::La16 => RawImage {
                width,
                height,
                channels: 1,
                data: img.to_luma8().into_raw(),
            },
            _ => RawImage {
                width,
                height,
                channels: 3,
                data: img.to_rgb8().into_raw(),
            },
        }
    }
}

/// Grayscale (luminance 0.299/0.587/0.114 for color input), bilinear resize
/// to `size x size`, then scale to `[0, 1]`.
pub fn preprocess(raw: &RawImage, size: usize) -> Result<Tensor<f32>> {
    if raw.width == 0 || raw.height == 0 || size == 0 {
        return Err(Error::Data(format!(
            "cannot resize a {}x{} image to {size}x{size}",
            raw.width, raw.height
        )));
    }
    let gray: Vec<f64> = raw
        .data
        .chunks_exact(raw.channels)
        .map(|px| match raw.channels {
            1 | 2 => f64::from(px[0]),
            _ => LUMA[0] * f64::from(px[0]) + LUMA[1] * f64::from(px[1]) + LUMA[2] * f64::from(px[2]),
        })
        .collect();
    let resized = resize_bilinear(&gray, raw.width, raw.height, size, size);
    let data = resized.iter().map(|&v| (v / 255.0).clamp(0.0, 1.0) as f32).collect();
    Tensor::from_vec(&[size, size, 1], data)
}

/// Bilinear resampling with half-pixel centers and edge clamping.
fn resize_bilinear(src: &[f64], w: usize, h: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    let axis = |out: usize, inp: usize| -> Vec<(usize, usize, f64)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|i| {
                let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let lo = s.floor() as usize;
                (lo, (lo + 1).min(inp - 1), s - lo as f64)
            })
            .collect()
    };
    let xs = axis(out_w, w);
    let ys = axis(out_h, h);
    let mut out = Vec::with_capacity(out_w * out_h);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
            let bottom = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

pub fn decode(path: &Path) -> Result<RawImage> {
    let reader = image::ImageReader::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let img = reader
        .with_guessed_format()?
        .decode()
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    Ok(RawImage::from_dynamic(img))
}

/// Decodes and preprocesses a single image file.
pub fn load_image(path: &Path, size: usize) -> Result<Tensor<f32>> {
    preprocess(&decode(path)?, size)
}

fn is_supported(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn list_files(root: &Path, layout: &Layout) -> Result<Vec<(PathBuf, usize)>> {
    if !root.is_dir() {
        return Err(Error::MissingFile(root.to_path_buf()));
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if layout.exclude.contains(&name) || name.starts_with('.') {
            continue;
        }
        let label = *layout
            .classes
            .get(&name)
            .ok_or_else(|| Error::UnknownClass(name.clone()))?;
        for file in fs::read_dir(entry.path())? {
            let path = file?.path();
            if path.is_file() && is_supported(&path) {
                files.push((path, label));
            }
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every supported image under the class directories of `root`,
/// resized to `size`. Files that fail to decode are skipped and listed in
/// [`Dataset::skipped`]. With `threads > 1` files are decoded concurrently;
/// the output order is the sorted path order either way.
pub fn load_directory(root: &Path, layout: &Layout, size: usize, threads: usize) -> Result<Dataset> {
    layout.validate()?;
    let files = list_files(root, layout)?;
    let load = |(path, label): &(PathBuf, usize)| match load_image(path, size) {
        Ok(image) => Ok(Sample {
            image,
            label: *label,
            path: path.clone(),
        }),
        Err(e) => Err(Skipped {
            path: path.clone(),
            reason: e.to_string(),
        }),
    };
    let results: Vec<std::result::Result<Sample, Skipped>> = if threads > 1 && files.len() > 1 {
        let chunk = files.len().div_ceil(threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = files
                .chunks(chunk)
                .map(|part| s.spawn(move || part.iter().map(load).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("decoder thread panicked"))
                .collect()
        })
    } else {
        files.iter().map(load).collect()
    };
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(s) => skipped.push(s),
        }
    }
    if samples.is_empty() {
        let mut msg = format!("no readable images under {}", root.display());
        if let Some(first) = skipped.first() {
            msg += &format!(
                " ({} unreadable, first {}: {})",
                skipped.len(),
                first.path.display(),
                first.reason
            );
        }
        return Err(Error::EmptyDataset(msg));
    }
    Ok(Dataset { samples, skipped })
}

pub fn labels(samples: &[Sample]) -> Vec<usize> {
    samples.iter().map(|s| s.label).collect()
}

pub fn select(samples: &[Sample], indices: &[usize]) -> Vec<Sample> {
    indices.iter().map(|&i| samples[i].clone()).collect()
}

/// One row of the optional dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub path: String,
    pub label: usize,
    pub split: String,
    pub fold: Option<usize>,
}

/// Writes `path,label,split,fold` rows; `fold` is empty for test samples.
pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Data(format!("csv: {other:?}")),
    }
}
