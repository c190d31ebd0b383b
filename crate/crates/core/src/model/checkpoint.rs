//! Checkpoint directories.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/weights/<param-name>.ptf
//! ```
//!
//! The manifest lists the input shape and each layer's kind, hyperparameters
//! and parameter file names. Weights are PTF files in the model's dtype.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::Model;
use crate::error::{Error, Result};
use crate::layers::{LayerOps, LayerSpec};
use crate::tensor::{ptf, Scalar, Tensor};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_DIR: &str = "weights";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestLayer {
    #[serde(flatten)]
    pub spec: LayerSpec,
    #[serde(default)]
    pub params: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub name: String,
    pub dtype: String,
    pub input_shape: Vec<usize>,
    pub layers: Vec<ManifestLayer>,
    pub rng_seed: u64,
    /// Unix seconds.
    pub created_at: u64,
    #[serde(default)]
    pub hyperparameters: serde_json::Value,
    #[serde(default)]
    pub metrics: serde_json::Value,
}

impl Manifest {
    pub fn describe<T: Scalar>(model: &Model<T>) -> Self {
        let names = model.named_params();
        let mut names = names.iter().map(|(n, _)| n.clone());
        let layers = model
            .layers()
            .iter()
            .map(|layer| ManifestLayer {
                spec: layer.spec(),
                params: names.by_ref().take(layer.params().len()).collect(),
            })
            .collect();
        Manifest {
            format_version: FORMAT_VERSION,
            name: model.name().to_string(),
            dtype: T::DTYPE.to_string(),
            input_shape: model.input_shape().to_vec(),
            layers,
            rng_seed: model.seed(),
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            hyperparameters: serde_json::Value::Null,
            metrics: serde_json::Value::Null,
        }
    }
}

/// Writes `model` into `dir`, creating it if needed.
pub fn save_with<T: Scalar>(model: &Model<T>, dir: &Path, manifest: &Manifest) -> Result<()> {
    let weights = dir.join(WEIGHTS_DIR);
    fs::create_dir_all(&weights)?;
    for (name, param) in model.named_params() {
        ptf::write(&weights.join(format!("{name}.ptf")), &param.value)?;
    }
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}

pub fn save<T: Scalar>(model: &Model<T>, dir: &Path) -> Result<()> {
    save_with(model, dir, &Manifest::describe(model))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.clone()),
        _ => Error::Io(e),
    })?;
    // Peek at the version first so an old or future layout reports as such
    // rather than as a parse failure.
    let raw: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::CorruptCheckpoint(format!("manifest is not JSON: {e}")))?;
    let version = raw
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::CorruptCheckpoint("manifest lacks format_version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(Error::VersionMismatch {
            found: version as u32,
            expected: FORMAT_VERSION,
        });
    }
    serde_json::from_value(raw).map_err(|e| Error::CorruptCheckpoint(format!("bad manifest: {e}")))
}

pub fn load<T: Scalar>(dir: &Path) -> Result<(Model<T>, Manifest)> {
    let manifest = read_manifest(dir)?;
    let specs: Vec<LayerSpec> = manifest.layers.iter().map(|l| l.spec.clone()).collect();
    let mut model = Model::<T>::from_specs(&manifest.name, manifest.rng_seed, &manifest.input_shape, &specs)
        .map_err(|e| Error::CorruptCheckpoint(format!("manifest describes an invalid model: {e}")))?;

    let weights = dir.join(WEIGHTS_DIR);
    let mut values: Vec<Tensor<T>> = Vec::new();
    for (layer, entry) in model.layers().iter().zip(&manifest.layers) {
        let expected = layer.params();
        if expected.len() != entry.params.len() {
            return Err(Error::CorruptCheckpoint(format!(
                "{} layer lists {} parameter files, expected {}",
                layer.name(),
                entry.params.len(),
                expected.len()
            )));
        }
        for (param, file) in expected.iter().zip(&entry.params) {
            let tensor: Tensor<T> = ptf::read(&weights.join(format!("{file}.ptf")))?;
            if tensor.shape() != param.value.shape() {
                return Err(Error::ShapeDisagreement {
                    param: file.clone(),
                    expected: param.value.shape().to_vec(),
                    found: tensor.shape().to_vec(),
                });
            }
            values.push(tensor);
        }
    }
    model.restore(&values)?;
    Ok((model, manifest))
}

impl<T: Scalar> Model<T> {
    pub fn save(&self, dir: &Path) -> Result<()> {
        save(self, dir)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(load(dir)?.0)
    }
}
