use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Layout;
use crate::error::{Error, Result};
use crate::model::ArchConfig;
use crate::train::TrainConfig;

pub const DEFAULT_OUT: &str = "runs";

/// Architecture as a preset name (`"paper"`, `"reduced"`) or a full
/// [`ArchConfig`] object.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ModelConfig {
    Preset(Preset),
    Custom(ArchConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Paper,
    Reduced,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Preset(Preset::Paper)
    }
}

impl<'de> Deserialize<'de> for ModelConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        // Deserialized by hand so a bad key inside a custom architecture is
        // reported by name instead of as "no variant matched".
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(name) => match name.as_str() {
                "paper" => Ok(ModelConfig::Preset(Preset::Paper)),
                "reduced" => Ok(ModelConfig::Preset(Preset::Reduced)),
                other => Err(D::Error::custom(format!(
                    "unknown model preset `{other}`, expected `paper`, `reduced` or an architecture object"
                ))),
            },
            other => ArchConfig::deserialize(other).map(ModelConfig::Custom).map_err(D::Error::custom),
        }
    }
}

impl ModelConfig {
    pub fn arch(&self) -> ArchConfig {
        match self {
            ModelConfig::Preset(Preset::Paper) => ArchConfig::paper(),
            ModelConfig::Preset(Preset::Reduced) => ArchConfig::reduced(),
            ModelConfig::Custom(arch) => arch.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_root: Option<PathBuf>,
    /// Class directory name to label (0 or 1).
    pub classes: BTreeMap<String, usize>,
    /// Directories under the data root to ignore.
    pub exclude: Vec<String>,
    pub test_fraction: f64,
    /// Share of the training set held out for validation by `train`.
    pub val_fraction: f64,
    /// Parent directory of run directories; `runs` when unset.
    pub out: Option<PathBuf>,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let layout = Layout::default();
        RunConfig {
            data_root: None,
            classes: layout.classes,
            exclude: layout.exclude,
            test_fraction: 0.2,
            val_fraction: 0.2,
            out: None,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub data_root: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub k: Option<usize>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub retrain_full: bool,
    pub threads: Option<usize>,
}

impl RunConfig {
    /// Defaults, then the file at `path` if given, then `overrides`,
    /// validated as a whole.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut config = match path {
            Some(p) => Self::from_file(p)?,
            None => RunConfig::default(),
        };
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.train.seed = seed;
        }
        if let Some(root) = &o.data_root {
            self.data_root = Some(root.clone());
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        if let Some(k) = o.k {
            self.train.k = k;
        }
        if let Some(b) = o.batch_size {
            self.train.batch_size = b;
        }
        if let Some(m) = o.max_epochs {
            self.train.max_epochs = m;
        }
        if o.retrain_full {
            self.train.retrain_full = true;
        }
        if let Some(t) = o.threads {
            self.train.threads = t;
        }
    }

    pub fn layout(&self) -> Layout {
        Layout {
            classes: self.classes.clone(),
            exclude: self.exclude.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.layout().validate()?;
        for (name, f) in [("test_fraction", self.test_fraction), ("val_fraction", self.val_fraction)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::config(format!("{name} must lie in (0, 1), got {f}")));
            }
        }
        self.train.validate()?;
        let arch = self.model.arch();
        if arch.channels != 1 {
            return Err(Error::config("images are loaded as grayscale; model channels must be 1"));
        }
        arch.layer_specs()?;
        Ok(())
    }

    pub fn data_root(&self) -> Result<&Path> {
        self.data_root
            .as_deref()
            .ok_or_else(|| Error::config("no data root given (use --data-root or `data_root`)"))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    /// The settings that determine results: `out` and the thread count are
    /// cleared.
    pub fn canonical(&self) -> RunConfig {
        let mut c = self.clone();
        c.out = None;
        c.train.threads = 1;
        c
    }

    /// `seed<seed>-<first 12 hex digits of the canonical config's SHA-256>`.
    pub fn run_id(&self) -> String {
        let json = serde_json::to_string(&self.canonical()).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
        format!("seed{}-{hex}", self.train.seed)
    }
}
