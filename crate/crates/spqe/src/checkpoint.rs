//! Checkpoint directories: `config.json` (model configuration),
//! `weights.bin` (named-array container) and `meta.json` (training
//! provenance and score normalisation).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use spqe_core::data::{RefKind, ScoreBundle};
use spqe_core::model::{predict, ModelConfig, Sample, SpqeParams};
use spqe_core::train::TrainConfig;

use crate::container::{collect, install, read_container, to_bytes, write_container, Dtype, NamedArray};
use crate::error::{Error, Result};
use crate::manifest::{ref_kind_tag, ManifestMeta};
use crate::sha256_hex;

pub const FORMAT_VERSION: u32 = 1;
pub const CONFIG_FILE: &str = "config.json";
pub const WEIGHTS_FILE: &str = "weights.bin";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Single,
    Double,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    Single(SpqeParams<f32>),
    Double(SpqeParams<f64>),
}

impl Weights {
    pub fn precision(&self) -> Precision {
        match self {
            Weights::Single(_) => Precision::Single,
            Weights::Double(_) => Precision::Double,
        }
    }

    pub fn arrays(&self) -> Vec<NamedArray> {
        match self {
            Weights::Single(p) => collect(|f| p.visit(f)),
            Weights::Double(p) => collect(|f| p.visit(f)),
        }
    }
}

/// Which records a checkpoint was trained on, so evaluation can hold
/// them out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub seed: u64,
    pub train_frac: f64,
    pub val_frac_of_train: f64,
    pub manifest_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub precision: Precision,
    pub train_seed: Option<u64>,
    pub split: Option<SplitRecord>,
    pub train_config: Option<TrainConfig>,
    pub best_epoch: Option<usize>,
    pub best_val_l1: Option<f64>,
    /// Score range of the training manifest.
    pub normalization: Option<ManifestMeta>,
    pub trained_on: Vec<String>,
}

impl CheckpointMeta {
    pub fn untrained(precision: Precision) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            precision,
            train_seed: None,
            split: None,
            train_config: None,
            best_epoch: None,
            best_val_l1: None,
            normalization: None,
            trained_on: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub weights: Weights,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    /// All-zero heads and backbone: every score and the weight are 0.5.
    pub fn zeros(config: ModelConfig, precision: Precision) -> Result<Self> {
        config.validate()?;
        let weights = match precision {
            Precision::Single => Weights::Single(SpqeParams::zeros(&config)),
            Precision::Double => Weights::Double(SpqeParams::zeros(&config)),
        };
        Ok(Self {
            config,
            weights,
            meta: CheckpointMeta::untrained(precision),
        })
    }

    /// Short digest of the weights.
    pub fn id(&self) -> String {
        sha256_hex(&to_bytes(&self.weights.arrays()))[..16].to_string()
    }

    pub fn config_hash(&self) -> String {
        sha256_hex(config_json(&self.config).as_bytes())[..16].to_string()
    }

    pub fn method_label(&self) -> String {
        format!("SPQE({})", ref_kind_tag(self.config.ref_kind))
    }

    /// Scores one sample. A sample carrying a different reference kind than
    /// the checkpoint was trained with is rejected; samples without any
    /// reference get the no-reference bundle.
    pub fn predict(&self, sample: &Sample) -> Result<ScoreBundle> {
        if sample.ref_kind != RefKind::None && sample.ref_kind != self.config.ref_kind {
            return Err(spqe_core::Error::InvalidArgument(format!(
                "checkpoint expects {} references, sample {} has {}",
                ref_kind_tag(self.config.ref_kind),
                sample.id,
                ref_kind_tag(sample.ref_kind)
            ))
            .into());
        }
        Ok(match &self.weights {
            Weights::Single(p) => predict(p, &self.config, sample)?,
            Weights::Double(p) => predict(p, &self.config, sample)?,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write(CONFIG_FILE, config_json(&self.config))?;
        write_container(&dir.join(WEIGHTS_FILE), &self.weights.arrays())?;
        write(META_FILE, serde_json::to_string_pretty(&self.meta).expect("plain data") + "\n")
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        let config: ModelConfig =
            serde_json::from_str(&read(CONFIG_FILE)?).map_err(|e| Error::format(dir.join(CONFIG_FILE), e.to_string()))?;
        config.validate()?;
        let meta: CheckpointMeta =
            serde_json::from_str(&read(META_FILE)?).map_err(|e| Error::format(dir.join(META_FILE), e.to_string()))?;
        if meta.format_version != FORMAT_VERSION {
            return Err(Error::format(
                dir.join(META_FILE),
                format!("unsupported checkpoint format {}", meta.format_version),
            ));
        }
        let arrays = read_container(&dir.join(WEIGHTS_FILE))?;
        let stored = arrays.first().map_or(Dtype::F32, |a| a.dtype);
        let weights = match stored {
            Dtype::F32 => {
                let mut p = SpqeParams::<f32>::zeros(&config);
                install(arrays, |f| p.visit_mut(f))?;
                Weights::Single(p)
            }
            Dtype::F64 => {
                let mut p = SpqeParams::<f64>::zeros(&config);
                install(arrays, |f| p.visit_mut(f))?;
                Weights::Double(p)
            }
        };
        if weights.precision() != meta.precision {
            return Err(Error::format(
                dir.join(WEIGHTS_FILE),
                format!("weights are {:?} but meta declares {:?}", weights.precision(), meta.precision),
            ));
        }
        Ok(Self { config, weights, meta })
    }
}

fn config_json(config: &ModelConfig) -> String {
    serde_json::to_string_pretty(config).expect("plain data") + "\n"
}
