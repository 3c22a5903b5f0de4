//! Writes the synthetic benchmark to disk as PNGs plus a manifest.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spqe_core::data::{MosDirection, RefKind};
use spqe_core::synth::{degrade, gen_hr, pseudo_mos, quantize_8bit, DegradationKind, DegradationSpec};

use crate::error::{Error, Result};
use crate::imageio::save_png;
use crate::manifest::{save_manifest, DatasetManifest, ManifestMeta, SampleRecord};

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq)]
pub enum Severities {
    /// One uniform draw from `[low, high)` per (image, kind).
    Random { low: f64, high: f64 },
    /// Every listed severity for every (image, kind).
    Grid(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_hr: usize,
    pub size: usize,
    pub scale_factor: usize,
    pub kinds: Vec<DegradationKind>,
    pub severities: Severities,
    /// Reference written into `ref_path`.
    pub ref_kind: RefKind,
    pub dataset_id: String,
}

impl SynthConfig {
    /// 60 images x 5 degradations at 64x64, seed 42.
    pub fn benchmark() -> Self {
        Self {
            seed: 42,
            n_hr: 60,
            size: 64,
            scale_factor: 2,
            kinds: DegradationKind::ALL.to_vec(),
            severities: Severities::Random { low: 0.05, high: 1.0 },
            ref_kind: RefKind::Hr,
            dataset_id: "synthetic".into(),
        }
    }
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Generates images under `out_dir/{hr,lr,sr}` and writes
/// `out_dir/manifest.csv` with `gt` equal to the pseudo-MOS.
pub fn build_synthetic_manifest(out_dir: &Path, config: &SynthConfig) -> Result<DatasetManifest> {
    if config.ref_kind == RefKind::None {
        return Err(Error::Usage("synthetic manifests always carry a reference".into()));
    }
    if let Severities::Random { low, high } = config.severities {
        if !(0.0 <= low && low < high && high <= 1.0) {
            return Err(Error::Usage(format!("severity range [{low}, {high}) must lie in [0, 1]")));
        }
    }
    for dir in ["hr", "lr", "sr"] {
        mkdir(&out_dir.join(dir))?;
    }
    let hrs = gen_hr(config.seed, config.n_hr, config.size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::new();
    for (i, hr) in hrs.iter().enumerate() {
        let hr_path = out_dir.join("hr").join(format!("{i:03}.png"));
        let lr_path = out_dir.join("lr").join(format!("{i:03}.png"));
        save_png(hr, &hr_path)?;
        let mut lr_written = false;
        for &kind in &config.kinds {
            let draws: Vec<(String, f64)> = match &config.severities {
                Severities::Random { low, high } => vec![(format!("{i:03}_{}", kind.tag()), rng.random_range(*low..*high))],
                Severities::Grid(levels) => levels
                    .iter()
                    .enumerate()
                    .map(|(k, &s)| (format!("{i:03}_{}_{k}", kind.tag()), s))
                    .collect(),
            };
            for (id, severity) in draws {
                let spec = DegradationSpec {
                    kind,
                    severity,
                    scale_factor: config.scale_factor,
                    seed: rng.random(),
                };
                let (lr, sr) = degrade(hr, &spec)?;
                if !lr_written {
                    save_png(&quantize_8bit(&lr), &lr_path)?;
                    lr_written = true;
                }
                let sr = quantize_8bit(&sr);
                let gt = pseudo_mos(hr, &sr)?;
                let sr_path = out_dir.join("sr").join(format!("{id}.png"));
                save_png(&sr, &sr_path)?;
                records.push(SampleRecord {
                    sample_id: id,
                    dataset_id: config.dataset_id.clone(),
                    sr_path,
                    ref_path: Some(if config.ref_kind == RefKind::Lr { lr_path.clone() } else { hr_path.clone() }),
                    ref_kind: config.ref_kind,
                    scale_factor: config.scale_factor,
                    mos_raw: gt,
                    gt,
                    sr_method: kind.tag().into(),
                    severity: Some(severity),
                });
            }
        }
    }
    let meta = ManifestMeta {
        mos_min: 0.0,
        mos_max: 1.0,
        mos_direction: MosDirection::HigherBetter,
    };
    let manifest = DatasetManifest::new(records, meta, out_dir.to_path_buf()).map_err(|m| Error::manifest(out_dir, m))?;
    save_manifest(&manifest, &out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
