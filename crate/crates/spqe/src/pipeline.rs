//! Glue between manifests on disk and the in-memory training and
//! prediction API.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spqe_core::data::{RefKind, SplitSpec};
use spqe_core::model::{ModelConfig, Sample, SpqeParams};
use spqe_core::saliency::spectral_residual;
use spqe_core::train::{init_params, train, train_from, EpochLog, TrainConfig, TrainOutcome};

use crate::checkpoint::{Checkpoint, CheckpointMeta, Precision, SplitRecord, Weights};
use crate::container::{load_pretrained, Element};
use crate::error::{Error, Result};
use crate::imageio::{load_image, load_saliency, saliency_sidecar};
use crate::manifest::{DatasetManifest, SampleRecord};

/// Reads one record's images. The saliency map comes from a
/// `<sample_id>.sal.png` sidecar beside the manifest when present and is
/// computed with the spectral-residual method otherwise.
pub fn load_sample(record: &SampleRecord, manifest_dir: &Path) -> Result<Sample> {
    let sr = load_image(&record.sr_path)?;
    let reference = match (record.ref_kind, &record.ref_path) {
        (RefKind::None, _) => None,
        (_, Some(p)) => Some(load_image(p)?),
        (_, None) => return Err(spqe_core::Error::MissingReference(record.sample_id.clone()).into()),
    };
    let sidecar = saliency_sidecar(manifest_dir, &record.sample_id);
    let saliency = if sidecar.exists() {
        load_saliency(&sidecar, (sr.height(), sr.width()))?
    } else {
        spectral_residual(&sr)
    };
    Ok(Sample {
        id: record.sample_id.clone(),
        sr,
        reference,
        ref_kind: record.ref_kind,
        scale_factor: record.scale_factor,
        saliency: Some(saliency),
        gt: record.gt,
    })
}

pub fn load_samples(manifest: &DatasetManifest) -> Result<Vec<Sample>> {
    manifest.records.iter().map(|r| load_sample(r, &manifest.root)).collect()
}

/// Samples of one dataset id.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub id: String,
    pub samples: Vec<Sample>,
}

/// Loads a manifest grouped by `dataset_id`, in sorted id order.
pub fn load_datasets(manifest: &DatasetManifest) -> Result<Vec<Dataset>> {
    let samples = load_samples(manifest)?;
    Ok(group_by_dataset(manifest, samples))
}

pub fn group_by_dataset(manifest: &DatasetManifest, samples: Vec<Sample>) -> Vec<Dataset> {
    let mut out: Vec<Dataset> = manifest
        .dataset_ids()
        .into_iter()
        .map(|id| Dataset { id, samples: Vec::new() })
        .collect();
    for (r, s) in manifest.records.iter().zip(samples) {
        let d = out.iter_mut().find(|d| d.id == r.dataset_id).expect("id collected above");
        d.samples.push(s);
    }
    out
}

/// Held-out records of a manifest when it is the one the checkpoint was
/// trained on; the whole manifest otherwise.
pub fn evaluation_subset(ckpt: &Checkpoint, manifest: &DatasetManifest) -> Result<(DatasetManifest, bool)> {
    match &ckpt.meta.split {
        Some(s) if s.manifest_fingerprint == manifest.fingerprint() => {
            let spec = SplitSpec {
                seed: s.seed,
                train_frac: s.train_frac,
                val_frac_of_train: s.val_frac_of_train,
            };
            Ok((manifest.split(&spec)?.2, true))
        }
        _ => Ok((manifest.clone(), false)),
    }
}

pub struct Trained {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
    pub initial_val_l1: f64,
    pub stopped_early: bool,
}

fn run<T: Element>(
    train_set: &[Sample],
    val_set: &[Sample],
    model: &ModelConfig,
    config: &TrainConfig,
    pretrained: Option<&Path>,
) -> Result<TrainOutcome<T>> {
    let Some(path) = pretrained else {
        return Ok(train::<T>(train_set, val_set, model, config)?);
    };
    let backbone = load_pretrained::<T>(path, &model.backbone)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init_params::<T>(train_set, model, config, &mut rng);
    params.backbone = backbone;
    Ok(train_from(params, train_set, val_set, model, config, &mut rng)?)
}

fn package<T: Element>(
    outcome: TrainOutcome<T>,
    model: &ModelConfig,
    config: &TrainConfig,
    precision: Precision,
    wrap: fn(SpqeParams<T>) -> Weights,
) -> Trained {
    let meta = CheckpointMeta {
        train_seed: Some(config.seed),
        train_config: Some(config.clone()),
        best_epoch: Some(outcome.best_epoch),
        best_val_l1: Some(outcome.best_val_l1()),
        ..CheckpointMeta::untrained(precision)
    };
    Trained {
        checkpoint: Checkpoint {
            config: model.clone(),
            weights: wrap(outcome.params),
            meta,
        },
        log: outcome.log,
        initial_val_l1: outcome.initial_val_l1,
        stopped_early: outcome.stopped_early,
    }
}

/// Trains on in-memory samples and packages the best-validation
/// parameters as a checkpoint. `pretrained` names a backbone container.
pub fn train_samples(
    train_set: &[Sample],
    val_set: &[Sample],
    model: &ModelConfig,
    config: &TrainConfig,
    precision: Precision,
    pretrained: Option<&Path>,
) -> Result<Trained> {
    Ok(match precision {
        Precision::Single => package(
            run::<f32>(train_set, val_set, model, config, pretrained)?,
            model,
            config,
            precision,
            Weights::Single,
        ),
        Precision::Double => package(
            run::<f64>(train_set, val_set, model, config, pretrained)?,
            model,
            config,
            precision,
            Weights::Double,
        ),
    })
}

/// Splits a manifest, trains on its train/val parts and records the split
/// in the checkpoint.
pub fn train_manifest(
    manifest: &DatasetManifest,
    split: &SplitSpec,
    model: &ModelConfig,
    config: &TrainConfig,
    precision: Precision,
    pretrained: Option<&Path>,
) -> Result<Trained> {
    let (tr, va, _) = manifest.split(split)?;
    let mut trained = train_samples(&load_samples(&tr)?, &load_samples(&va)?, model, config, precision, pretrained)?;
    let meta = &mut trained.checkpoint.meta;
    meta.split = Some(SplitRecord {
        seed: split.seed,
        train_frac: split.train_frac,
        val_frac_of_train: split.val_frac_of_train,
        manifest_fingerprint: manifest.fingerprint(),
    });
    meta.normalization = Some(manifest.meta);
    meta.trained_on = manifest.dataset_ids();
    Ok(trained)
}

/// `epoch,train_l1,val_l1,lr`
pub fn training_log_csv(log: &[EpochLog]) -> String {
    let mut s = String::from("epoch,train_l1,val_l1,lr\n");
    for e in log {
        s.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_l1, e.val_l1, e.lr));
    }
    s
}

pub fn write_training_log(log: &[EpochLog], path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(training_log_csv(log).as_bytes()).map_err(|e| Error::io(path, e))
}

/// Parses a training log written by [`write_training_log`].
pub fn read_training_log(path: &Path) -> Result<Vec<EpochLog>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| Error::format(path, e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            row.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::format(path, format!("bad value in column {i}")))
        };
        out.push(EpochLog {
            epoch: num(0)? as usize,
            train_l1: num(1)?,
            val_l1: num(2)?,
            lr: num(3)?,
        });
    }
    Ok(out)
}
