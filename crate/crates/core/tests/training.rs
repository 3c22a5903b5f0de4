use spqe_core::backbone::BackboneConfig;
use spqe_core::data::RefKind;
use spqe_core::model::{Mode, ModelConfig, Sample};
use spqe_core::synth::{degrade, gen_hr, DegradationKind, DegradationSpec};
use spqe_core::train::{train, TrainConfig};
use spqe_core::Error;

fn dataset(n: usize, gt: impl Fn(usize) -> f64) -> Vec<Sample> {
    gen_hr(31, n, 32)
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, hr)| {
            let kind = DegradationKind::ALL[i % 5];
            let spec = DegradationSpec { kind, severity: 0.5, scale_factor: 2, seed: i as u64 };
            let (_, sr) = degrade(&hr, &spec).unwrap();
            Sample {
                id: format!("t{i}"),
                sr,
                reference: Some(hr),
                ref_kind: RefKind::Hr,
                scale_factor: 2,
                saliency: None,
                gt: gt(i),
            }
        })
        .collect()
}

fn model() -> ModelConfig {
    ModelConfig::new(BackboneConfig::tiny(), RefKind::Hr, 2, Mode::Full)
}

#[test]
fn constant_target_is_fitted() {
    let data = dataset(12, |_| 0.3);
    let config = TrainConfig {
        initial_lr: 1e-2,
        max_epochs: 40,
        score_bias_init: false,
        ..TrainConfig::default()
    };
    let out = train::<f32>(&data[..10], &data[10..], &model(), &config).unwrap();
    assert!(out.initial_val_l1 > 0.1);
    assert!(out.best_val_l1() < 0.01, "{:?}", out.log.last());
}

#[test]
fn same_seed_same_trajectory() {
    let data = dataset(10, |i| 0.2 + 0.07 * i as f64);
    let config = TrainConfig {
        initial_lr: 1e-3,
        max_epochs: 3,
        ..TrainConfig::default()
    };
    let a = train::<f32>(&data[..8], &data[8..], &model(), &config).unwrap();
    let b = train::<f32>(&data[..8], &data[8..], &model(), &config).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.params, b.params);
    let c = train::<f32>(&data[..8], &data[8..], &model(), &TrainConfig { seed: 7, ..config }).unwrap();
    assert_ne!(a.log, c.log);
}

#[test]
fn blow_up_reports_epoch() {
    let data = dataset(6, |i| 0.1 * i as f64);
    let config = TrainConfig {
        initial_lr: 1e38,
        ..TrainConfig::default()
    };
    let err = train::<f32>(&data[..4], &data[4..], &model(), &config).unwrap_err();
    assert!(matches!(err, Error::Divergence { epoch, .. } if epoch >= 1), "{err:?}");
}

#[test]
fn invalid_targets_rejected() {
    let mut data = dataset(6, |_| 0.5);
    data[0].gt = f64::NAN;
    let err = train::<f32>(&data[..4], &data[4..], &model(), &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
}

#[test]
fn empty_partitions_rejected() {
    let data = dataset(3, |_| 0.5);
    assert!(matches!(
        train::<f32>(&data, &[], &model(), &TrainConfig::default()),
        Err(Error::EmptyPartition(_))
    ));
}
