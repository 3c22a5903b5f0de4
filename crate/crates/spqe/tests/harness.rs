use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spqe::checkpoint::{Checkpoint, Precision, Weights};
use spqe::core::backbone::BackboneConfig;
use spqe::core::data::{RefKind, ScoreBundle};
use spqe::core::model::{Mode, ModelConfig, Sample, SpqeParams, Strategy};
use spqe::core::saliency::spectral_residual;
use spqe::core::synth::DegradationKind;
use spqe::core::train::TrainConfig;
use spqe::core::Tensor;
use spqe::harness::{
    ablation_cells, ablation_suite, correlation_inputs, correlation_study, cross_dataset, run_benchmark, scatter_series,
    AblationSetup, Scorer, FIXED_WEIGHTS,
};
use spqe::pipeline::Dataset;
use spqe::synth_io::{build_synthetic_manifest, Severities, SynthConfig};

fn samples(seed: u64, n: usize, ref_kind: RefKind, size: usize) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let sr = Tensor::from_fn(3, size, size, |_, _, _| rng.random::<f32>());
            let reference = match ref_kind {
                RefKind::Hr => Some(Tensor::from_fn(3, size, size, |_, _, _| rng.random::<f32>())),
                RefKind::Lr => Some(Tensor::from_fn(3, size / 2, size / 2, |_, _, _| rng.random::<f32>())),
                RefKind::None => None,
            };
            Sample {
                id: format!("{seed}_{i}"),
                saliency: Some(spectral_residual(&sr)),
                sr,
                reference,
                ref_kind,
                scale_factor: 2,
                gt: rng.random(),
            }
        })
        .collect()
}

fn dataset(id: &str, seed: u64, n: usize, ref_kind: RefKind) -> Dataset {
    Dataset {
        id: id.into(),
        samples: samples(seed, n, ref_kind, 32),
    }
}

struct Oracle;

impl Scorer for Oracle {
    fn score(&self, s: &Sample) -> spqe::Result<ScoreBundle> {
        Ok(ScoreBundle {
            s_s: None,
            s_p: s.gt,
            w_p: 1.0,
            s_spqe: s.gt,
        })
    }
    fn method(&self) -> String {
        "oracle".into()
    }
    fn mode(&self) -> String {
        "-".into()
    }
    fn ref_kind(&self) -> RefKind {
        RefKind::None
    }
}

struct Constant;

impl Scorer for Constant {
    fn score(&self, _: &Sample) -> spqe::Result<ScoreBundle> {
        Ok(ScoreBundle {
            s_s: None,
            s_p: 0.3,
            w_p: 1.0,
            s_spqe: 0.3,
        })
    }
    fn method(&self) -> String {
        "constant".into()
    }
    fn mode(&self) -> String {
        "-".into()
    }
    fn ref_kind(&self) -> RefKind {
        RefKind::None
    }
}

fn random_checkpoint(ref_kind: RefKind, mode: Mode, seed: u64) -> Checkpoint {
    let cfg = ModelConfig::new(BackboneConfig::tiny(), ref_kind, 2, mode);
    let mut ckpt = Checkpoint::zeros(cfg.clone(), Precision::Double).unwrap();
    ckpt.weights = Weights::Double(SpqeParams::random(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)));
    ckpt
}

#[test]
fn oracle_predictor_scores_one() {
    let d = [dataset("a", 1, 12, RefKind::None)];
    for fit in [false, true] {
        let b = run_benchmark(&Oracle, &d, "a", fit).unwrap();
        let r = &b.report.rows[0];
        assert_eq!((r.table.as_str(), r.n_samples), ("benchmark", 12));
        assert!((r.plcc.unwrap() - 1.0).abs() < 1e-9 && (r.srcc.unwrap() - 1.0).abs() < 1e-12, "{r:?}");
        assert_eq!(b.report.provenance.logistic_fit, fit);
    }
}

#[test]
fn constant_predictor_flagged() {
    let b = run_benchmark(&Constant, &[dataset("a", 2, 8, RefKind::None)], "a", false).unwrap();
    let r = &b.report.rows[0];
    assert_eq!((r.plcc, r.srcc), (None, None));
    assert!(r.note.contains("zero variance"), "{}", r.note);
    assert!(b.report.to_csv().contains("zero variance"));
    let dir = tempfile::tempdir().unwrap();
    let nested = dir.path().join("a/b");
    b.report.write(&nested, "report").unwrap();
    assert!(nested.join("report.csv").exists());
}

#[test]
fn cross_dataset_matches_benchmark_on_same_data() {
    let ckpt = random_checkpoint(RefKind::Hr, Mode::Full, 3);
    let d = [dataset("x", 4, 10, RefKind::Hr), dataset("y", 5, 10, RefKind::Hr)];
    let bench = run_benchmark(&ckpt, &d[..1], "x", false).unwrap();
    let cross = cross_dataset(&ckpt, "x", &d, false).unwrap();
    assert_eq!(cross.rows.len(), 2);
    assert_eq!(cross.rows[0].srcc, bench.report.rows[0].srcc);
    assert!(cross.rows.iter().all(|r| r.srcc.is_some() && r.note.is_empty()));
    assert_eq!(cross.provenance.checkpoint_id, ckpt.id());
}

#[test]
fn missing_reference_kind_skips_row() {
    let ckpt = random_checkpoint(RefKind::Lr, Mode::Full, 6);
    let d = [dataset("hr_only", 7, 5, RefKind::Hr), dataset("with_lr", 8, 5, RefKind::Lr)];
    let cross = cross_dataset(&ckpt, "train", &d, false).unwrap();
    assert_eq!(cross.rows[0].note, "no LR reference");
    assert_eq!(cross.rows[0].srcc, None);
    assert!(cross.rows[1].srcc.is_some());
    assert!(cross.to_text().contains("no LR reference"));
}

#[test]
fn scatter_series_per_dataset() {
    let ckpt = random_checkpoint(RefKind::Hr, Mode::Full, 9);
    let b = run_benchmark(&ckpt, &[dataset("a", 1, 4, RefKind::Hr), dataset("b", 2, 3, RefKind::Hr)], "a", false).unwrap();
    let s = scatter_series(&b.predictions);
    let names: Vec<&str> = s.iter().map(|x| x.name.as_str()).collect();
    assert_eq!(names, ["a_spqe_vs_gt", "a_sp_vs_spqe", "a_weighted_sp_vs_spqe", "b_spqe_vs_gt", "b_sp_vs_spqe", "b_weighted_sp_vs_spqe"]);
    assert_eq!(s[3].points.len(), 3);
    for (p, (x, y)) in b.predictions.iter().zip(&s[2].points) {
        assert_eq!((*x, *y), (p.bundle.w_p * p.bundle.s_p, p.bundle.s_spqe));
    }
}

#[test]
fn thirteen_ablation_cells() {
    let base = ModelConfig::new(BackboneConfig::tiny(), RefKind::Hr, 2, Mode::Full);
    let cells = ablation_cells(&base);
    let count = |t: &str| cells.iter().filter(|c| c.table == t).count();
    assert_eq!((cells.len(), count("regressor"), count("weight"), count("strategy")), (13, 3, 6, 4));
    let weights: Vec<Mode> = cells.iter().filter(|c| c.table == "weight").map(|c| c.model.mode).collect();
    for (m, w) in weights.iter().zip(FIXED_WEIGHTS) {
        assert_eq!(*m, Mode::FixedWeight(w));
    }
    assert_eq!(cells[3].label, "W_p 0.2 & W_s 0.8");
    assert!(cells.iter().all(|c| c.model.backbone == base.backbone && c.model.ref_kind == base.ref_kind));
}

#[test]
fn ablation_suite_runs_every_cell() {
    let base = ModelConfig::new(BackboneConfig::tiny(), RefKind::Hr, 2, Mode::Full);
    let train = samples(10, 6, RefKind::Hr, 32);
    let val = samples(11, 2, RefKind::Hr, 32);
    let test = dataset("test", 12, 5, RefKind::Hr);
    let config = TrainConfig {
        max_epochs: 1,
        ..TrainConfig::synthetic_benchmark()
    };
    let a = ablation_suite(&AblationSetup {
        train: &train,
        val: &val,
        test: &test,
        base: &base,
        config: &config,
        precision: Precision::Single,
        logistic_fit: false,
        split_seed: Some(1),
    });
    assert_eq!(a.report.rows.len(), 13);
    assert!(a.cells.iter().all(|c| c.outcome.is_ok()));
    assert!(a.report.rows.iter().all(|r| r.srcc.is_some() && r.n_samples == 5), "{:?}", a.report.rows);
    let reused: Vec<Option<usize>> = a.cells.iter().map(|c| c.outcome.as_ref().unwrap().reused_from).collect();
    assert_eq!(reused.iter().filter(|r| r.is_some()).count(), 2);
    assert_eq!(a.row("weight", "adaptive weight").unwrap().srcc, a.row("regressor", "fused score").unwrap().srcc);
    assert_eq!(
        a.row("strategy", "multi-scale, saliency").unwrap().srcc,
        a.row("regressor", "fused score").unwrap().srcc
    );

    let fixed = a.cells.iter().find(|c| c.cell.model.mode == Mode::FixedWeight(0.5)).unwrap();
    for p in &fixed.outcome.as_ref().unwrap().predictions {
        let b = p.bundle;
        assert_eq!(b.w_p, 0.5);
        // fused in single precision
        assert!((b.s_spqe - (b.s_p + b.s_s.unwrap()) / 2.0).abs() <= f32::EPSILON as f64);
    }
    let structure = a.cells.iter().find(|c| c.cell.model.mode == Mode::StructureOnly).unwrap();
    for p in &structure.outcome.as_ref().unwrap().predictions {
        assert_eq!(p.bundle.s_spqe, p.bundle.s_s.unwrap());
    }
}

#[test]
fn failed_cell_keeps_its_row() {
    let base = ModelConfig {
        strategy: Strategy::default(),
        ..ModelConfig::new(BackboneConfig::tiny(), RefKind::Hr, 2, Mode::Full)
    };
    let train = samples(13, 3, RefKind::Hr, 32);
    let test = dataset("test", 14, 3, RefKind::Hr);
    let a = ablation_suite(&AblationSetup {
        train: &train,
        val: &[],
        test: &test,
        base: &base,
        config: &TrainConfig::default(),
        precision: Precision::Single,
        logistic_fit: false,
        split_seed: None,
    });
    assert_eq!(a.report.rows.len(), 13);
    assert!(a.report.rows.iter().all(|r| r.srcc.is_none() && !r.note.is_empty()));
}

#[test]
fn correlation_study_on_a_small_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        n_hr: 2,
        size: 48,
        kinds: vec![DegradationKind::GaussBlur, DegradationKind::BlockQuant, DegradationKind::Noise],
        severities: Severities::Grid(vec![0.2, 0.5, 0.8]),
        ..SynthConfig::benchmark()
    };
    let m = build_synthetic_manifest(dir.path(), &cfg).unwrap();
    let inputs = correlation_inputs(&m).unwrap();
    assert_eq!(inputs.len(), 12);
    let report = correlation_study(&inputs);
    assert_eq!(report.rows.len(), 2 * 2 * 6);
    for family in ["jpeg", "blur"] {
        for against in ["gt", "severity", "PSNR", "SSIM", "GMSD"] {
            let r = report.get(family, "blur_measure", against).unwrap();
            assert_eq!(r.n_samples, 6);
            assert!(r.srcc.is_some(), "{r:?}");
        }
        // five-level MS-SSIM is undefined below 176x176
        let r = report.get(family, "blockiness", "MS-SSIM").unwrap();
        assert!(r.srcc.is_none() && r.note.contains("MS-SSIM"), "{r:?}");
    }
    let two = correlation_study(&inputs[..2]);
    assert_eq!(two.rows.len(), 1);
    assert_eq!(two.rows[0].note, "fewer than 3 samples");
}
