//! Acceptance suite A1-A9. Runs sequentially, prints one PASS/FAIL/SKIP
//! line per criterion and exits nonzero when any criterion fails.
//!
//! A9 runs only when `SPQE_REAL_MANIFEST` names a manifest over a real
//! dataset; `SPQE_REAL_CROSS` may list further manifests separated by the
//! platform path separator, and `SPQE_REAL_CONFIG` a training config file.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spqe::checkpoint::{Checkpoint, Precision, Weights};
use spqe::cli::run_with;
use spqe::core::backbone::BackboneConfig;
use spqe::core::correlation::{plcc, srcc};
use spqe::core::data::RefKind;
use spqe::core::gradcheck::{check_gradients, jitter_biases};
use spqe::core::metrics::{gmsd, ms_ssim, psnr, ssim};
use spqe::core::model::{fuse_scores, Mode, ModelConfig, Sample, SpqeParams};
use spqe::core::saliency::spectral_residual;
use spqe::core::structure::softmax;
use spqe::core::synth::{gen_hr, DegradationKind};
use spqe::core::train::{train, EarlyStopping, PlateauSchedule, TrainConfig};
use spqe::core::Tensor;
use spqe::harness::{ablation_suite, correlation_inputs, correlation_study, AblationSetup, FIXED_WEIGHTS};
use spqe::manifest::load_manifest;
use spqe::pipeline::{load_samples, read_training_log, Dataset};
use spqe::synth_io::{build_synthetic_manifest, Severities, SynthConfig};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(cond: bool, detail: String) -> Verdict {
    if cond {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

struct Suite {
    failed: usize,
    passed: usize,
    skipped: usize,
}

impl Suite {
    fn run(&mut self, id: &str, title: &str, f: impl FnOnce() -> Verdict) {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::Fail(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match v {
            Verdict::Pass(d) => {
                self.passed += 1;
                ("PASS", d)
            }
            Verdict::Fail(d) => {
                self.failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => {
                self.skipped += 1;
                ("SKIP", d)
            }
        };
        println!("{id} {tag} {title}: {detail} [{secs:.1}s]");
    }
}

fn cli(args: &[&str]) -> Result<String, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_with(std::iter::once("spqe").chain(args.iter().copied()), &mut out, &mut err);
    if code == 0 {
        Ok(String::from_utf8_lossy(&out).into_owned())
    } else {
        Err(format!("{args:?} exited {code}: {}", String::from_utf8_lossy(&err)))
    }
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    r.records().map(|x| x.unwrap()).collect()
}

fn csv_header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(String::from).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let i = csv_header(path).iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    csv_rows(path).iter().map(|r| r[i].to_string()).collect()
}

/// One synth -> train -> eval run of the synthetic benchmark through the CLI.
struct BenchmarkRun {
    root: PathBuf,
    wall: Duration,
    srcc: f64,
    plcc: f64,
    n: usize,
    epochs: usize,
}

impl BenchmarkRun {
    fn data(&self) -> PathBuf {
        self.root.join("data")
    }
    fn manifest(&self) -> PathBuf {
        self.data().join("manifest.csv")
    }
    fn ckpt(&self) -> PathBuf {
        self.root.join("ckpt")
    }
    fn eval(&self) -> PathBuf {
        self.root.join("eval")
    }
}

fn benchmark_run(root: &Path) -> Result<BenchmarkRun, String> {
    let start = Instant::now();
    let data = root.join("data");
    let (ckpt, eval) = (root.join("ckpt"), root.join("eval"));
    cli(&["synth", "--out-dir", s(&data), "--seed", "42", "--n-hr", "60", "--size", "64"])?;
    let config = data.join("train_config.json");
    cli(&[
        "train",
        "--manifest",
        s(&data.join("manifest.csv")),
        "--out-dir",
        s(&ckpt),
        "--config",
        s(&config),
        "--seed",
        "42",
        "--mode",
        "FULL",
    ])?;
    cli(&["eval", "--ckpt", s(&ckpt), "--manifest", s(&data.join("manifest.csv")), "--out-dir", s(&eval)])?;
    let wall = start.elapsed();
    let report = eval.join("report.csv");
    let get = |name: &str| -> f64 { column(&report, name)[0].parse().unwrap_or(f64::NAN) };
    Ok(BenchmarkRun {
        root: root.to_path_buf(),
        wall,
        srcc: get("srcc"),
        plcc: get("plcc"),
        n: get("n_samples") as usize,
        epochs: read_training_log(&ckpt.join("training_log.csv")).map_err(|e| e.to_string())?.len(),
    })
}

fn a1(run: &Result<BenchmarkRun, String>) -> Verdict {
    let r = match run {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(e.clone()),
    };
    let manifest = load_manifest(&r.manifest()).unwrap();
    let detail = format!(
        "{} samples, {} epochs, test n={}, SRCC {:.4}, PLCC {:.4}, wall {:.1}s",
        manifest.len(),
        r.epochs,
        r.n,
        r.srcc,
        r.plcc,
        r.wall.as_secs_f64()
    );
    check(
        manifest.len() == 300 && r.n == 60 && r.epochs <= 30 && r.srcc >= 0.80 && r.plcc >= 0.80 && r.wall <= Duration::from_secs(20 * 60),
        detail,
    )
}

fn gradient_batch(rng: &mut ChaCha8Rng, ref_kind: RefKind) -> Vec<Sample> {
    (0..2)
        .map(|i| {
            let sr = Tensor::from_fn(3, 8, 8, |_, _, _| rng.random::<f32>());
            let reference = match ref_kind {
                RefKind::Hr => Some(Tensor::from_fn(3, 8, 8, |_, _, _| rng.random::<f32>())),
                RefKind::Lr => Some(Tensor::from_fn(3, 4, 4, |_, _, _| rng.random::<f32>())),
                RefKind::None => None,
            };
            Sample {
                id: format!("g{i}"),
                saliency: Some(spectral_residual(&sr)),
                sr,
                reference,
                ref_kind,
                scale_factor: 2,
                gt: [0.1, 0.9][i],
            }
        })
        .collect()
}

fn a2() -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for (ref_kind, seed) in [(RefKind::Hr, 21), (RefKind::Lr, 22)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = ModelConfig::new(BackboneConfig::tiny(), ref_kind, 2, Mode::Full);
        let mut params = SpqeParams::<f64>::random(&config, &mut rng);
        jitter_biases(&mut params, &mut rng, 0.05);
        let batch = gradient_batch(&mut rng, ref_kind);
        let refs: Vec<&Sample> = batch.iter().collect();
        let report = check_gradients(&params, &config, &refs, 1e-4, 1e-7, 1e-7, 1e-4).unwrap();
        ok &= report.failures.is_empty() && report.checked == params.num_params();
        parts.push(format!(
            "{ref_kind:?}: {} params, max rel err {:.2e}, {} failures",
            report.checked,
            report.max_rel_error,
            report.failures.len()
        ));
    }
    check(ok, parts.join("; "))
}

fn a3(run: &Result<BenchmarkRun, String>) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad = 0usize;
    for _ in 0..10_000 {
        let (sp, ss): (f64, f64) = (rng.random(), rng.random());
        let w: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
        let v = fuse_scores(sp, ss, w).unwrap();
        bad += usize::from(!(v >= sp.min(ss) && v <= sp.max(ss)));
        let logits: Vec<f64> = (0..5).map(|_| rng.random_range(-30.0..30.0)).collect();
        let ws = softmax(&logits);
        bad += usize::from((ws.iter().sum::<f64>() - 1.0).abs() > 1e-9 || ws.iter().any(|&x| x <= 0.0));
    }
    let r = match run {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(format!("no benchmark predictions: {e}")),
    };
    let preds = r.eval().join("predictions.csv");
    let num = |name: &str| -> Vec<f64> { column(&preds, name).iter().map(|v| v.parse().unwrap()).collect() };
    let (s_s, s_p, w_p, s_spqe) = (num("s_s"), num("s_p"), num("w_p"), num("s_spqe"));
    let mut bad_pred = 0usize;
    for i in 0..s_p.len() {
        let inside = s_spqe[i] >= s_p[i].min(s_s[i]) && s_spqe[i] <= s_p[i].max(s_s[i]);
        bad_pred += usize::from(!inside || !(w_p[i] > 0.0 && w_p[i] < 1.0));
    }
    let ckpt = Checkpoint::load(&r.ckpt()).unwrap();
    let params: SpqeParams<f64> = match &ckpt.weights {
        Weights::Single(p) => p.cast(),
        Weights::Double(p) => p.clone(),
    };
    let ws = params.scale_weights.weights();
    let sum = ws.iter().sum::<f64>();
    let trained_ok = (sum - 1.0).abs() <= 1e-9 && ws.iter().all(|&x| x > 0.0);
    check(
        bad == 0 && bad_pred == 0 && s_p.len() == 60 && trained_ok,
        format!(
            "10000 random triples and logit vectors: {bad} violations; {} benchmark predictions: {bad_pred} violations; trained scale weights sum {sum:.12}",
            s_p.len()
        ),
    )
}

fn pearson_oracle(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for i in 0..a.len() {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Average rank of each element, counting smaller and equal entries directly.
fn rank_oracle(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn a4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    let mut mismatched = 0;
    for i in 0..1000 {
        let n = rng.random_range(3..=50);
        let ties = i % 2 == 1;
        let mut draw = || if ties { rng.random_range(0..5) as f64 } else { rng.random::<f64>() };
        let p: Vec<f64> = (0..n).map(|_| draw()).collect();
        let g: Vec<f64> = (0..n).map(|_| draw()).collect();
        let s_o = pearson_oracle(&rank_oracle(&p), &rank_oracle(&g));
        let p_o = pearson_oracle(&p, &g);
        match (srcc(&p, &g), plcc(&p, &g, false)) {
            (Ok(sv), Ok(pv)) => {
                worst = worst.max((sv - s_o).abs()).max((pv - p_o).abs());
                compared += 1;
            }
            // only degenerate inputs may be rejected
            _ => mismatched += usize::from(s_o.is_finite() && p_o.is_finite()),
        }
    }
    let hand = srcc(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    check(
        worst <= 1e-12 && mismatched == 0 && compared >= 950 && (hand - 0.9487).abs() <= 1e-4,
        format!("{compared}/1000 vectors compared, max deviation {worst:.1e}, hand case {hand:.6}"),
    )
}

fn a5() -> Verdict {
    let images = gen_hr(5, 20, 192).unwrap();
    let mut bad = Vec::new();
    for (i, x) in images.iter().enumerate() {
        let v = (ssim(x, x).unwrap(), ms_ssim(x, x).unwrap(), gmsd(x, x).unwrap(), psnr(x, x).unwrap());
        if !(v.0 == 1.0 && (v.1 - 1.0).abs() <= 1e-12 && v.2 == 0.0 && v.3 == f64::INFINITY) {
            bad.push(format!("image {i}: {v:?}"));
        }
    }
    let c1 = (0.01f64 * 1.0).powi(2);
    let closed = ssim(&Tensor::filled(3, 64, 64, 0.0f32), &Tensor::filled(3, 64, 64, 1.0f32)).unwrap();
    let dev = (closed - c1 / (1.0 + c1)).abs();
    check(
        bad.is_empty() && dev <= 1e-9,
        format!("20 images: {} violations {bad:?}; constant 0 vs 1 SSIM {closed:.3e} (closed form off by {dev:.1e})", bad.len()),
    )
}

fn a6(run: &Result<BenchmarkRun, String>) -> Verdict {
    let r = match run {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(format!("no benchmark: {e}")),
    };
    let manifest = load_manifest(&r.manifest()).unwrap();
    let ckpt = Checkpoint::load(&r.ckpt()).unwrap();
    let split = ckpt.meta.split.clone().unwrap();
    let spec = spqe::core::data::SplitSpec {
        seed: split.seed,
        train_frac: split.train_frac,
        val_frac_of_train: split.val_frac_of_train,
    };
    let (tr, va, te) = manifest.split(&spec).unwrap();
    let test = Dataset {
        id: "synthetic".into(),
        samples: load_samples(&te).unwrap(),
    };
    let config = ckpt.meta.train_config.clone().unwrap();
    let ablation = ablation_suite(&AblationSetup {
        train: &load_samples(&tr).unwrap(),
        val: &load_samples(&va).unwrap(),
        test: &test,
        base: &ckpt.config,
        config: &config,
        precision: Precision::Single,
        logistic_fit: false,
        split_seed: Some(spec.seed),
    });
    let out = r.root.join("ablation");
    ablation.report.write(&out, "ablation").unwrap();
    for line in ablation.report.to_text().lines() {
        println!("    {line}");
    }
    let rows = &ablation.report.rows;
    let populated = rows.iter().all(|x| x.srcc.is_some() && x.n_samples == 60);
    let adaptive = ablation.row("weight", "adaptive weight").and_then(|x| x.srcc).unwrap_or(f64::NAN);
    let half = ablation.row("weight", "W_p 0.5 & W_s 0.5").and_then(|x| x.srcc).unwrap_or(f64::NAN);
    let best_fixed = FIXED_WEIGHTS
        .iter()
        .filter_map(|w| ablation.row("weight", &format!("W_p {w} & W_s {}", (10.0 - w * 10.0).round() / 10.0)))
        .filter_map(|x| x.srcc)
        .fold(f64::NEG_INFINITY, f64::max);
    let mean_fusion = ablation
        .cells
        .iter()
        .find(|c| c.cell.model.mode == Mode::FixedWeight(0.5))
        .and_then(|c| c.outcome.as_ref().ok())
        .is_some_and(|o| {
            o.predictions.iter().all(|p| {
                let b = p.bundle;
                b.s_s.is_some_and(|ss| (b.s_spqe - (b.s_p + ss) / 2.0).abs() <= f32::EPSILON as f64)
            })
        });
    let same_full = ablation.row("regressor", "fused score").and_then(|x| x.srcc) == Some(r.srcc);
    check(
        rows.len() == 13 && populated && mean_fusion && adaptive >= half - 0.02,
        format!(
            "{} rows, all populated: {populated}; adaptive SRCC {adaptive:.4} vs fixed 0.5/0.5 {half:.4} (margin 0.02); \
             fixed 0.5 is the branch mean: {mean_fusion}; fused cell reproduces benchmark: {same_full}; \
             adaptive above every fixed weight (reported only): {}",
            rows.len(),
            adaptive > best_fixed
        ),
    )
}

fn a7(run: &Result<BenchmarkRun, String>, scratch: &Path) -> Verdict {
    let mut plateau = PlateauSchedule::new(1e-4, 10.0, 5);
    let mut stopper = EarlyStopping::new(30);
    let mut divided = Vec::new();
    let mut stop = None;
    for epoch in 1..=40 {
        if plateau.observe(0.25) {
            divided.push(epoch);
        }
        if stop.is_none() && stopper.observe(0.25) {
            stop = Some(epoch);
        }
    }
    let scripted = divided.first() == Some(&6) && stop == Some(31);

    // the same schedule inside the training loop: a step too small to move
    // any weight keeps validation loss flat
    let samples: Vec<Sample> = gen_hr(77, 4, 32)
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, hr)| Sample {
            id: format!("f{i}"),
            saliency: Some(spectral_residual(&hr)),
            sr: hr.clone(),
            reference: Some(hr),
            ref_kind: RefKind::Hr,
            scale_factor: 2,
            gt: 0.2 * i as f64 + 0.1,
        })
        .collect();
    let flat = TrainConfig {
        initial_lr: 1e-30,
        max_epochs: 60,
        ..TrainConfig::default()
    };
    let model = ModelConfig::new(BackboneConfig::tiny(), RefKind::Hr, 2, Mode::Full);
    let out = train::<f32>(&samples[..3], &samples[3..], &model, &flat).unwrap();
    let log = &out.log;
    let first_divided = log.windows(2).position(|w| w[1].lr < w[0].lr).map(|i| log[i].epoch);
    let flat_loss = log.iter().all(|e| e.val_l1 == log[0].val_l1);
    let in_loop = flat_loss && first_divided == Some(6) && log.len() == 31 && out.stopped_early;

    let first = match run {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(format!("no benchmark: {e}")),
    };
    let second = match benchmark_run(scratch) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(format!("rerun failed: {e}")),
    };
    let la = read_training_log(&first.ckpt().join("training_log.csv")).unwrap();
    let lb = read_training_log(&second.ckpt().join("training_log.csv")).unwrap();
    let log_dev = la
        .iter()
        .zip(&lb)
        .map(|(a, b)| (a.train_l1 - b.train_l1).abs().max((a.val_l1 - b.val_l1).abs()).max((a.lr - b.lr).abs()))
        .fold(0.0f64, f64::max);
    let same_len = la.len() == lb.len();
    let report_same = fs::read(first.eval().join("report.csv")).unwrap() == fs::read(second.eval().join("report.csv")).unwrap();
    check(
        scripted && in_loop && same_len && log_dev <= 1e-6 && report_same,
        format!(
            "scripted: divided at {divided:?}, stop at {stop:?}; training loop: first division after epoch {first_divided:?}, \
             stopped after {} epochs (flat loss {flat_loss}); rerun: {} vs {} epochs, max log deviation {log_dev:.1e}, \
             report.csv identical: {report_same}",
            log.len(),
            la.len(),
            lb.len()
        ),
    )
}

fn a8(scratch: &Path) -> Verdict {
    let config = SynthConfig {
        seed: 8,
        n_hr: 6,
        size: 64,
        kinds: vec![DegradationKind::GaussBlur, DegradationKind::BlockQuant],
        severities: Severities::Grid((1..=10).map(|k| k as f64 / 10.0).collect()),
        ..SynthConfig::benchmark()
    };
    let manifest = build_synthetic_manifest(scratch, &config).unwrap();
    let inputs = correlation_inputs(&manifest).unwrap();
    let pooled = correlation_study(&inputs);
    pooled.write(scratch, "correlation").unwrap();
    // a sweep is one source image under increasing severity; pooling sweeps
    // also ranks content, so the gate is the mean within-sweep SRCC
    let mut sources: Vec<&str> = inputs.iter().map(|s| s.source.as_str()).collect();
    sources.sort_unstable();
    sources.dedup();
    let sweeps: Vec<_> = sources
        .iter()
        .map(|src| {
            let members: Vec<_> = inputs.iter().filter(|s| s.source == *src).cloned().collect();
            correlation_study(&members)
        })
        .collect();
    let summary = |family: &str, measure: &str| {
        let per: Vec<f64> = sweeps
            .iter()
            .map(|r| r.get(family, measure, "severity").and_then(|r| r.srcc).unwrap_or(f64::NAN))
            .collect();
        let mean = per.iter().sum::<f64>() / per.len() as f64;
        let min = per.iter().copied().fold(f64::INFINITY, f64::min);
        let all = pooled.get(family, measure, "severity").and_then(|r| r.srcc).unwrap_or(f64::NAN);
        (mean, format!("mean {mean:.4} over {} sweeps (min {min:.4}, pooled {all:.4})", per.len()))
    };
    let (blur, blur_text) = summary("blur", "blur_measure");
    let (block, block_text) = summary("jpeg", "blockiness");
    check(
        blur >= 0.9 && block >= 0.9,
        format!("SRCC(blur_measure, blur severity) {blur_text}; SRCC(blockiness, quantisation severity) {block_text}"),
    )
}

fn a9(scratch: &Path) -> Verdict {
    let Some(manifest) = std::env::var_os("SPQE_REAL_MANIFEST") else {
        return Verdict::Skip("set SPQE_REAL_MANIFEST to a real dataset manifest to run".into());
    };
    let manifest = PathBuf::from(manifest);
    let ckpt = scratch.join("ckpt");
    let eval = scratch.join("eval");
    let mut train_args = vec!["train", "--manifest", s(&manifest), "--out-dir", s(&ckpt)];
    let config = std::env::var_os("SPQE_REAL_CONFIG").map(PathBuf::from);
    if let Some(c) = &config {
        train_args.extend(["--config", s(c)]);
    }
    if let Err(e) = cli(&train_args) {
        return Verdict::Fail(e);
    }
    let cross: Vec<PathBuf> = std::env::var_os("SPQE_REAL_CROSS")
        .map(|v| std::env::split_paths(&v).collect())
        .unwrap_or_default();
    let mut eval_args = vec!["eval", "--ckpt", s(&ckpt), "--out-dir", s(&eval), "--manifest", s(&manifest)];
    for c in &cross {
        eval_args.extend(["--manifest", s(c)]);
    }
    let text = match cli(&eval_args) {
        Ok(t) => t,
        Err(e) => return Verdict::Fail(e),
    };
    for line in text.lines() {
        println!("    {line}");
    }
    let report_rows = csv_rows(&eval.join("report.csv")).len();
    let cross_rows = if cross.is_empty() { 0 } else { csv_rows(&eval.join("cross.csv")).len() };
    check(
        report_rows >= 1 && (cross.is_empty() || cross_rows >= 1 + cross.len()),
        format!("{report_rows} benchmark rows, {cross_rows} cross-dataset rows"),
    )
}

fn main() {
    // the standard harness passes flags such as --nocapture; none apply here
    let work = tempfile::tempdir().expect("temp dir");
    let dir = |name: &str| {
        let p = work.path().join(name);
        fs::create_dir_all(&p).unwrap();
        p
    };
    let mut suite = Suite {
        failed: 0,
        passed: 0,
        skipped: 0,
    };
    let started = Instant::now();
    let run = catch_unwind(AssertUnwindSafe(|| benchmark_run(&dir("a1")))).unwrap_or_else(|_| Err("benchmark run panicked".into()));
    suite.run("A1", "synthetic end-to-end learnability", || a1(&run));
    suite.run("A2", "gradient correctness", a2);
    suite.run("A3", "fusion invariants", || a3(&run));
    suite.run("A4", "correlation oracles", a4);
    suite.run("A5", "classical-metric identities", a5);
    suite.run("A6", "ablation protocol", || a6(&run));
    suite.run("A7", "schedule and reproducibility", || a7(&run, &dir("a7")));
    suite.run("A8", "artifact correlation sweeps", || a8(&dir("a8")));
    suite.run("A9", "real-data smoke", || a9(&dir("a9")));
    println!(
        "acceptance: {} passed, {} failed, {} skipped in {:.0}s",
        suite.passed,
        suite.failed,
        suite.skipped,
        started.elapsed().as_secs_f64()
    );
    if suite.failed > 0 {
        std::process::exit(1);
    }
}
