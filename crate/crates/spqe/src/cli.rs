//! `spqe` command-line driver.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use spqe_core::backbone::{BackboneConfig, Preset};
use spqe_core::data::{RefKind, SplitSpec};
use spqe_core::model::{InputNorm, Mode, ModelConfig, Sample, Strategy};
use spqe_core::saliency::spectral_residual;
use spqe_core::synth::DegradationKind;
use spqe_core::train::TrainConfig;

use crate::checkpoint::{Checkpoint, Precision};
use crate::error::{Error, Result};
use crate::harness::{ablation_suite, correlation_inputs, correlation_study, cross_dataset, run_benchmark, write_benchmark, AblationSetup};
use crate::imageio::{load_image, load_saliency};
use crate::manifest::{load_manifest, DatasetManifest};
use crate::pipeline::{evaluation_subset, group_by_dataset, load_datasets, load_samples, train_manifest, write_training_log, Dataset};
use crate::plot::plot_scatter;
use crate::synth_io::{build_synthetic_manifest, Severities, SynthConfig, MANIFEST_FILE};

pub const TRAIN_CONFIG_FILE: &str = "train_config.json";
pub const TRAINING_LOG_FILE: &str = "training_log.csv";

/// Training configuration file: the training fields plus model and split
/// settings. Every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub train: TrainConfig,
    /// `FULL`, `STRUCTURE_ONLY`, `PERCEPTION_ONLY` or `FIXED_WEIGHT`.
    pub mode: String,
    pub fixed_weight: Option<f64>,
    pub multi_scale: bool,
    pub saliency: bool,
    pub backbone: Preset,
    /// Taken from the manifest when absent.
    pub ref_kind: Option<RefKind>,
    pub scale_factor: Option<usize>,
    pub input_norm: InputNorm,
    pub precision: Precision,
    /// Defaults to the training seed.
    pub split_seed: Option<u64>,
    pub train_frac: f64,
    pub val_frac_of_train: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let split = SplitSpec::default();
        Self {
            train: TrainConfig::default(),
            mode: "FULL".into(),
            fixed_weight: None,
            multi_scale: true,
            saliency: true,
            backbone: Preset::Tiny,
            ref_kind: None,
            scale_factor: None,
            input_norm: InputNorm::default(),
            precision: Precision::Single,
            split_seed: None,
            train_frac: split.train_frac,
            val_frac_of_train: split.val_frac_of_train,
        }
    }
}

pub fn parse_mode(name: &str, fixed_weight: Option<f64>) -> Result<Mode> {
    let n = name.trim().to_ascii_uppercase().replace('-', "_");
    match (n.as_str(), fixed_weight) {
        ("FULL" | "ADAPTIVE", None) => Ok(Mode::Full),
        ("STRUCTURE_ONLY", None) => Ok(Mode::StructureOnly),
        ("PERCEPTION_ONLY", None) => Ok(Mode::PerceptionOnly),
        ("FIXED_WEIGHT" | "FULL", Some(w)) if (0.0..=1.0).contains(&w) => Ok(Mode::FixedWeight(w)),
        ("FIXED_WEIGHT", None) => Err(Error::Usage("FIXED_WEIGHT mode needs --fixed-weight".into())),
        (_, Some(w)) if !(0.0..=1.0).contains(&w) => Err(Error::Usage(format!("fixed weight {w} outside [0, 1]"))),
        (_, Some(_)) => Err(Error::Usage(format!("--fixed-weight conflicts with mode {name}"))),
        _ => Err(Error::Usage(format!("unknown mode {name}"))),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
    }

    pub fn backbone_config(&self) -> Result<BackboneConfig> {
        match self.backbone {
            Preset::Tiny => Ok(BackboneConfig::tiny()),
            Preset::Vgg16Like => Ok(BackboneConfig::vgg16_like()),
            Preset::Custom => Err(Error::Usage("backbone must be TINY or VGG16_LIKE".into())),
        }
    }

    pub fn split(&self) -> SplitSpec {
        SplitSpec {
            seed: self.split_seed.unwrap_or(self.train.seed),
            train_frac: self.train_frac,
            val_frac_of_train: self.val_frac_of_train,
        }
    }

    /// Model configuration for a manifest; reference kind and scale factor
    /// fall back to the manifest's when not configured.
    pub fn model_config(&self, manifest: &DatasetManifest) -> Result<ModelConfig> {
        let ref_kind = match self.ref_kind {
            Some(k) => k,
            None => uniform(manifest, |r| r.ref_kind, "ref_kind")?,
        };
        let scale_factor = match self.scale_factor {
            Some(s) => s,
            None => uniform(manifest, |r| r.scale_factor, "scale_factor")?,
        };
        let config = ModelConfig {
            strategy: Strategy {
                multi_scale: self.multi_scale,
                saliency: self.saliency,
            },
            input_norm: self.input_norm,
            ..ModelConfig::new(
                self.backbone_config()?,
                ref_kind,
                scale_factor,
                parse_mode(&self.mode, self.fixed_weight)?,
            )
        };
        config.validate()?;
        Ok(config)
    }
}

fn uniform<T: PartialEq + Copy>(
    manifest: &DatasetManifest,
    f: impl Fn(&crate::manifest::SampleRecord) -> T,
    what: &str,
) -> Result<T> {
    let first = manifest
        .records
        .first()
        .map(&f)
        .ok_or_else(|| Error::manifest(&manifest.root, "manifest has no records"))?;
    if manifest.records.iter().any(|r| f(r) != first) {
        return Err(Error::Usage(format!("manifest mixes {what} values; pass --{}", what.replace('_', "-"))));
    }
    Ok(first)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RefKindArg {
    Hr,
    Lr,
    None,
}

impl From<RefKindArg> for RefKind {
    fn from(a: RefKindArg) -> Self {
        match a {
            RefKindArg::Hr => RefKind::Hr,
            RefKindArg::Lr => RefKind::Lr,
            RefKindArg::None => RefKind::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    Single,
    Double,
}

impl From<PrecisionArg> for Precision {
    fn from(a: PrecisionArg) -> Self {
        match a {
            PrecisionArg::Single => Precision::Single,
            PrecisionArg::Double => Precision::Double,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spqe", version, about = "Super-resolution image quality: structure, perception and their adaptive fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the synthetic benchmark (PNG images plus manifest)
    Synth(SynthArgs),
    /// Train a checkpoint on a manifest's train/val split
    Train(TrainArgs),
    /// Score one SR image and print the score bundle as JSON
    Predict(PredictArgs),
    /// Evaluate a checkpoint; extra manifests give a cross-dataset report
    Eval(EvalArgs),
    /// Run the 13-cell ablation suite
    Ablate(AblateArgs),
    /// Correlate artifact measures with distortion and FR metrics
    Correlate(CorrelateArgs),
    /// Render a two-column scatter CSV as a PNG
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory for images and manifest.csv
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of generated HR images
    #[arg(long, default_value_t = 60)]
    n_hr: usize,
    /// Side of the square HR images (multiple of 16, at least 32)
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 2)]
    scale_factor: usize,
    /// Reference recorded in the manifest
    #[arg(long, value_enum, default_value = "hr")]
    ref_kind: RefKindArg,
    /// Comma-separated severities applied to every image and kind instead
    /// of one random severity each
    #[arg(long, value_delimiter = ',')]
    severities: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct ModelFlags {
    /// JSON configuration file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for initialisation, batch order and the data split
    #[arg(long)]
    seed: Option<u64>,
    /// FULL, STRUCTURE_ONLY, PERCEPTION_ONLY or FIXED_WEIGHT
    #[arg(long)]
    mode: Option<String>,
    /// Perception weight for FIXED_WEIGHT mode
    #[arg(long)]
    fixed_weight: Option<f64>,
    #[arg(long, value_enum)]
    ref_kind: Option<RefKindArg>,
    #[arg(long, value_enum)]
    precision: Option<PrecisionArg>,
}

impl ModelFlags {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            c.train.seed = s;
            c.split_seed = Some(s);
        }
        if let Some(m) = &self.mode {
            c.mode = m.clone();
        }
        if let Some(w) = self.fixed_weight {
            c.fixed_weight = Some(w);
            if self.mode.is_none() {
                c.mode = "FIXED_WEIGHT".into();
            }
        } else if self.mode.is_some() {
            c.fixed_weight = None;
        }
        if let Some(k) = self.ref_kind {
            c.ref_kind = Some(k.into());
        }
        if let Some(p) = self.precision {
            c.precision = p.into();
        }
        Ok(c)
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Checkpoint directory to create
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    model: ModelFlags,
    /// Backbone parameter container to start from
    #[arg(long)]
    pretrained: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// SR image to score
    #[arg(long)]
    sr: PathBuf,
    /// Reference image (HR or LR, as the checkpoint expects)
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Saliency map; computed from the SR image when absent
    #[arg(long)]
    saliency: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Benchmark manifest; repeat to add cross-dataset targets
    #[arg(long, required = true)]
    manifest: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Map predictions through a fitted logistic before PLCC
    #[arg(long)]
    logistic_fit: bool,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    logistic_fit: bool,
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    /// Manifest with jpeg/blur method tags and HR references
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Two-column CSV written by `eval`
    #[arg(long)]
    scatter: PathBuf,
    /// Directory for `<scatter stem>.png`
    #[arg(long)]
    out_dir: PathBuf,
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn out(w: &mut dyn Write, text: &str) -> Result<()> {
    w.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn synth(a: &SynthArgs, stdout: &mut dyn Write) -> Result<()> {
    let config = SynthConfig {
        seed: a.seed,
        n_hr: a.n_hr,
        size: a.size,
        scale_factor: a.scale_factor,
        kinds: DegradationKind::ALL.to_vec(),
        severities: match &a.severities {
            Some(v) => Severities::Grid(v.clone()),
            None => SynthConfig::benchmark().severities,
        },
        ref_kind: a.ref_kind.into(),
        dataset_id: "synthetic".into(),
    };
    let manifest = build_synthetic_manifest(&a.out_dir, &config)?;
    let run = RunConfig {
        train: TrainConfig {
            seed: a.seed,
            ..TrainConfig::synthetic_benchmark()
        },
        ..RunConfig::default()
    };
    let cfg_path = a.out_dir.join(TRAIN_CONFIG_FILE);
    fs::write(&cfg_path, serde_json::to_string_pretty(&run).expect("plain data") + "\n").map_err(|e| Error::io(&cfg_path, e))?;
    out(
        stdout,
        &format!(
            "wrote {} samples to {}\n",
            manifest.len(),
            a.out_dir.join(MANIFEST_FILE).display()
        ),
    )
}

fn train(a: &TrainArgs, stdout: &mut dyn Write) -> Result<()> {
    let run = a.model.resolve()?;
    let manifest = load_manifest(&a.manifest)?;
    let model = run.model_config(&manifest)?;
    let trained = train_manifest(&manifest, &run.split(), &model, &run.train, run.precision, a.pretrained.as_deref())?;
    trained.checkpoint.save(&a.out_dir)?;
    write_training_log(&trained.log, &a.out_dir.join(TRAINING_LOG_FILE))?;
    let meta = &trained.checkpoint.meta;
    out(
        stdout,
        &format!(
            "checkpoint {} saved to {}: {} epochs, best epoch {} (val L1 {:.5}, initial {:.5})\n",
            trained.checkpoint.id(),
            a.out_dir.display(),
            trained.log.len(),
            meta.best_epoch.unwrap_or(0),
            meta.best_val_l1.unwrap_or(f64::NAN),
            trained.initial_val_l1
        ),
    )
}

fn predict(a: &PredictArgs, stdout: &mut dyn Write) -> Result<()> {
    let ckpt = Checkpoint::load(&a.ckpt)?;
    let sr = load_image(&a.sr)?;
    let saliency = match &a.saliency {
        Some(p) => load_saliency(p, (sr.height(), sr.width()))?,
        None => spectral_residual(&sr),
    };
    let reference = a.reference.as_deref().map(load_image).transpose()?;
    let sample = Sample {
        id: a.sr.display().to_string(),
        ref_kind: if reference.is_some() { ckpt.config.ref_kind } else { RefKind::None },
        reference,
        scale_factor: ckpt.config.scale_factor,
        saliency: Some(saliency),
        sr,
        gt: 0.0,
    };
    let bundle = ckpt.predict(&sample)?;
    out(stdout, &(serde_json::to_string(&bundle).expect("plain data") + "\n"))
}

fn trained_on(ckpt: &Checkpoint) -> String {
    if ckpt.meta.trained_on.is_empty() {
        "-".into()
    } else {
        ckpt.meta.trained_on.join("+")
    }
}

fn eval(a: &EvalArgs, stdout: &mut dyn Write) -> Result<()> {
    let ckpt = Checkpoint::load(&a.ckpt)?;
    mkdir(&a.out_dir)?;
    let label = trained_on(&ckpt);
    let first = load_manifest(&a.manifest[0])?;
    let (subset, held_out) = evaluation_subset(&ckpt, &first)?;
    let bench = run_benchmark(&ckpt, &load_datasets(&subset)?, &label, a.logistic_fit)?;
    write_benchmark(&bench, &a.out_dir, "report")?;
    let mut text = bench.report.to_text();
    if held_out {
        text.push_str(&format!("(held-out test split: {} of {} samples)\n", subset.len(), first.len()));
    }
    if a.manifest.len() > 1 {
        let mut targets: Vec<Dataset> = Vec::new();
        for p in &a.manifest {
            let m = load_manifest(p)?;
            let (subset, _) = evaluation_subset(&ckpt, &m)?;
            targets.extend(group_by_dataset(&subset, load_samples(&subset)?));
        }
        let cross = cross_dataset(&ckpt, &label, &targets, a.logistic_fit)?;
        cross.write(&a.out_dir, "cross")?;
        text.push('\n');
        text.push_str(&cross.to_text());
    }
    out(stdout, &text)
}

fn ablate(a: &AblateArgs, stdout: &mut dyn Write) -> Result<()> {
    let run = a.model.resolve()?;
    let manifest = load_manifest(&a.manifest)?;
    let base = run.model_config(&manifest)?;
    let split = run.split();
    let (tr, va, te) = manifest.split(&split)?;
    let test = Dataset {
        id: "test".into(),
        samples: load_samples(&te)?,
    };
    let ablation = ablation_suite(&AblationSetup {
        train: &load_samples(&tr)?,
        val: &load_samples(&va)?,
        test: &test,
        base: &base,
        config: &run.train,
        precision: run.precision,
        logistic_fit: a.logistic_fit,
        split_seed: Some(split.seed),
    });
    mkdir(&a.out_dir)?;
    ablation.report.write(&a.out_dir, "ablation")?;
    out(stdout, &ablation.report.to_text())
}

fn correlate(a: &CorrelateArgs, stdout: &mut dyn Write) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let report = correlation_study(&correlation_inputs(&manifest)?);
    report.write(&a.out_dir, "correlation")?;
    out(stdout, &report.to_text())
}

fn plot(a: &PlotArgs, stdout: &mut dyn Write) -> Result<()> {
    mkdir(&a.out_dir)?;
    let stem = a.scatter.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scatter".into());
    let target = a.out_dir.join(format!("{stem}.png"));
    plot_scatter(&a.scatter, &target)?;
    out(stdout, &format!("wrote {}\n", target.display()))
}

/// Runs the CLI with explicit output streams and returns the exit code:
/// 0 success, 1 usage error, 2 data error, 3 numerical failure.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let is_usage = e.use_stderr();
            let text = e.render().to_string();
            let _ = if is_usage { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return if is_usage { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Synth(a) => synth(a, stdout),
        Command::Train(a) => train(a, stdout),
        Command::Predict(a) => predict(a, stdout),
        Command::Eval(a) => eval(a, stdout),
        Command::Ablate(a) => ablate(a, stdout),
        Command::Correlate(a) => correlate(a, stdout),
        Command::Plot(a) => plot(a, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}
