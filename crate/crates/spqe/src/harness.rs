//! Benchmark, cross-dataset, ablation and artifact-correlation runs, with
//! reports as CSV and aligned text.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use spqe_core::correlation::{plcc, srcc};
use spqe_core::data::{RefKind, ScoreBundle};
use spqe_core::metrics::{blur_measure, gmsd, jpeg_blockiness, ms_ssim, psnr, ssim};
use spqe_core::model::{Mode, ModelConfig, Sample, Strategy};
use spqe_core::train::TrainConfig;
use spqe_core::Image;

use crate::checkpoint::{Checkpoint, Precision};
use crate::error::{Error, Result};
use crate::imageio::load_image;
use crate::manifest::{ref_kind_tag, DatasetManifest};
use crate::pipeline::{train_samples, Dataset};
use crate::sha256_hex;

/// Anything that turns a sample into a score bundle.
pub trait Scorer {
    fn score(&self, sample: &Sample) -> Result<ScoreBundle>;
    fn method(&self) -> String;
    fn mode(&self) -> String;
    /// Reference kind the scorer needs; `None` for no-reference scorers.
    fn ref_kind(&self) -> RefKind;
    fn provenance(&self, logistic_fit: bool) -> Provenance {
        Provenance {
            checkpoint_id: "-".into(),
            split_seed: None,
            config_hash: "-".into(),
            logistic_fit,
        }
    }
}

impl Scorer for Checkpoint {
    fn score(&self, sample: &Sample) -> Result<ScoreBundle> {
        self.predict(sample)
    }

    fn method(&self) -> String {
        self.method_label()
    }

    fn mode(&self) -> String {
        self.config.mode.label()
    }

    fn ref_kind(&self) -> RefKind {
        if self.config.uses_structure() {
            self.config.ref_kind
        } else {
            RefKind::None
        }
    }

    fn provenance(&self, logistic_fit: bool) -> Provenance {
        Provenance {
            checkpoint_id: self.id(),
            split_seed: self.meta.split.as_ref().map(|s| s.seed),
            config_hash: self.config_hash(),
            logistic_fit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    /// Which table the row belongs to: `benchmark`, `cross`, `regressor`,
    /// `weight` or `strategy`.
    pub table: String,
    pub trained_on: String,
    pub dataset_id: String,
    pub method: String,
    pub mode: String,
    pub plcc: Option<f64>,
    pub srcc: Option<f64>,
    pub n_samples: usize,
    /// Why a cell is empty, if it is.
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub checkpoint_id: String,
    pub split_seed: Option<u64>,
    pub config_hash: String,
    /// Whether PLCC was computed after a four-parameter logistic mapping.
    pub logistic_fit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub provenance: Provenance,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt4(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

/// Left-aligned columns separated by two spaces.
pub fn aligned_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i + 1 == cells.len() {
                s.push_str(c);
            } else {
                s.push_str(&format!("{c:<w$}  "));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(headers.to_vec());
    out.push_str(&line(widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

/// CSV text with a header row; fields are quoted where needed.
pub fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8 fields")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

impl EvalReport {
    pub const CSV_HEADER: [&'static str; 13] = [
        "table",
        "trained_on",
        "dataset_id",
        "method",
        "mode",
        "plcc",
        "srcc",
        "n_samples",
        "note",
        "checkpoint_id",
        "split_seed",
        "config_hash",
        "logistic_fit",
    ];

    pub fn to_csv(&self) -> String {
        let p = &self.provenance;
        csv_text(
            &Self::CSV_HEADER,
            self.rows.iter().map(|r| {
                vec![
                    r.table.clone(),
                    r.trained_on.clone(),
                    r.dataset_id.clone(),
                    r.method.clone(),
                    r.mode.clone(),
                    opt(r.plcc),
                    opt(r.srcc),
                    r.n_samples.to_string(),
                    r.note.clone(),
                    p.checkpoint_id.clone(),
                    p.split_seed.map(|s| s.to_string()).unwrap_or_default(),
                    p.config_hash.clone(),
                    p.logistic_fit.to_string(),
                ]
            }),
        )
    }

    pub fn to_text(&self) -> String {
        let p = &self.provenance;
        let mut out = format!(
            "checkpoint {}  split seed {}  config {}  PLCC {}\n\n",
            p.checkpoint_id,
            p.split_seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
            p.config_hash,
            if p.logistic_fit { "after logistic fit" } else { "on raw scores" }
        );
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.table.clone(),
                    r.trained_on.clone(),
                    r.dataset_id.clone(),
                    r.method.clone(),
                    r.mode.clone(),
                    opt4(r.plcc),
                    opt4(r.srcc),
                    r.n_samples.to_string(),
                    r.note.clone(),
                ]
            })
            .collect();
        out.push_str(&aligned_table(
            &["table", "trained on", "dataset", "method", "mode", "PLCC", "SRCC", "n", "note"],
            &rows,
        ));
        out
    }

    /// Writes `<stem>.csv` and `<stem>.txt` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join(format!("{stem}.csv")), &self.to_csv())?;
        write_file(&dir.join(format!("{stem}.txt")), &self.to_text())
    }
}

/// PLCC and SRCC, or the reason they are undefined.
pub fn correlate(pred: &[f64], gt: &[f64], logistic_fit: bool) -> (Option<f64>, Option<f64>, String) {
    let p = plcc(pred, gt, logistic_fit);
    let s = srcc(pred, gt);
    let note = match (&p, &s) {
        (Err(e), _) | (_, Err(e)) => match e {
            spqe_core::Error::ZeroVariance(_) => "zero variance".to_string(),
            e => e.to_string(),
        },
        _ => String::new(),
    };
    (p.ok(), s.ok(), note)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub dataset_id: String,
    pub sample_id: String,
    pub gt: f64,
    pub bundle: ScoreBundle,
}

pub fn predict_all(scorer: &dyn Scorer, dataset: &Dataset) -> Result<Vec<Prediction>> {
    dataset
        .samples
        .iter()
        .map(|s| {
            Ok(Prediction {
                dataset_id: dataset.id.clone(),
                sample_id: s.id.clone(),
                gt: s.gt,
                bundle: scorer.score(s)?,
            })
        })
        .collect()
}

fn row_from(table: &str, trained_on: &str, dataset_id: &str, scorer: &dyn Scorer, preds: &[Prediction], logistic_fit: bool) -> ReportRow {
    let p: Vec<f64> = preds.iter().map(|x| x.bundle.s_spqe).collect();
    let g: Vec<f64> = preds.iter().map(|x| x.gt).collect();
    let (plcc, srcc, note) = correlate(&p, &g, logistic_fit);
    ReportRow {
        table: table.into(),
        trained_on: trained_on.into(),
        dataset_id: dataset_id.into(),
        method: scorer.method(),
        mode: scorer.mode(),
        plcc,
        srcc,
        n_samples: preds.len(),
        note,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub report: EvalReport,
    pub predictions: Vec<Prediction>,
}

/// One row per dataset, plus every prediction for scatter plots.
pub fn run_benchmark(scorer: &dyn Scorer, datasets: &[Dataset], trained_on: &str, logistic_fit: bool) -> Result<Benchmark> {
    let mut rows = Vec::new();
    let mut predictions = Vec::new();
    for d in datasets {
        let preds = predict_all(scorer, d)?;
        rows.push(row_from("benchmark", trained_on, &d.id, scorer, &preds, logistic_fit));
        predictions.extend(preds);
    }
    Ok(Benchmark {
        report: EvalReport {
            rows,
            provenance: scorer.provenance(logistic_fit),
        },
        predictions,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scatter {
    pub name: String,
    pub x_label: &'static str,
    pub y_label: &'static str,
    pub points: Vec<(f64, f64)>,
}

impl Scatter {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{}\n", self.x_label, self.y_label);
        for (x, y) in &self.points {
            s.push_str(&format!("{x},{y}\n"));
        }
        s
    }
}

/// Per dataset: `s_spqe` against `gt`, and `s_p` against `s_spqe` both
/// unweighted and weighted by `w_p`.
pub fn scatter_series(predictions: &[Prediction]) -> Vec<Scatter> {
    let mut ids: Vec<&str> = predictions.iter().map(|p| p.dataset_id.as_str()).collect();
    ids.dedup();
    let mut out = Vec::new();
    for id in ids {
        let of = |f: &dyn Fn(&Prediction) -> (f64, f64)| predictions.iter().filter(|p| p.dataset_id == id).map(f).collect();
        out.push(Scatter {
            name: format!("{id}_spqe_vs_gt"),
            x_label: "s_spqe",
            y_label: "gt",
            points: of(&|p| (p.bundle.s_spqe, p.gt)),
        });
        out.push(Scatter {
            name: format!("{id}_sp_vs_spqe"),
            x_label: "s_p",
            y_label: "s_spqe",
            points: of(&|p| (p.bundle.s_p, p.bundle.s_spqe)),
        });
        out.push(Scatter {
            name: format!("{id}_weighted_sp_vs_spqe"),
            x_label: "w_p*s_p",
            y_label: "s_spqe",
            points: of(&|p| (p.bundle.w_p * p.bundle.s_p, p.bundle.s_spqe)),
        });
    }
    out
}

pub fn predictions_csv(predictions: &[Prediction]) -> String {
    csv_text(
        &["dataset_id", "sample_id", "gt", "s_s", "s_p", "w_p", "s_spqe"],
        predictions.iter().map(|p| {
            let b = &p.bundle;
            vec![
                p.dataset_id.clone(),
                p.sample_id.clone(),
                p.gt.to_string(),
                opt(b.s_s),
                b.s_p.to_string(),
                b.w_p.to_string(),
                b.s_spqe.to_string(),
            ]
        }),
    )
}

/// Writes the report, `predictions.csv` and one `scatter_<name>.csv` per
/// series into `dir`.
pub fn write_benchmark(bench: &Benchmark, dir: &Path, stem: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    bench.report.write(dir, stem)?;
    write_file(&dir.join("predictions.csv"), &predictions_csv(&bench.predictions))?;
    for s in scatter_series(&bench.predictions) {
        write_file(&dir.join(format!("scatter_{}.csv", s.name)), &s.to_csv())?;
    }
    Ok(())
}

/// SRCC/PLCC of a checkpoint trained on `trained_on` over other datasets.
/// Targets lacking the reference kind the scorer needs get a skipped row.
pub fn cross_dataset(scorer: &dyn Scorer, trained_on: &str, targets: &[Dataset], logistic_fit: bool) -> Result<EvalReport> {
    let need = scorer.ref_kind();
    let mut rows = Vec::new();
    for d in targets {
        if need != RefKind::None && d.samples.iter().any(|s| s.ref_kind != need || s.reference.is_none()) {
            rows.push(ReportRow {
                table: "cross".into(),
                trained_on: trained_on.into(),
                dataset_id: d.id.clone(),
                method: scorer.method(),
                mode: scorer.mode(),
                plcc: None,
                srcc: None,
                n_samples: d.samples.len(),
                note: format!("no {} reference", ref_kind_tag(need)),
            });
            continue;
        }
        let preds = predict_all(scorer, d)?;
        rows.push(row_from("cross", trained_on, &d.id, scorer, &preds, logistic_fit));
    }
    Ok(EvalReport {
        rows,
        provenance: scorer.provenance(logistic_fit),
    })
}

/// One configuration of the ablation suite.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationCell {
    pub table: &'static str,
    pub label: String,
    pub model: ModelConfig,
}

pub const FIXED_WEIGHTS: [f64; 5] = [0.2, 0.4, 0.5, 0.6, 0.8];

/// The 13 cells: branch comparison (3), fixed against adaptive weights
/// (6), and multi-scale x saliency (4).
pub fn ablation_cells(base: &ModelConfig) -> Vec<AblationCell> {
    let with = |mode: Mode, strategy: Strategy| ModelConfig {
        mode,
        strategy,
        ..base.clone()
    };
    let s = base.strategy;
    let mut cells = vec![
        AblationCell {
            table: "regressor",
            label: "structure score".into(),
            model: with(Mode::StructureOnly, s),
        },
        AblationCell {
            table: "regressor",
            label: "perception score".into(),
            model: with(Mode::PerceptionOnly, s),
        },
        AblationCell {
            table: "regressor",
            label: "fused score".into(),
            model: with(Mode::Full, s),
        },
    ];
    for w in FIXED_WEIGHTS {
        cells.push(AblationCell {
            table: "weight",
            label: format!("W_p {w} & W_s {}", (10.0 - w * 10.0).round() / 10.0),
            model: with(Mode::FixedWeight(w), s),
        });
    }
    cells.push(AblationCell {
        table: "weight",
        label: "adaptive weight".into(),
        model: with(Mode::Full, s),
    });
    for (multi_scale, saliency) in [(false, false), (false, true), (true, false), (true, true)] {
        cells.push(AblationCell {
            table: "strategy",
            label: format!(
                "{}, {}",
                if multi_scale { "multi-scale" } else { "single-scale" },
                if saliency { "saliency" } else { "no saliency" }
            ),
            model: with(Mode::Full, Strategy { multi_scale, saliency }),
        });
    }
    cells
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub checkpoint: Checkpoint,
    pub predictions: Vec<Prediction>,
    /// Index of an earlier cell with the same configuration whose run was
    /// reused.
    pub reused_from: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: AblationCell,
    pub outcome: std::result::Result<CellOutcome, String>,
}

#[derive(Debug, Clone)]
pub struct Ablation {
    pub report: EvalReport,
    pub cells: Vec<CellResult>,
}

impl Ablation {
    pub fn row(&self, table: &str, label: &str) -> Option<&ReportRow> {
        self.cells
            .iter()
            .zip(&self.report.rows)
            .find(|(c, _)| c.cell.table == table && c.cell.label == label)
            .map(|(_, r)| r)
    }
}

pub struct AblationSetup<'a> {
    pub train: &'a [Sample],
    pub val: &'a [Sample],
    pub test: &'a Dataset,
    pub base: &'a ModelConfig,
    pub config: &'a TrainConfig,
    pub precision: Precision,
    pub logistic_fit: bool,
    pub split_seed: Option<u64>,
}

/// Trains every cell with the same seed and data. Cells with identical
/// configurations share one run; failed cells keep their row with the
/// error as note.
pub fn ablation_suite(setup: &AblationSetup) -> Ablation {
    let cells = ablation_cells(setup.base);
    let mut done: HashMap<String, usize> = HashMap::new();
    let mut results: Vec<CellResult> = Vec::with_capacity(cells.len());
    let mut rows = Vec::with_capacity(cells.len());
    for cell in cells {
        let key = serde_json::to_string(&cell.model).expect("plain data");
        let outcome = match done.get(&key) {
            Some(&i) => results[i].outcome.clone().map(|o| CellOutcome {
                reused_from: Some(i),
                ..o
            }),
            None => {
                done.insert(key, results.len());
                run_cell(setup, &cell.model).map_err(|e| e.to_string())
            }
        };
        let row = match &outcome {
            Ok(o) => {
                let mut r = row_from(cell.table, "train", &setup.test.id, &o.checkpoint, &o.predictions, setup.logistic_fit);
                r.method = cell.label.clone();
                r
            }
            Err(e) => ReportRow {
                table: cell.table.into(),
                trained_on: "train".into(),
                dataset_id: setup.test.id.clone(),
                method: cell.label.clone(),
                mode: cell.model.mode.label(),
                plcc: None,
                srcc: None,
                n_samples: setup.test.samples.len(),
                note: e.clone(),
            },
        };
        rows.push(row);
        results.push(CellResult { cell, outcome });
    }
    let config_hash = sha256_hex(serde_json::to_string(setup.base).expect("plain data").as_bytes())[..16].to_string();
    Ablation {
        report: EvalReport {
            rows,
            provenance: Provenance {
                checkpoint_id: "-".into(),
                split_seed: setup.split_seed,
                config_hash,
                logistic_fit: setup.logistic_fit,
            },
        },
        cells: results,
    }
}

fn run_cell(setup: &AblationSetup, model: &ModelConfig) -> Result<CellOutcome> {
    let trained = train_samples(setup.train, setup.val, model, setup.config, setup.precision, None)?;
    let predictions = predict_all(&trained.checkpoint, setup.test)?;
    Ok(CellOutcome {
        checkpoint: trained.checkpoint,
        predictions,
        reused_from: None,
    })
}

/// Input to the artifact study: an SR image with its HR reference.
#[derive(Debug, Clone)]
pub struct CorrelationSample {
    pub family: &'static str,
    /// Reference path; samples sharing it form one severity sweep.
    pub source: String,
    pub reference: Image,
    pub sr: Image,
    pub gt: f64,
    pub severity: Option<f64>,
}

pub const FAMILIES: [&str; 2] = ["jpeg", "blur"];

/// Artifact family from a method tag.
pub fn artifact_family(sr_method: &str) -> Option<&'static str> {
    let m = sr_method.to_ascii_lowercase();
    FAMILIES.into_iter().find(|f| m == *f)
}

/// Loads the jpeg- and blur-tagged records that carry an HR reference.
pub fn correlation_inputs(manifest: &DatasetManifest) -> Result<Vec<CorrelationSample>> {
    let mut out = Vec::new();
    for r in &manifest.records {
        let (Some(family), RefKind::Hr, Some(ref_path)) = (artifact_family(&r.sr_method), r.ref_kind, &r.ref_path) else {
            continue;
        };
        out.push(CorrelationSample {
            family,
            source: ref_path.display().to_string(),
            reference: load_image(ref_path)?,
            sr: load_image(&r.sr_path)?,
            gt: r.gt,
            severity: r.severity,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub family: String,
    pub measure: String,
    pub against: String,
    pub srcc: Option<f64>,
    pub n_samples: usize,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub rows: Vec<CorrelationRow>,
}

impl CorrelationReport {
    pub fn get(&self, family: &str, measure: &str, against: &str) -> Option<&CorrelationRow> {
        self.rows
            .iter()
            .find(|r| r.family == family && r.measure == measure && r.against == against)
    }

    pub fn to_csv(&self) -> String {
        csv_text(
            &["family", "measure", "against", "srcc", "n_samples", "note"],
            self.rows.iter().map(|r| {
                vec![
                    r.family.clone(),
                    r.measure.clone(),
                    r.against.clone(),
                    opt(r.srcc),
                    r.n_samples.to_string(),
                    r.note.clone(),
                ]
            }),
        )
    }

    pub fn to_text(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.family.clone(),
                    r.measure.clone(),
                    r.against.clone(),
                    opt4(r.srcc),
                    r.n_samples.to_string(),
                    r.note.clone(),
                ]
            })
            .collect();
        aligned_table(&["family", "measure", "against", "SRCC", "n", "note"], &rows)
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join(format!("{stem}.csv")), &self.to_csv())?;
        write_file(&dir.join(format!("{stem}.txt")), &self.to_text())
    }
}

type Measure = fn(&Image) -> spqe_core::Result<f64>;
type FrMetric = fn(&Image, &Image) -> spqe_core::Result<f64>;

const NR_MEASURES: [(&str, Measure); 2] = [("blockiness", jpeg_blockiness), ("blur_measure", blur_measure)];
const FR: [(&str, FrMetric); 4] = [("PSNR", psnr), ("SSIM", ssim), ("MS-SSIM", ms_ssim), ("GMSD", gmsd)];

/// Per artifact family, the SRCC of each no-reference artifact measure
/// against the ground truth, the construction severity (when recorded)
/// and each full-reference metric.
pub fn correlation_study(samples: &[CorrelationSample]) -> CorrelationReport {
    let mut rows = Vec::new();
    for family in FAMILIES {
        let members: Vec<&CorrelationSample> = samples.iter().filter(|s| s.family == family).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < 3 {
            rows.push(CorrelationRow {
                family: family.into(),
                measure: "-".into(),
                against: "-".into(),
                srcc: None,
                n_samples: members.len(),
                note: "fewer than 3 samples".into(),
            });
            continue;
        }
        let column = |f: &dyn Fn(&CorrelationSample) -> spqe_core::Result<f64>| -> std::result::Result<Vec<f64>, String> {
            // +inf PSNR (identical images) still ranks above every finite value
            members
                .iter()
                .map(|s| f(s).map(|v| if v == f64::INFINITY { f64::MAX } else { v }))
                .collect::<spqe_core::Result<Vec<f64>>>()
                .map_err(|e| e.to_string())
        };
        let mut against: Vec<(String, std::result::Result<Vec<f64>, String>)> =
            vec![("gt".into(), Ok(members.iter().map(|s| s.gt).collect()))];
        if members.iter().all(|s| s.severity.is_some()) {
            against.push(("severity".into(), Ok(members.iter().map(|s| s.severity.unwrap_or(0.0)).collect())));
        }
        for (name, metric) in FR {
            against.push((name.into(), column(&|s| metric(&s.reference, &s.sr))));
        }
        for (mname, measure) in NR_MEASURES {
            let m = column(&|s| measure(&s.sr));
            for (aname, a) in &against {
                let (srcc, note) = match (&m, a) {
                    (Ok(x), Ok(y)) => match srcc(x, y) {
                        Ok(v) => (Some(v), String::new()),
                        Err(e) => (None, e.to_string()),
                    },
                    (Err(e), _) | (_, Err(e)) => (None, e.clone()),
                };
                rows.push(CorrelationRow {
                    family: family.into(),
                    measure: mname.into(),
                    against: aname.clone(),
                    srcc,
                    n_samples: members.len(),
                    note,
                });
            }
        }
    }
    CorrelationReport { rows }
}
