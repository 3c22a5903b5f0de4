//! Dataset manifests: a CSV of samples plus a JSON sidecar holding the
//! opinion-score range and direction.
//!
//! ```text
//! sample_id,dataset_id,sr_path,ref_path,ref_kind,scale_factor,mos_raw,sr_method[,severity]
//! ```
//!
//! The sidecar sits next to the CSV with the extension replaced by `.json`:
//! `{"mos_min": 1.0, "mos_max": 5.0, "mos_direction": "higher"}`.
//! `ref_path` may be empty when `ref_kind` is `NONE`. Relative paths are
//! resolved against the manifest's directory. The optional trailing
//! `severity` column is used by the correlation study.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spqe_core::data::{normalize_mos, split_indices, MosDirection, MosRange, RefKind, SplitSpec};

use crate::error::{Error, Result};
use crate::sha256_hex;

pub const COLUMNS: [&str; 8] = [
    "sample_id",
    "dataset_id",
    "sr_path",
    "ref_path",
    "ref_kind",
    "scale_factor",
    "mos_raw",
    "sr_method",
];
pub const SEVERITY_COLUMN: &str = "severity";

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub sample_id: String,
    pub dataset_id: String,
    pub sr_path: PathBuf,
    pub ref_path: Option<PathBuf>,
    pub ref_kind: RefKind,
    pub scale_factor: usize,
    pub mos_raw: f64,
    pub gt: f64,
    pub sr_method: String,
    pub severity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifestMeta {
    pub mos_min: f64,
    pub mos_max: f64,
    pub mos_direction: MosDirection,
}

impl ManifestMeta {
    pub fn range(&self) -> MosRange {
        MosRange {
            min: self.mos_min,
            max: self.mos_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<SampleRecord>,
    pub meta: ManifestMeta,
    /// Directory relative paths were resolved against.
    pub root: PathBuf,
}

pub fn ref_kind_tag(kind: RefKind) -> &'static str {
    match kind {
        RefKind::Hr => "HR",
        RefKind::Lr => "LR",
        RefKind::None => "NONE",
    }
}

pub fn parse_ref_kind(s: &str) -> Option<RefKind> {
    match s.trim().to_ascii_uppercase().as_str() {
        "HR" => Some(RefKind::Hr),
        "LR" => Some(RefKind::Lr),
        "NONE" | "" => Some(RefKind::None),
        _ => None,
    }
}

pub fn sidecar_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("json")
}

impl SampleRecord {
    /// Checks the per-record invariants.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.sample_id.is_empty() {
            return Err("empty sample_id".into());
        }
        if self.scale_factor == 0 {
            return Err(format!("sample {}: scale_factor must be positive", self.sample_id));
        }
        if self.ref_kind == RefKind::Lr && self.scale_factor < 2 {
            return Err(format!("sample {}: LR reference needs scale_factor >= 2", self.sample_id));
        }
        if self.ref_kind != RefKind::None && self.ref_path.is_none() {
            return Err(format!("sample {}: ref_kind {} without ref_path", self.sample_id, ref_kind_tag(self.ref_kind)));
        }
        if !(0.0..=1.0).contains(&self.gt) {
            return Err(format!("sample {}: gt {} outside [0, 1]", self.sample_id, self.gt));
        }
        Ok(())
    }
}

impl DatasetManifest {
    /// Builds a manifest, computing every `gt` from `mos_raw`.
    pub fn new(mut records: Vec<SampleRecord>, meta: ManifestMeta, root: PathBuf) -> std::result::Result<Self, String> {
        let range = meta.range();
        let mut seen = HashSet::new();
        for r in &mut records {
            if !(r.mos_raw >= range.min && r.mos_raw <= range.max) {
                return Err(format!(
                    "sample {}: mos_raw {} outside declared range [{}, {}]",
                    r.sample_id, r.mos_raw, range.min, range.max
                ));
            }
            r.gt = normalize_mos(r.mos_raw, range, meta.mos_direction).map_err(|e| e.to_string())?;
            r.validate()?;
            if !seen.insert(r.sample_id.clone()) {
                return Err(format!("duplicate sample_id {}", r.sample_id));
            }
        }
        Ok(Self { records, meta, root })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dataset_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.records.iter().map(|r| r.dataset_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn has_severity(&self) -> bool {
        self.records.iter().any(|r| r.severity.is_some())
    }

    /// Subset in the given order, keeping range and root.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            meta: self.meta,
            root: self.root.clone(),
        }
    }

    pub fn split(&self, spec: &SplitSpec) -> Result<(Self, Self, Self)> {
        let ix = split_indices(self.records.len(), spec)?;
        Ok((self.select(&ix.train), self.select(&ix.val), self.select(&ix.test)))
    }

    /// Location-independent digest of the records and score metadata.
    pub fn fingerprint(&self) -> String {
        let mut s = serde_json::to_string(&self.meta).expect("plain data");
        for r in &self.records {
            s.push_str(&format!(
                "\n{}|{}|{}|{}|{}|{}|{:?}",
                r.sample_id,
                r.dataset_id,
                ref_kind_tag(r.ref_kind),
                r.scale_factor,
                r.mos_raw,
                r.sr_method,
                r.severity
            ));
        }
        sha256_hex(s.as_bytes())
    }
}

fn resolve(root: &Path, field: &str) -> PathBuf {
    let p = Path::new(field);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

fn relative_to(path: &Path, root: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).to_string_lossy().into_owned()
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let meta_path = sidecar_path(path);
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: ManifestMeta =
        serde_json::from_str(&meta_text).map_err(|e| Error::manifest(&meta_path, e.to_string()))?;
    if !(meta.mos_min < meta.mos_max) {
        return Err(Error::manifest(
            &meta_path,
            format!("degenerate MOS range ({}, {})", meta.mos_min, meta.mos_max),
        ));
    }
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::manifest(path, e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::manifest(path, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut idx = [0usize; 8];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = col(name).ok_or_else(|| Error::manifest(path, format!("missing column {name}")))?;
    }
    let sev_col = col(SEVERITY_COLUMN);
    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::manifest(path, e.to_string()))?;
        let at = |i: usize| row.get(i).unwrap_or("").trim();
        let bad = |what: &str| Error::manifest(path, format!("row {}: {what}", line + 2));
        let ref_kind = parse_ref_kind(at(idx[4])).ok_or_else(|| bad(&format!("unknown ref_kind {:?}", at(idx[4]))))?;
        let scale_factor = at(idx[5]).parse().map_err(|_| bad("scale_factor is not a positive integer"))?;
        let mos_raw: f64 = at(idx[6]).parse().map_err(|_| bad("mos_raw is not a number"))?;
        let severity = match sev_col.map(at) {
            None | Some("") => None,
            Some(v) => Some(v.parse().map_err(|_| bad("severity is not a number"))?),
        };
        let ref_field = at(idx[3]);
        records.push(SampleRecord {
            sample_id: at(idx[0]).to_string(),
            dataset_id: at(idx[1]).to_string(),
            sr_path: resolve(&root, at(idx[2])),
            ref_path: (!ref_field.is_empty()).then(|| resolve(&root, ref_field)),
            ref_kind,
            scale_factor,
            mos_raw,
            gt: 0.0,
            sr_method: at(idx[7]).to_string(),
            severity,
        });
    }
    DatasetManifest::new(records, meta, root).map_err(|m| Error::manifest(path, m))
}

/// Writes the CSV and its sidecar. Paths under the CSV's directory are
/// stored relative to it.
pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let with_severity = manifest.has_severity();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::manifest(path, e.to_string()))?;
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if with_severity {
        header.push(SEVERITY_COLUMN);
    }
    let csv_err = |e: csv::Error| Error::manifest(path, e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for r in &manifest.records {
        let mut row = vec![
            r.sample_id.clone(),
            r.dataset_id.clone(),
            relative_to(&r.sr_path, &root),
            r.ref_path.as_deref().map(|p| relative_to(p, &root)).unwrap_or_default(),
            ref_kind_tag(r.ref_kind).to_string(),
            r.scale_factor.to_string(),
            r.mos_raw.to_string(),
            r.sr_method.clone(),
        ];
        if with_severity {
            row.push(r.severity.map(|s| s.to_string()).unwrap_or_default());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let meta_path = sidecar_path(path);
    let json = serde_json::to_string_pretty(&manifest.meta).expect("plain data");
    fs::write(&meta_path, json + "\n").map_err(|e| Error::io(&meta_path, e))
}
