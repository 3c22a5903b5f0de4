//! Score normalisation, split arithmetic and the per-sample score bundle.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RefKind {
    Hr,
    Lr,
    None,
}

/// Whether raw opinion scores grow with quality (MOS) or with distortion (DMOS).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MosDirection {
    #[serde(rename = "higher")]
    HigherBetter,
    #[serde(rename = "lower")]
    LowerBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MosRange {
    pub min: f64,
    pub max: f64,
}

/// Affine map of a raw opinion score onto `[0, 1]`, higher is better.
pub fn normalize_mos(mos_raw: f64, range: MosRange, direction: MosDirection) -> Result<f64> {
    if !(range.min < range.max) {
        return Err(Error::InvalidArgument(format!(
            "degenerate MOS range ({}, {})",
            range.min, range.max
        )));
    }
    let t = (mos_raw - range.min) / (range.max - range.min);
    Ok(match direction {
        MosDirection::HigherBetter => t,
        MosDirection::LowerBetter => 1.0 - t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_frac: f64,
    pub val_frac_of_train: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            train_frac: 0.8,
            val_frac_of_train: 0.1,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// `(train, val, test)` sizes for `n` records.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        for (name, f) in [("train_frac", self.train_frac), ("val_frac_of_train", self.val_frac_of_train)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidArgument(format!("{name} must lie in (0, 1), got {f}")));
            }
        }
        if n < 3 {
            return Err(Error::EmptyPartition(format!("{n} records cannot fill three partitions")));
        }
        // the epsilon keeps e.g. 0.8 * 100 from landing on 79.999..
        let trainval = libm::floor(n as f64 * self.train_frac + 1e-9) as usize;
        let val = libm::floor(trainval as f64 * self.val_frac_of_train + 1e-9) as usize;
        let (train, test) = (trainval - val, n - trainval);
        for (name, size) in [("train", train), ("val", val), ("test", test)] {
            if size == 0 {
                return Err(Error::EmptyPartition(format!(
                    "{name} partition is empty for {n} records"
                )));
            }
        }
        Ok((train, val, test))
    }
}

/// Index partition of `0..n`, deterministic in `spec.seed`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    let (n_train, n_val, _) = spec.sizes(n)?;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    idx.shuffle(&mut rng);
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    let mut out = SplitIndices { train: idx, val, test };
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Scores of one sample. `s_s` is absent in no-reference prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBundle {
    pub s_s: Option<f64>,
    pub s_p: f64,
    pub w_p: f64,
    pub s_spqe: f64,
}

impl ScoreBundle {
    pub fn w_s(&self) -> f64 {
        1.0 - self.w_p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_examples() {
        let r15 = MosRange { min: 1.0, max: 5.0 };
        assert_eq!(normalize_mos(5.0, r15, MosDirection::HigherBetter).unwrap(), 1.0);
        assert_eq!(normalize_mos(1.0, r15, MosDirection::HigherBetter).unwrap(), 0.0);
        assert_eq!(normalize_mos(3.0, r15, MosDirection::HigherBetter).unwrap(), 0.5);
        let r100 = MosRange { min: 0.0, max: 100.0 };
        assert!((normalize_mos(25.0, r100, MosDirection::LowerBetter).unwrap() - 0.75).abs() < 1e-15);
        assert!((normalize_mos(80.0, r100, MosDirection::LowerBetter).unwrap() - 0.2).abs() < 1e-15);
        let unit = MosRange { min: 0.0, max: 1.0 };
        assert_eq!(normalize_mos(0.37, unit, MosDirection::HigherBetter).unwrap(), 0.37);
        let flat = MosRange { min: 2.0, max: 2.0 };
        assert!(normalize_mos(2.0, flat, MosDirection::HigherBetter).is_err());
    }

    #[test]
    fn default_split_of_100() {
        assert_eq!(SplitSpec::default().sizes(100).unwrap(), (72, 8, 20));
        assert_eq!(SplitSpec::default().sizes(300).unwrap(), (216, 24, 60));
    }

    #[test]
    fn too_few_records_is_an_error() {
        assert!(SplitSpec::default().sizes(2).is_err());
        // 5 records: trainval 4, val floor(0.4) = 0
        assert!(matches!(SplitSpec::default().sizes(5), Err(Error::EmptyPartition(_))));
        let bad = SplitSpec { train_frac: 1.0, ..SplitSpec::default() };
        assert!(bad.sizes(100).is_err());
    }

    #[test]
    fn same_seed_same_split() {
        let a = split_indices(100, &SplitSpec::with_seed(5)).unwrap();
        let b = split_indices(100, &SplitSpec::with_seed(5)).unwrap();
        assert_eq!(a, b);
    }
}
