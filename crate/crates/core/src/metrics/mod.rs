//! Classical image quality measures: full-reference PSNR, SSIM, MS-SSIM and
//! GMSD, and the no-reference blocking and blur artifact measures.
//!
//! Colour inputs are reduced to BT.601 luma except for PSNR, which uses all
//! channels. Pixel values are expected in `[0, 1]`.

mod fr;
mod nr;

pub use fr::{gmsd, gmsd_planes, ms_ssim, ms_ssim_planes, psnr, psnr_with_peak, ssim, ssim_planes, MS_SSIM_WEIGHTS};
pub use nr::{blur_measure, jpeg_blockiness};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub metric: alloc::string::String,
    pub value: f64,
    pub direction: Direction,
}

/// Names and orientation of the built-in full-reference metrics.
pub const FR_METRICS: [(&str, Direction); 4] = [
    ("PSNR", Direction::HigherBetter),
    ("SSIM", Direction::HigherBetter),
    ("MS-SSIM", Direction::HigherBetter),
    ("GMSD", Direction::LowerBetter),
];

pub fn direction_of(metric: &str) -> Option<Direction> {
    FR_METRICS.iter().find(|(n, _)| *n == metric).map(|(_, d)| *d)
}
