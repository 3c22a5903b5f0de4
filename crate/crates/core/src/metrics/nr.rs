use alloc::format;

use crate::error::{Error, Result};
use crate::imgops::to_gray;
use crate::tensor::{Image, Plane};

const BLOCK: usize = 8;

/// Strong-edge threshold relative to the largest horizontal/vertical gradient.
const EDGE_FRACTION: f64 = 0.2;

fn check_size(p: &Plane) -> Result<()> {
    if p.height() < 2 * BLOCK || p.width() < 2 * BLOCK {
        return Err(Error::TooSmall(format!(
            "artifact measures need at least {0}x{0}, got {1}x{2}",
            2 * BLOCK,
            p.height(),
            p.width()
        )));
    }
    Ok(())
}

/// Mean |difference| across 8-aligned block boundaries minus the mean
/// |difference| inside blocks, averaged over both directions.
pub fn jpeg_blockiness(img: &Image) -> Result<f64> {
    let p = to_gray(img);
    check_size(&p)?;
    let (h, w) = (p.height(), p.width());
    let dir = |len_a: usize, len_b: usize, at: &dyn Fn(usize, usize) -> f64| {
        let (mut bs, mut bn, mut is, mut inn) = (0.0, 0usize, 0.0, 0usize);
        for a in 0..len_a {
            for b in 0..len_b - 1 {
                let d = libm::fabs(at(a, b + 1) - at(a, b));
                if (b + 1) % BLOCK == 0 {
                    bs += d;
                    bn += 1;
                } else {
                    is += d;
                    inn += 1;
                }
            }
        }
        bs / bn as f64 - is / inn as f64
    };
    let horizontal = dir(h, w, &|y, x| p.get(0, y, x));
    let vertical = dir(w, h, &|x, y| p.get(0, y, x));
    Ok((horizontal + vertical) / 2.0)
}

/// Average edge width (pixels) over strong vertical and horizontal edges:
/// for every local gradient maximum above threshold, the distance between
/// the intensity extrema bracketing it along the scan line.
pub fn blur_measure(img: &Image) -> Result<f64> {
    let p = to_gray(img);
    check_size(&p)?;
    let (h, w) = (p.height(), p.width());
    let row = |y: usize| -> alloc::vec::Vec<f64> { (0..w).map(|x| p.get(0, y, x)).collect() };
    let col = |x: usize| -> alloc::vec::Vec<f64> { (0..h).map(|y| p.get(0, y, x)).collect() };
    let lines: alloc::vec::Vec<alloc::vec::Vec<f64>> = (0..h).map(row).chain((0..w).map(col)).collect();
    let grad_max = lines
        .iter()
        .flat_map(|l| l.windows(3).map(|v| libm::fabs(v[2] - v[0]) / 2.0))
        .fold(0.0, f64::max);
    if grad_max < 1e-6 {
        return Ok(0.0);
    }
    let threshold = EDGE_FRACTION * grad_max;
    let (mut total, mut count) = (0.0, 0usize);
    for line in &lines {
        let n = line.len();
        let g: alloc::vec::Vec<f64> = (0..n)
            .map(|i| {
                if i == 0 || i + 1 == n {
                    0.0
                } else {
                    (line[i + 1] - line[i - 1]) / 2.0
                }
            })
            .collect();
        for i in 1..n - 1 {
            let m = libm::fabs(g[i]);
            if m < threshold || m < libm::fabs(g[i - 1]) || m < libm::fabs(g[i + 1]) {
                continue;
            }
            let rising = g[i] > 0.0;
            let mut lo = i;
            while lo > 0 && ((rising && line[lo - 1] < line[lo]) || (!rising && line[lo - 1] > line[lo])) {
                lo -= 1;
            }
            let mut hi = i;
            while hi + 1 < n && ((rising && line[hi + 1] > line[hi]) || (!rising && line[hi + 1] < line[hi])) {
                hi += 1;
            }
            total += (hi - lo) as f64;
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}
