//! Static scatter plots rendered straight into a PNG.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};

const SIZE: u32 = 480;
const MARGIN: u32 = 40;
const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const AXIS: Rgb<u8> = Rgb([40, 40, 40]);
const GRID: Rgb<u8> = Rgb([225, 225, 225]);
const DIAGONAL: Rgb<u8> = Rgb([200, 120, 120]);
const POINT: Rgb<u8> = Rgb([30, 90, 200]);

/// Reads a two-column CSV with a header row.
pub fn read_scatter(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(|e| Error::format(path, e.to_string()))?;
        let get = |c: usize| row.get(c).and_then(|v| v.trim().parse::<f64>().ok());
        match (get(0), get(1)) {
            (Some(x), Some(y)) if x.is_finite() && y.is_finite() => out.push((x, y)),
            _ => return Err(Error::format(path, format!("row {}: expected two finite numbers", i + 2))),
        }
    }
    Ok(out)
}

fn bounds(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let lo = v.clone().fold(f64::INFINITY, f64::min);
    let hi = v.fold(f64::NEG_INFINITY, f64::max);
    if !(lo < hi) {
        let c = if lo.is_finite() { lo } else { 0.0 };
        return (c - 0.5, c + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Scatter of `points` with a light grid at quarter ranges and the
/// identity line where it crosses the plot.
pub fn render_scatter(points: &[(f64, f64)]) -> RgbImage {
    let mut img = RgbImage::from_pixel(SIZE, SIZE, WHITE);
    let (x0, x1) = bounds(points.iter().map(|p| p.0));
    let (y0, y1) = bounds(points.iter().map(|p| p.1));
    let span = (SIZE - 2 * MARGIN) as f64;
    let px = |x: f64| MARGIN as f64 + (x - x0) / (x1 - x0) * span;
    let py = |y: f64| (SIZE - MARGIN) as f64 - (y - y0) / (y1 - y0) * span;
    for k in 1..4 {
        let t = k as u32 * (SIZE - 2 * MARGIN) / 4;
        for s in MARGIN..=SIZE - MARGIN {
            img.put_pixel(MARGIN + t, s, GRID);
            img.put_pixel(s, MARGIN + t, GRID);
        }
    }
    for i in 0..=(SIZE - 2 * MARGIN) {
        let x = x0 + (x1 - x0) * i as f64 / span;
        let y = py(x).round();
        if y >= MARGIN as f64 && y <= (SIZE - MARGIN) as f64 {
            img.put_pixel(MARGIN + i, y as u32, DIAGONAL);
        }
    }
    for s in MARGIN..=SIZE - MARGIN {
        img.put_pixel(s, SIZE - MARGIN, AXIS);
        img.put_pixel(MARGIN, s, AXIS);
    }
    for &(x, y) in points {
        let (cx, cy) = (px(x).round() as i64, py(y).round() as i64);
        for dy in -2..=2i64 {
            for dx in -2..=2i64 {
                if dx * dx + dy * dy <= 5 {
                    img.put_pixel((cx + dx) as u32, (cy + dy) as u32, POINT);
                }
            }
        }
    }
    img
}

pub fn plot_scatter(input: &Path, output: &Path) -> Result<()> {
    let points = read_scatter(input)?;
    render_scatter(&points).save(output).map_err(|source| Error::Image {
        path: output.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_land_inside_frame() {
        let img = render_scatter(&[(0.0, 0.0), (1.0, 1.0), (0.5, 0.2)]);
        assert_eq!(img.dimensions(), (SIZE, SIZE));
        assert!(img.pixels().filter(|p| **p == POINT).count() > 3 * 10);
        assert_eq!(*img.get_pixel(0, 0), WHITE);
    }

    #[test]
    fn degenerate_ranges_do_not_panic() {
        render_scatter(&[]);
        render_scatter(&[(0.3, 0.3)]);
    }
}
