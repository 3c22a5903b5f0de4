//! Saliency maps: spectral-residual provider and normalisation of
//! externally supplied maps.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::fft2;
use crate::imgops::{box_blur, gaussian_blur, resize_bilinear, to_gray};
use crate::tensor::{Image, Plane, Tensor};

/// Side of the square grid the spectral residual is computed on.
const SR_GRID: usize = 64;
const SR_SMOOTH_SIGMA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SaliencyProvenance {
    File,
    SpectralResidual,
    Uniform,
}

/// Single-channel map with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub map: Plane,
    pub provenance: SaliencyProvenance,
}

impl SaliencyMap {
    pub fn ones(height: usize, width: usize) -> Self {
        Self {
            map: Tensor::filled(1, height, width, 1.0),
            provenance: SaliencyProvenance::Uniform,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.map.height(), self.map.width())
    }

    /// Wraps a map read from a sidecar file. Maps already inside `[0, 1]`
    /// are kept as-is; anything else is min-max normalised.
    pub fn from_file_values(map: Plane, expected: (usize, usize)) -> Result<Self> {
        if (map.height(), map.width()) != expected {
            return Err(Error::Shape(format!(
                "saliency map is {}x{}, image is {}x{}",
                map.height(),
                map.width(),
                expected.0,
                expected.1
            )));
        }
        map.ensure_finite("saliency map")?;
        let (lo, hi) = map.min_max();
        let map = if lo >= 0.0 && hi <= 1.0 { map } else { min_max_normalize(&map) };
        Ok(Self {
            map,
            provenance: SaliencyProvenance::File,
        })
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            map: self.map.map(|v| v * alpha),
            provenance: self.provenance,
        }
    }
}

/// Min-max normalisation; a constant map becomes all ones.
pub fn min_max_normalize(map: &Plane) -> Plane {
    let (lo, hi) = map.min_max();
    if !(hi - lo > 1e-12) {
        return map.map(|_| 1.0);
    }
    map.map(|v| (v - lo) / (hi - lo))
}

/// Spectral-residual saliency: the log-amplitude spectrum minus its local
/// average, recombined with the original phase, squared, smoothed and
/// resampled back to the image grid.
pub fn spectral_residual(img: &Image) -> SaliencyMap {
    let gray = to_gray(img);
    let (h, w) = (gray.height(), gray.width());
    let (lo, hi) = gray.min_max();
    if !(hi - lo > 1e-12) {
        return SaliencyMap {
            map: Tensor::filled(1, h, w, 1.0),
            provenance: SaliencyProvenance::SpectralResidual,
        };
    }
    let small = resize_bilinear(&gray, SR_GRID, SR_GRID);
    let mut spec: Vec<Complex64> = small.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut spec, SR_GRID, SR_GRID, false);
    let log_amp = Tensor::from_vec(
        1,
        SR_GRID,
        SR_GRID,
        spec.iter().map(|c| libm::log(c.norm().max(1e-12))).collect(),
    )
    .expect("grid size");
    let avg = box_blur(&log_amp, 3);
    for (i, c) in spec.iter_mut().enumerate() {
        let residual = log_amp.data()[i] - avg.data()[i];
        *c = Complex64::from_polar(libm::exp(residual), c.arg());
    }
    fft2(&mut spec, SR_GRID, SR_GRID, true);
    let energy = Tensor::from_vec(1, SR_GRID, SR_GRID, spec.iter().map(|c| c.norm_sqr()).collect())
        .expect("grid size");
    let smooth = gaussian_blur(&energy, SR_SMOOTH_SIGMA);
    let full = resize_bilinear(&smooth, h, w);
    SaliencyMap {
        map: min_max_normalize(&full),
        provenance: SaliencyProvenance::SpectralResidual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_gives_all_ones() {
        let img = Tensor::filled(3, 40, 24, 0.3f32);
        let s = spectral_residual(&img);
        assert_eq!(s.dims(), (40, 24));
        assert!(s.map.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn spectral_residual_highlights_an_odd_patch() {
        // vertical grating everywhere except one flat square
        let img = Tensor::from_fn(3, 64, 64, |_, y, x| {
            if (24..40).contains(&y) && (24..40).contains(&x) {
                0.5
            } else {
                0.5 + 0.4 * libm::sin(x as f64 * 1.3) as f32
            }
        });
        let s = spectral_residual(&img);
        let (lo, hi) = s.map.min_max();
        assert!(lo >= 0.0 && hi <= 1.0 && hi == 1.0);
        let inside = s.map.get(0, 32, 32);
        let far = s.map.get(0, 4, 4);
        assert!(inside > far, "{inside} vs {far}");
    }

    #[test]
    fn file_maps_in_unit_range_pass_through() {
        let m = Tensor::from_fn(1, 4, 4, |_, y, x| (y * 4 + x) as f64 / 20.0);
        let s = SaliencyMap::from_file_values(m.clone(), (4, 4)).unwrap();
        assert_eq!(s.map, m);
    }

    #[test]
    fn file_maps_in_byte_range_are_normalised() {
        let m = Tensor::from_fn(1, 4, 4, |_, y, x| ((y * 4 + x) * 17) as f64);
        let s = SaliencyMap::from_file_values(m.clone(), (4, 4)).unwrap();
        // min-max oracle
        for (a, b) in s.map.data().iter().zip(m.data()) {
            assert!((a - b / 255.0).abs() < 1e-12);
        }
        assert_eq!(s.map.min_max().1, 1.0);
        assert!(SaliencyMap::from_file_values(m, (4, 5)).is_err());
    }
}
