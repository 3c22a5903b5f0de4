//! Deterministic procedural HR images, SR-style degradations and the
//! pseudo opinion score used as ground truth on synthetic data.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgops::{downsample_box, gaussian_blur, resize_bicubic, sample_bilinear, to_f64, to_image};
use crate::metrics::{gmsd, ssim};
use crate::tensor::{Image, Tensor};

/// GMSD value mapped to the bottom of the pseudo-MOS gradient term.
pub const GMSD_NORMALIZER: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DegradationKind {
    BicubicUpscale,
    GaussBlur,
    BlockQuant,
    SharpenWarp,
    Noise,
}

impl DegradationKind {
    pub const ALL: [DegradationKind; 5] = [
        DegradationKind::BicubicUpscale,
        DegradationKind::GaussBlur,
        DegradationKind::BlockQuant,
        DegradationKind::SharpenWarp,
        DegradationKind::Noise,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            DegradationKind::BicubicUpscale => "bicubic",
            DegradationKind::GaussBlur => "blur",
            DegradationKind::BlockQuant => "jpeg",
            DegradationKind::SharpenWarp => "sharpen_warp",
            DegradationKind::Noise => "noise",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub kind: DegradationKind,
    /// 0 leaves the image untouched, 1 is the strongest setting.
    pub severity: f64,
    pub scale_factor: usize,
    /// Seeds the stochastic kinds (warp field, noise).
    pub seed: u64,
}

/// `n` procedural images of side `size`: a smooth colour gradient, a few
/// sinusoidal gratings, filled random polygons and band-limited noise,
/// already on the 8-bit grid.
pub fn gen_hr(seed: u64, n: usize, size: usize) -> Result<Vec<Image>> {
    if size < 32 || size % 16 != 0 {
        return Err(Error::InvalidArgument(alloc::format!(
            "image size must be a multiple of 16 and at least 32, got {size}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| quantize_8bit(&gen_one(&mut rng, size))).collect())
}

fn gen_one(rng: &mut ChaCha8Rng, size: usize) -> Image {
    let s = size as f64;
    let mut img = Tensor::<f64>::zeros(3, size, size);

    let base: [f64; 3] = core::array::from_fn(|_| rng.random_range(0.25..0.75));
    let slope: [(f64, f64); 3] = core::array::from_fn(|_| (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)));
    let gratings: Vec<(f64, f64, f64, f64, [f64; 3])> = (0..rng.random_range(1..=3))
        .map(|_| {
            let theta = rng.random_range(0.0..PI);
            let freq = rng.random_range(2.0..(s / 6.0));
            let phase = rng.random_range(0.0..2.0 * PI);
            let amp = rng.random_range(0.04..0.15);
            let tint: [f64; 3] = core::array::from_fn(|_| rng.random_range(0.5..1.0));
            (theta, freq, phase, amp, tint)
        })
        .collect();
    for c in 0..3 {
        for y in 0..size {
            for x in 0..size {
                let (u, v) = (x as f64 / s - 0.5, y as f64 / s - 0.5);
                let mut val = base[c] + slope[c].0 * u + slope[c].1 * v;
                for &(theta, freq, phase, amp, tint) in &gratings {
                    let t = u * libm::cos(theta) + v * libm::sin(theta);
                    val += amp * tint[c] * libm::sin(2.0 * PI * freq * t + phase);
                }
                img.set(c, y, x, val);
            }
        }
    }

    for _ in 0..rng.random_range(2..=5) {
        let cx = rng.random_range(0.1..0.9) * s;
        let cy = rng.random_range(0.1..0.9) * s;
        let radius = rng.random_range(0.08..0.3) * s;
        let k = rng.random_range(3..=7);
        let mut angles: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        angles.sort_by(f64::total_cmp);
        let verts: Vec<(f64, f64)> = angles
            .iter()
            .map(|&a| {
                let r = radius * rng.random_range(0.6..1.0);
                (cx + r * libm::cos(a), cy + r * libm::sin(a))
            })
            .collect();
        let colour: [f64; 3] = core::array::from_fn(|_| rng.random_range(0.0..1.0));
        let alpha = rng.random_range(0.5..0.9);
        for y in 0..size {
            for x in 0..size {
                if inside(&verts, x as f64 + 0.5, y as f64 + 0.5) {
                    for (c, &col) in colour.iter().enumerate() {
                        let v = img.get(c, y, x);
                        img.set(c, y, x, (1.0 - alpha) * v + alpha * col);
                    }
                }
            }
        }
    }

    let noise_sigma = rng.random_range(0.6..1.6);
    let noise_amp = rng.random_range(0.03..0.1);
    let noise = Tensor::from_fn(1, size, size, |_, _, _| {
        let z: f64 = StandardNormal.sample(rng);
        z
    });
    let noise = gaussian_blur(&noise, noise_sigma);
    for c in 0..3 {
        for y in 0..size {
            for x in 0..size {
                let v = img.get(c, y, x) + noise_amp * noise.get(0, y, x);
                img.set(c, y, x, v);
            }
        }
    }
    to_image(&img)
}

/// Even-odd point-in-polygon test.
fn inside(verts: &[(f64, f64)], px: f64, py: f64) -> bool {
    let mut hit = false;
    let mut j = verts.len() - 1;
    for i in 0..verts.len() {
        let (xi, yi) = verts[i];
        let (xj, yj) = verts[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            hit = !hit;
        }
        j = i;
    }
    hit
}

/// JPEG luminance quantisation table (quality 50), row-major `[v][u]`.
const JPEG_Q50: [f64; 64] = [
    16., 11., 10., 16., 24., 40., 51., 61., 12., 12., 14., 19., 26., 58., 60., 55., 14., 13., 16., 24., 40., 57.,
    69., 56., 14., 17., 22., 29., 51., 87., 80., 62., 18., 22., 37., 56., 68., 109., 103., 77., 24., 35., 55., 64.,
    81., 104., 113., 92., 49., 64., 78., 87., 103., 121., 120., 101., 72., 92., 95., 98., 112., 100., 103., 99.,
];

fn dct_basis() -> [[f64; 8]; 8] {
    core::array::from_fn(|u| {
        core::array::from_fn(|x| {
            let cu = if u == 0 { libm::sqrt(1.0 / 8.0) } else { libm::sqrt(2.0 / 8.0) };
            cu * libm::cos((2 * x + 1) as f64 * u as f64 * PI / 16.0)
        })
    })
}

/// Quantises every 8x8 block's orthonormal DCT with the JPEG table scaled by
/// `12 * severity` (severity 1 is coarser than JPEG quality 5).
fn block_quantize(t: &Tensor<f64>, severity: f64) -> Tensor<f64> {
    let basis = dct_basis();
    let (c, h, w) = t.shape();
    let mut out = t.clone();
    let scale = 12.0 * severity / 255.0;
    for ch in 0..c {
        for by in (0..h - h % 8).step_by(8) {
            for bx in (0..w - w % 8).step_by(8) {
                let mut coef = [[0.0f64; 8]; 8];
                for (v, row) in coef.iter_mut().enumerate() {
                    for (u, cv) in row.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for y in 0..8 {
                            for x in 0..8 {
                                acc += basis[v][y] * basis[u][x] * (t.get(ch, by + y, bx + x) - 0.5);
                            }
                        }
                        let q = (JPEG_Q50[v * 8 + u] * scale).max(1e-9);
                        *cv = libm::round(acc / q) * q;
                    }
                }
                for y in 0..8 {
                    for x in 0..8 {
                        let mut acc = 0.0;
                        for (v, row) in coef.iter().enumerate() {
                            for (u, &cv) in row.iter().enumerate() {
                                acc += basis[v][y] * basis[u][x] * cv;
                            }
                        }
                        out.set(ch, by + y, bx + x, acc + 0.5);
                    }
                }
            }
        }
    }
    out
}

/// Unsharp masking followed by a smooth pseudo-random displacement field:
/// crisp output whose geometry departs from the reference.
fn sharpen_warp(t: &Tensor<f64>, severity: f64, seed: u64) -> Tensor<f64> {
    let amount = 1.5 * severity;
    let blurred = gaussian_blur(t, 1.0);
    let sharp = Tensor::from_vec(
        t.channels(),
        t.height(),
        t.width(),
        t.data().iter().zip(blurred.data()).map(|(&a, &b)| a + amount * (a - b)).collect(),
    )
    .expect("same shape");

    let (h, w) = (t.height(), t.width());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = 5;
    let coarse = Tensor::from_fn(2, grid, grid, |_, _, _| rng.random_range(-1.0..1.0));
    let field = resize_bicubic(&coarse, h, w);
    let amp = 3.0 * severity;
    Tensor::from_fn(t.channels(), h, w, |c, y, x| {
        let dy = amp * field.get(0, y, x);
        let dx = amp * field.get(1, y, x);
        sample_bilinear(&sharp, c, y as f64 + dy, x as f64 + dx)
    })
}

fn add_noise(t: &Tensor<f64>, severity: f64, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = 0.15 * severity;
    t.map(|v| {
        let z: f64 = StandardNormal.sample(&mut rng);
        v + sigma * z
    })
}

/// Returns `(lr, sr)`: the box-downsampled reference and the degraded SR
/// surrogate. Severity 0 returns `sr == hr` exactly.
pub fn degrade(hr: &Image, spec: &DegradationSpec) -> Result<(Image, Image)> {
    let (h, w) = (hr.height(), hr.width());
    let f = spec.scale_factor;
    if f < 2 || h % f != 0 || w % f != 0 {
        return Err(Error::InvalidArgument(alloc::format!(
            "{h}x{w} image is not divisible by scale factor {f}"
        )));
    }
    if !(0.0..=1.0).contains(&spec.severity) {
        return Err(Error::InvalidArgument(alloc::format!("severity {} outside [0, 1]", spec.severity)));
    }
    let hr64 = to_f64(hr);
    let lr = to_image(&downsample_box(&hr64, f));
    if spec.severity == 0.0 {
        return Ok((lr, hr.clone()));
    }
    let s = spec.severity;
    let sr = match spec.kind {
        DegradationKind::BicubicUpscale => {
            let soft = gaussian_blur(&to_f64(&lr), 1.5 * s);
            let up = resize_bicubic(&soft, h, w);
            Tensor::from_vec(
                3,
                h,
                w,
                hr64.data().iter().zip(up.data()).map(|(&a, &b)| a + s * (b - a)).collect(),
            )
            .expect("same shape")
        }
        DegradationKind::GaussBlur => gaussian_blur(&hr64, 2.5 * s),
        DegradationKind::BlockQuant => block_quantize(&hr64, s),
        DegradationKind::SharpenWarp => sharpen_warp(&hr64, s, spec.seed),
        DegradationKind::Noise => add_noise(&hr64, s, spec.seed),
    };
    Ok((lr, to_image(&sr)))
}

/// Rounds to the 8-bit grid the images are stored on.
pub fn quantize_8bit(img: &Image) -> Image {
    img.map(|v| libm::roundf(v.clamp(0.0, 1.0) * 255.0) / 255.0)
}

/// `clamp(0.5 * SSIM + 0.5 * (1 - min(GMSD / 0.35, 1)), 0, 1)`.
pub fn pseudo_mos(hr: &Image, sr: &Image) -> Result<f64> {
    let s = ssim(hr, sr)?;
    let g = gmsd(hr, sr)?;
    Ok((0.5 * s + 0.5 * (1.0 - (g / GMSD_NORMALIZER).min(1.0))).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_invalid_sizes() {
        assert!(gen_hr(1, 0, 64).unwrap().is_empty());
        assert!(gen_hr(1, 1, 40).is_err());
        assert!(gen_hr(1, 1, 16).is_err());
    }

    #[test]
    fn severity_zero_is_identity() {
        let hr = &gen_hr(3, 1, 32).unwrap()[0];
        for kind in DegradationKind::ALL {
            let spec = DegradationSpec { kind, severity: 0.0, scale_factor: 2, seed: 1 };
            let (lr, sr) = degrade(hr, &spec).unwrap();
            assert_eq!(&sr, hr);
            assert_eq!(lr.shape(), (3, 16, 16));
        }
    }

    #[test]
    fn non_divisible_dims_rejected() {
        let hr = Tensor::filled(3, 33, 32, 0.5f32);
        let spec = DegradationSpec { kind: DegradationKind::Noise, severity: 0.5, scale_factor: 2, seed: 0 };
        assert!(degrade(&hr, &spec).is_err());
    }

    #[test]
    fn identical_images_score_one() {
        let hr = &gen_hr(5, 1, 32).unwrap()[0];
        assert_eq!(pseudo_mos(hr, hr).unwrap(), 1.0);
    }

    #[test]
    fn kind_tags_round_trip() {
        for k in DegradationKind::ALL {
            assert_eq!(DegradationKind::from_tag(k.tag()), Some(k));
        }
    }
}
