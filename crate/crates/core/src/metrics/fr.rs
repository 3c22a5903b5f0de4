use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::imgops::{downsample_box, filter_separable_valid, gaussian_kernel, to_gray};
use crate::tensor::{Image, Plane, Tensor};

const K1: f64 = 0.01;
const K2: f64 = 0.03;
const WINDOW_RADIUS: usize = 5;
const WINDOW_SIGMA: f64 = 1.5;
const WINDOW: usize = 2 * WINDOW_RADIUS + 1;

pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

/// GMSD stability constant for `[0, 1]` luma (170 / 255^2).
const GMSD_C: f64 = 0.0026;

fn same_dims<A, B>(a: &Tensor<A>, b: &Tensor<B>) -> Result<()>
where
    A: Copy + Default,
    B: Copy + Default,
{
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// PSNR in dB for a given peak value. Identical inputs give `+inf`.
pub fn psnr_with_peak(reference: &Tensor<f64>, dist: &Tensor<f64>, peak: f64) -> Result<f64> {
    same_dims(reference, dist)?;
    let n = reference.data().len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty image".into()));
    }
    let mse = reference
        .data()
        .iter()
        .zip(dist.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * libm::log10(peak * peak / mse))
}

/// PSNR over all channels of `[0, 1]` images.
pub fn psnr(reference: &Image, dist: &Image) -> Result<f64> {
    psnr_with_peak(&reference.cast(), &dist.cast(), 1.0)
}

/// Mean SSIM and mean contrast-structure term of two luma planes.
fn ssim_terms(a: &Plane, b: &Plane) -> (f64, f64) {
    let c1 = (K1 * 1.0) * (K1 * 1.0);
    let c2 = (K2 * 1.0) * (K2 * 1.0);
    let k = gaussian_kernel(WINDOW_SIGMA, WINDOW_RADIUS);
    let filt = |t: &Plane| filter_separable_valid(t, &k, &k);
    let prod = |x: &Plane, y: &Plane| {
        Tensor::from_vec(1, x.height(), x.width(), x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect())
            .expect("same shape")
    };
    let mu_a = filt(a);
    let mu_b = filt(b);
    let e_aa = filt(&prod(a, a));
    let e_bb = filt(&prod(b, b));
    let e_ab = filt(&prod(a, b));
    let n = mu_a.data().len() as f64;
    let (mut s_sum, mut cs_sum) = (0.0, 0.0);
    for i in 0..mu_a.data().len() {
        let (ma, mb) = (mu_a.data()[i], mu_b.data()[i]);
        let va = e_aa.data()[i] - ma * ma;
        let vb = e_bb.data()[i] - mb * mb;
        let cov = e_ab.data()[i] - ma * mb;
        let cs = (2.0 * cov + c2) / (va + vb + c2);
        let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        s_sum += l * cs;
        cs_sum += cs;
    }
    (s_sum / n, cs_sum / n)
}

pub fn ssim_planes(a: &Plane, b: &Plane) -> Result<f64> {
    same_dims(a, b)?;
    if a.height() < WINDOW || a.width() < WINDOW {
        return Err(Error::TooSmall(format!(
            "SSIM needs at least {WINDOW}x{WINDOW}, got {}x{}",
            a.height(),
            a.width()
        )));
    }
    Ok(ssim_terms(a, b).0)
}

/// Mean SSIM (11x11 Gaussian window, sigma 1.5, K1 = 0.01, K2 = 0.03) on luma.
pub fn ssim(reference: &Image, dist: &Image) -> Result<f64> {
    same_dims(reference, dist)?;
    ssim_planes(&to_gray(reference), &to_gray(dist))
}

pub fn ms_ssim_planes(a: &Plane, b: &Plane) -> Result<f64> {
    same_dims(a, b)?;
    let levels = MS_SSIM_WEIGHTS.len();
    let min_side = WINDOW << (levels - 1);
    if a.height() < min_side || a.width() < min_side {
        return Err(Error::TooSmall(format!(
            "{levels}-level MS-SSIM needs at least {min_side}x{min_side}, got {}x{}",
            a.height(),
            a.width()
        )));
    }
    let mut x = a.clone();
    let mut y = b.clone();
    let mut terms = Vec::with_capacity(levels);
    for level in 0..levels {
        let (s, cs) = ssim_terms(&x, &y);
        terms.push(if level + 1 == levels { s } else { cs });
        if level + 1 < levels {
            x = downsample_box(&x, 2);
            y = downsample_box(&y, 2);
        }
    }
    // negative contrast terms are clipped so fractional powers stay real
    Ok(terms
        .iter()
        .zip(MS_SSIM_WEIGHTS)
        .map(|(&t, w)| libm::pow(t.max(0.0), w))
        .product())
}

/// Five-level multi-scale SSIM on luma.
pub fn ms_ssim(reference: &Image, dist: &Image) -> Result<f64> {
    same_dims(reference, dist)?;
    ms_ssim_planes(&to_gray(reference), &to_gray(dist))
}

/// Prewitt gradient magnitude with zero-padded "same" filtering.
fn gradient_magnitude(p: &Plane) -> Vec<f64> {
    let (h, w) = (p.height(), p.width());
    let at = |y: isize, x: isize| {
        if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
            0.0
        } else {
            p.get(0, y as usize, x as usize)
        }
    };
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for d in -1..=1 {
                gx += at(y + d, x - 1) - at(y + d, x + 1);
                gy += at(y - 1, x + d) - at(y + 1, x + d);
            }
            gx /= 3.0;
            gy /= 3.0;
            out.push(libm::sqrt(gx * gx + gy * gy));
        }
    }
    out
}

pub fn gmsd_planes(a: &Plane, b: &Plane) -> Result<f64> {
    same_dims(a, b)?;
    if a.height() < 4 || a.width() < 4 {
        return Err(Error::TooSmall(format!("GMSD needs 4x4, got {}x{}", a.height(), a.width())));
    }
    let ga = gradient_magnitude(&downsample_box(a, 2));
    let gb = gradient_magnitude(&downsample_box(b, 2));
    let gms: Vec<f64> = ga
        .iter()
        .zip(&gb)
        .map(|(&p, &q)| (2.0 * p * q + GMSD_C) / (p * p + q * q + GMSD_C))
        .collect();
    let n = gms.len() as f64;
    let mean = gms.iter().sum::<f64>() / n;
    let var = gms.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(libm::sqrt(var))
}

/// Gradient magnitude similarity deviation on luma; 0 for identical images.
pub fn gmsd(reference: &Image, dist: &Image) -> Result<f64> {
    same_dims(reference, dist)?;
    gmsd_planes(&to_gray(reference), &to_gray(dist))
}
