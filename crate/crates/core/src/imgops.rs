//! Image filtering and resampling shared by metrics, saliency and synthesis.
//! Every function works channel by channel on `f64` tensors.

use alloc::vec;
use alloc::vec::Vec;

use crate::backbone::mirror;
use crate::tensor::{Image, Plane, Tensor};

/// ITU-R BT.601 luma.
pub fn to_gray(img: &Image) -> Plane {
    if img.channels() == 1 {
        return img.cast();
    }
    Tensor::from_fn(1, img.height(), img.width(), |_, y, x| {
        0.299 * img.get(0, y, x) as f64 + 0.587 * img.get(1, y, x) as f64 + 0.114 * img.get(2, y, x) as f64
    })
}

pub fn to_f64(img: &Image) -> Tensor<f64> {
    img.cast()
}

/// Converts back to an `f32` image, clamping to `[0, 1]`.
pub fn to_image(t: &Tensor<f64>) -> Image {
    t.map(|v| v.clamp(0.0, 1.0) as f32)
}

/// Normalised 1-D Gaussian of the given radius.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            libm::exp(-d * d / (2.0 * sigma * sigma))
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable "same"-size filtering with mirrored borders.
pub fn filter_separable_reflect(t: &Tensor<f64>, kernel_x: &[f64], kernel_y: &[f64]) -> Tensor<f64> {
    let (c, h, w) = t.shape();
    let rx = kernel_x.len() / 2;
    let ry = kernel_y.len() / 2;
    let mut tmp = Tensor::zeros(c, h, w);
    for ch in 0..c {
        let src = t.plane(ch);
        let dst = tmp.plane_mut(ch);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (i, &k) in kernel_x.iter().enumerate() {
                    let sx = reflect_signed(x as isize + i as isize - rx as isize, w);
                    acc += k * src[y * w + sx];
                }
                dst[y * w + x] = acc;
            }
        }
    }
    let mut out = Tensor::zeros(c, h, w);
    for ch in 0..c {
        let src = tmp.plane(ch);
        let dst = out.plane_mut(ch);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (i, &k) in kernel_y.iter().enumerate() {
                    let sy = reflect_signed(y as isize + i as isize - ry as isize, h);
                    acc += k * src[sy * w + x];
                }
                dst[y * w + x] = acc;
            }
        }
    }
    out
}

/// Separable "valid" filtering (no padding): output shrinks by `len - 1`.
pub fn filter_separable_valid(t: &Tensor<f64>, kernel_x: &[f64], kernel_y: &[f64]) -> Tensor<f64> {
    let (c, h, w) = t.shape();
    let ow = w + 1 - kernel_x.len();
    let oh = h + 1 - kernel_y.len();
    let mut tmp = Tensor::<f64>::zeros(c, h, ow);
    for ch in 0..c {
        let src = t.plane(ch);
        let dst = tmp.plane_mut(ch);
        for y in 0..h {
            for x in 0..ow {
                dst[y * ow + x] = kernel_x.iter().enumerate().map(|(i, &k)| k * src[y * w + x + i]).sum();
            }
        }
    }
    let mut out = Tensor::zeros(c, oh, ow);
    for ch in 0..c {
        let src = tmp.plane(ch);
        let dst = out.plane_mut(ch);
        for y in 0..oh {
            for x in 0..ow {
                dst[y * ow + x] = kernel_y.iter().enumerate().map(|(i, &k)| k * src[(y + i) * ow + x]).sum();
            }
        }
    }
    out
}

#[inline]
pub(crate) fn reflect_signed(i: isize, n: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    mirror(i.rem_euclid(period) as usize, n)
}

pub fn gaussian_blur(t: &Tensor<f64>, sigma: f64) -> Tensor<f64> {
    if sigma <= 0.0 {
        return t.clone();
    }
    let radius = libm::ceil(3.0 * sigma) as usize;
    let k = gaussian_kernel(sigma, radius.max(1));
    filter_separable_reflect(t, &k, &k)
}

/// `size x size` mean filter (size odd).
pub fn box_blur(t: &Tensor<f64>, size: usize) -> Tensor<f64> {
    let k = vec![1.0 / size as f64; size];
    filter_separable_reflect(t, &k, &k)
}

/// Mean over non-overlapping `factor x factor` blocks.
pub fn downsample_box(t: &Tensor<f64>, factor: usize) -> Tensor<f64> {
    let (c, h, w) = t.shape();
    let (oh, ow) = (h / factor, w / factor);
    let norm = (factor * factor) as f64;
    Tensor::from_fn(c, oh, ow, |ch, y, x| {
        let mut s = 0.0;
        for dy in 0..factor {
            for dx in 0..factor {
                s += t.get(ch, y * factor + dy, x * factor + dx);
            }
        }
        s / norm
    })
}

/// Bilinear resampling on pixel centres (half-pixel alignment), clamped edges.
pub fn resize_bilinear(t: &Tensor<f64>, out_h: usize, out_w: usize) -> Tensor<f64> {
    let (c, h, w) = t.shape();
    if (h, w) == (out_h, out_w) {
        return t.clone();
    }
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    let coord = |o: usize, s: f64, n: usize| {
        let p = ((o as f64 + 0.5) * s - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = libm::floor(p) as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, p - i0 as f64)
    };
    Tensor::from_fn(c, out_h, out_w, |ch, y, x| {
        let (y0, y1, fy) = coord(y, sy, h);
        let (x0, x1, fx) = coord(x, sx, w);
        let top = t.get(ch, y0, x0) * (1.0 - fx) + t.get(ch, y0, x1) * fx;
        let bot = t.get(ch, y1, x0) * (1.0 - fx) + t.get(ch, y1, x1) * fx;
        top * (1.0 - fy) + bot * fy
    })
}

fn cubic(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = libm::fabs(x);
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Keys bicubic interpolation (a = -0.5) on pixel centres, mirrored borders.
pub fn resize_bicubic(t: &Tensor<f64>, out_h: usize, out_w: usize) -> Tensor<f64> {
    let (c, h, w) = t.shape();
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    let taps = |o: usize, s: f64, n: usize| -> [(usize, f64); 4] {
        let p = (o as f64 + 0.5) * s - 0.5;
        let base = libm::floor(p) as isize;
        let f = p - base as f64;
        let mut out = [(0usize, 0.0f64); 4];
        for (j, slot) in out.iter_mut().enumerate() {
            let i = base - 1 + j as isize;
            *slot = (reflect_signed(i, n), cubic(f - (j as f64 - 1.0)));
        }
        out
    };
    Tensor::from_fn(c, out_h, out_w, |ch, y, x| {
        let ty = taps(y, sy, h);
        let tx = taps(x, sx, w);
        let mut acc = 0.0;
        for &(iy, wy) in &ty {
            for &(ix, wx) in &tx {
                acc += wy * wx * t.get(ch, iy, ix);
            }
        }
        acc
    })
}

/// Bilinear sample at a fractional position with mirrored borders.
pub fn sample_bilinear(t: &Tensor<f64>, ch: usize, y: f64, x: f64) -> f64 {
    let (_, h, w) = t.shape();
    let y0 = libm::floor(y);
    let x0 = libm::floor(x);
    let fy = y - y0;
    let fx = x - x0;
    let (y0, x0) = (y0 as isize, x0 as isize);
    let g = |yy: isize, xx: isize| t.get(ch, reflect_signed(yy, h), reflect_signed(xx, w));
    let top = g(y0, x0) * (1.0 - fx) + g(y0, x0 + 1) * fx;
    let bot = g(y0 + 1, x0) * (1.0 - fx) + g(y0 + 1, x0 + 1) * fx;
    top * (1.0 - fy) + bot * fy
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_kernel_sums_to_one() {
        let k = gaussian_kernel(1.5, 5);
        assert_eq!(k.len(), 11);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(k[5] > k[4] && k[4] > k[3]);
    }

    #[test]
    fn blur_preserves_constants() {
        let t = Tensor::filled(2, 9, 7, 0.25);
        let b = gaussian_blur(&t, 2.0);
        assert!(b.data().iter().all(|v| (v - 0.25).abs() < 1e-12));
        let b = box_blur(&t, 7);
        assert!(b.data().iter().all(|v| (v - 0.25).abs() < 1e-12));
    }

    #[test]
    fn resize_identity_and_constant() {
        let t = Tensor::from_fn(1, 6, 5, |_, y, x| (y * 5 + x) as f64);
        assert_eq!(resize_bilinear(&t, 6, 5), t);
        let c = Tensor::filled(1, 8, 8, 0.3);
        let up = resize_bicubic(&c, 16, 16);
        assert!(up.data().iter().all(|v| (v - 0.3).abs() < 1e-12));
        let down = resize_bilinear(&c, 3, 5);
        assert!(down.data().iter().all(|v| (v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn box_downsample_averages_blocks() {
        let t = Tensor::from_fn(1, 4, 4, |_, y, x| (y * 4 + x) as f64);
        let d = downsample_box(&t, 2);
        assert_eq!(d.data(), &[2.5, 4.5, 10.5, 12.5]);
    }
}
