use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, Luma, Rgb, RgbImage};
use spqe_core::saliency::SaliencyMap;
use spqe_core::{Image, Plane, Tensor};

use crate::error::{Error, Result};

fn open(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "image not found")));
    }
    image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn is_16bit(img: &DynamicImage) -> bool {
    img.color().bytes_per_pixel() / img.color().channel_count() == 2
}

/// Reads an image as 3-channel `[0, 1]` floats. Grey inputs are replicated.
pub fn load_image(path: &Path) -> Result<Image> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f32> = if is_16bit(&img) {
        planar(&img.to_rgb16().into_raw(), w, h, |v| v as f32 / 65535.0)
    } else {
        planar(&img.to_rgb8().into_raw(), w, h, |v| v as f32 / 255.0)
    };
    Ok(Tensor::from_vec(3, h, w, data)?)
}

/// Interleaved RGB to channel-major planes.
fn planar<P: Copy>(raw: &[P], w: usize, h: usize, f: impl Fn(P) -> f32) -> Vec<f32> {
    let mut out = vec![0.0; 3 * w * h];
    for (i, px) in raw.chunks_exact(3).enumerate() {
        for c in 0..3 {
            out[c * w * h + i] = f(px[c]);
        }
    }
    out
}

/// Writes an 8-bit RGB PNG; values are clamped to `[0, 1]`.
pub fn save_png(img: &Image, path: &Path) -> Result<()> {
    let (c, h, w) = img.shape();
    if c != 3 && c != 1 {
        return Err(Error::format(path, format!("cannot write a {c}-channel image")));
    }
    let q = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let out = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let at = |ch: usize| q(img.get(if c == 1 { 0 } else { ch }, y as usize, x as usize));
        Rgb([at(0), at(1), at(2)])
    });
    out.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a single-channel map as 8-bit greyscale.
pub fn save_gray_png(map: &Plane, path: &Path) -> Result<()> {
    let out = GrayImage::from_fn(map.width() as u32, map.height() as u32, |x, y| {
        Luma([(map.get(0, y as usize, x as usize).clamp(0.0, 1.0) * 255.0).round() as u8])
    });
    out.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// `<dir>/<sample_id>.sal.png`
pub fn saliency_sidecar(dir: &Path, sample_id: &str) -> PathBuf {
    dir.join(format!("{sample_id}.sal.png"))
}

/// Reads an 8- or 16-bit greyscale saliency map and checks it against the
/// SR image size.
pub fn load_saliency(path: &Path, expected: (usize, usize)) -> Result<SaliencyMap> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = if is_16bit(&img) {
        img.to_luma16().into_raw().into_iter().map(|v| v as f64 / 65535.0).collect()
    } else {
        img.to_luma8().into_raw().into_iter().map(|v| v as f64 / 255.0).collect()
    };
    let map = Tensor::from_vec(1, h, w, data)?;
    SaliencyMap::from_file_values(map, expected).map_err(|e| Error::format(path, e.to_string()))
}
