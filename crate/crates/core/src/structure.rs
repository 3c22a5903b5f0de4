//! Referenced (structure) score: siamese feature differences, per-scale
//! pooled heads and a learned convex combination over the five scales.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backbone::{FeaturePyramid, STAGES};
use crate::data::RefKind;
use crate::error::{Error, Result};
use crate::layers::ConvTranspose2d;
use crate::mlp::Mlp;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Per-stage `F_r^i - F_s^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffPyramid<T> {
    pub stages: Vec<Tensor<T>>,
}

pub fn fuse_difference<T: Scalar>(
    pyr_r: &FeaturePyramid<T>,
    pyr_s: &FeaturePyramid<T>,
) -> Result<DiffPyramid<T>> {
    if pyr_r.stages.len() != pyr_s.stages.len() {
        return Err(Error::Shape("pyramids have different stage counts".into()));
    }
    let stages = pyr_r
        .stages
        .iter()
        .zip(&pyr_s.stages)
        .map(|(r, s)| r.sub(s))
        .collect::<Result<Vec<_>>>()?;
    Ok(DiffPyramid { stages })
}

/// Per-scale scores `S_s^i`: each head sees the spatial mean of its stage.
pub fn scale_scores<T: Scalar>(diff: &DiffPyramid<T>, heads: &[Mlp<T>]) -> Result<Vec<T>> {
    if heads.len() != diff.stages.len() {
        return Err(Error::Shape(format!(
            "{} heads for {} scales",
            heads.len(),
            diff.stages.len()
        )));
    }
    diff.stages
        .iter()
        .zip(heads)
        .enumerate()
        .map(|(i, (f, head))| {
            if head.in_dim() != f.channels() {
                return Err(Error::Shape(format!(
                    "scale {} head expects {} channels, feature has {}",
                    i + 1,
                    head.in_dim(),
                    f.channels()
                )));
            }
            f.ensure_finite("difference features")?;
            Ok(head.forward(&f.global_average()))
        })
        .collect()
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = logits.iter().map(|&l| (l - m).exp()).collect();
    let z: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Learned scale-weight logits; effective weights are their softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleWeights<T> {
    pub logits: Vec<T>,
}

impl<T: Scalar> ScaleWeights<T> {
    pub fn uniform() -> Self {
        Self {
            logits: alloc::vec![T::zero(); STAGES],
        }
    }

    pub fn weights(&self) -> Vec<T> {
        softmax(&self.logits)
    }

    pub fn combine(&self, scores: &[T]) -> T {
        self.weights().iter().zip(scores).map(|(&w, &s)| w * s).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AdapterMode {
    HrPassthrough,
    LrDeconv,
}

/// Learned upsampling of an LR reference to the SR grid: one transposed
/// convolution (stride = scale, kernel = 2 * scale, RGB to RGB) followed by
/// a centred crop.
#[derive(Debug, Clone, PartialEq)]
pub struct RefAdapter<T> {
    pub scale: usize,
    pub deconv: ConvTranspose2d<T>,
}

impl<T: Scalar> RefAdapter<T> {
    /// Initialised to per-channel bilinear upsampling.
    pub fn bilinear(scale: usize) -> Self {
        let k = 2 * scale;
        let mut deconv = ConvTranspose2d::zeros(3, 3, k, scale);
        let factor = scale as f64;
        let center = factor - 0.5;
        for c in 0..3 {
            let base = (c * 3 + c) * k * k;
            for y in 0..k {
                for x in 0..k {
                    let wy = 1.0 - libm::fabs(y as f64 - center) / factor;
                    let wx = 1.0 - libm::fabs(x as f64 - center) / factor;
                    deconv.weight[base + y * k + x] = T::of(wy * wx);
                }
            }
        }
        Self { scale, deconv }
    }

    fn crop_window(&self, lr_h: usize, lr_w: usize, target: (usize, usize)) -> Result<(usize, usize)> {
        let (oh, ow) = (self.deconv.output_len(lr_h), self.deconv.output_len(lr_w));
        let (th, tw) = target;
        if oh < th || ow < tw || oh - th > 2 * self.scale || ow - tw > 2 * self.scale {
            return Err(Error::Shape(format!(
                "LR reference {lr_h}x{lr_w} at scale {} upsamples to {oh}x{ow}, cannot crop to {th}x{tw}",
                self.scale
            )));
        }
        Ok(((oh - th) / 2, (ow - tw) / 2))
    }

    pub fn forward(&self, lr: &Tensor<T>, target: (usize, usize)) -> Result<Tensor<T>> {
        let (top, left) = self.crop_window(lr.height(), lr.width(), target)?;
        let up = self.deconv.forward(lr);
        Ok(Tensor::from_fn(3, target.0, target.1, |c, y, x| {
            up.get(c, y + top, x + left)
        }))
    }

    pub fn backward(&self, lr: &Tensor<T>, grad: &Tensor<T>, grads: &mut Self) -> Result<()> {
        let target = (grad.height(), grad.width());
        let (top, left) = self.crop_window(lr.height(), lr.width(), target)?;
        let (oh, ow) = (self.deconv.output_len(lr.height()), self.deconv.output_len(lr.width()));
        let mut full = Tensor::zeros(3, oh, ow);
        for c in 0..3 {
            for y in 0..target.0 {
                for x in 0..target.1 {
                    full.set(c, y + top, x + left, grad.get(c, y, x));
                }
            }
        }
        self.deconv.backward(lr, &full, &mut grads.deconv);
        Ok(())
    }
}

/// Brings a reference onto the SR grid. HR references pass through
/// unchanged (dimensions must already agree); LR references go through the
/// learned adapter.
pub fn adapt_reference<T: Scalar>(
    reference: &Tensor<T>,
    ref_kind: RefKind,
    scale_factor: usize,
    adapter: Option<&RefAdapter<T>>,
    sr_dims: (usize, usize),
) -> Result<Tensor<T>> {
    match ref_kind {
        RefKind::Hr => {
            if (reference.height(), reference.width()) != sr_dims {
                return Err(Error::Shape(format!(
                    "HR reference {}x{} differs from SR {}x{}",
                    reference.height(),
                    reference.width(),
                    sr_dims.0,
                    sr_dims.1
                )));
            }
            Ok(reference.clone())
        }
        RefKind::Lr => {
            let adapter = adapter.ok_or_else(|| {
                Error::InvalidArgument("LR reference requires a deconvolution adapter".into())
            })?;
            if adapter.scale != scale_factor {
                return Err(Error::InvalidArgument(format!(
                    "adapter trained for scale {}, sample has scale {scale_factor}",
                    adapter.scale
                )));
            }
            adapter.forward(reference, sr_dims)
        }
        RefKind::None => Err(Error::InvalidArgument("no reference to adapt".into())),
    }
}
