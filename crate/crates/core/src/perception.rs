//! No-reference (perception) score: saliency-gated stage-5 SR features.

use alloc::vec::Vec;

use crate::backbone::{pad_reflect, Padding};
use crate::error::Result;
use crate::imgops::resize_bilinear;
use crate::mlp::Mlp;
use crate::saliency::SaliencyMap;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `F_p` and its pooled vector `F_{v,p}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GatedFeature<T> {
    pub gated: Tensor<T>,
    pub pooled: Vec<T>,
}

/// Resamples a saliency map (on the original image grid) to the stage-5
/// grid, padding it exactly like the image.
pub fn gate_weights<T: Scalar>(sal: &SaliencyMap, pad: &Padding, out_h: usize, out_w: usize) -> Tensor<T> {
    let padded = pad_reflect(&sal.map, pad);
    resize_bilinear(&padded, out_h, out_w).cast()
}

/// Elementwise product of one spatial weight plane with every channel.
pub fn apply_gate<T: Scalar>(weights: &Tensor<T>, f_s: &Tensor<T>) -> Tensor<T> {
    let w = weights.plane(0);
    Tensor::from_fn(f_s.channels(), f_s.height(), f_s.width(), |c, y, x| {
        w[y * f_s.width() + x] * f_s.get(c, y, x)
    })
}

/// Gates `f_s` with a saliency map already on the (padded) image grid.
pub fn saliency_gate<T: Scalar>(sal: &SaliencyMap, f_s: &Tensor<T>) -> Result<GatedFeature<T>> {
    f_s.ensure_finite("stage-5 features")?;
    sal.map.ensure_finite("saliency map")?;
    let weights: Tensor<T> = resize_bilinear(&sal.map, f_s.height(), f_s.width()).cast();
    let gated = apply_gate(&weights, f_s);
    let pooled = gated.global_average();
    Ok(GatedFeature { gated, pooled })
}

pub fn perception_from_gated<T: Scalar>(g: &GatedFeature<T>, head: &Mlp<T>) -> T {
    head.forward(&g.pooled)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features() -> Tensor<f64> {
        Tensor::from_fn(6, 4, 4, |c, y, x| ((c * 7 + y * 3 + x * 5) % 11) as f64 * 0.1)
    }

    #[test]
    fn ones_is_identity_and_zeros_annihilate() {
        let f = features();
        let g = saliency_gate(&SaliencyMap::ones(64, 64), &f).unwrap();
        assert_eq!(g.gated, f);
        assert_eq!(g.pooled, f.global_average());
        let zero = SaliencyMap::ones(64, 64).scaled(0.0);
        let g = saliency_gate(&zero, &f).unwrap();
        assert!(g.gated.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gate_matches_loop_oracle() {
        let f = features();
        let sal = SaliencyMap {
            map: Tensor::from_fn(1, 4, 4, |_, y, x| ((y * 4 + x) % 5) as f64 / 4.0),
            provenance: crate::saliency::SaliencyProvenance::File,
        };
        let g = saliency_gate(&sal, &f).unwrap();
        for c in 0..6 {
            for y in 0..4 {
                for x in 0..4 {
                    let want = sal.map.get(0, y, x) * f.get(c, y, x);
                    assert!((g.gated.get(c, y, x) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_head_gives_half() {
        let head = Mlp::<f64>::zeros(6);
        let g = saliency_gate(&SaliencyMap::ones(16, 16), &features()).unwrap();
        assert_eq!(perception_from_gated(&g, &head), 0.5);
    }
}
