//! Differentiable building blocks with explicit forward/backward passes.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Fan-in scaled Gaussian initialisation (He normal).
pub(crate) fn he_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize, fan_in: usize) -> Vec<T> {
    let std = libm::sqrt(2.0 / fan_in.max(1) as f64);
    let normal = Normal::new(0.0, std).expect("finite std");
    (0..n).map(|_| T::of(normal.sample(rng))).collect()
}

/// Square-kernel 2-D convolution, stride 1, zero "same" padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `[out][in][ky][kx]`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            weight: vec![T::zero(); out_channels * in_channels * kernel * kernel],
            bias: vec![T::zero(); out_channels],
        }
    }

    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        Self {
            in_channels,
            out_channels,
            kernel,
            weight: he_normal(rng, out_channels * fan_in, fan_in),
            bias: vec![T::zero(); out_channels],
        }
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel, self.kernel]
    }

    /// Column matrix `[in * k * k][h * w]` of zero-padded input patches.
    fn im2col(&self, input: &Tensor<T>) -> Vec<T> {
        let (h, w) = (input.height(), input.width());
        let hw = h * w;
        let pad = (self.kernel / 2) as isize;
        let mut col = vec![T::zero(); self.in_channels * self.kernel * self.kernel * hw];
        let mut row = 0;
        for ic in 0..self.in_channels {
            let src = input.plane(ic);
            for ky in 0..self.kernel {
                let dy = ky as isize - pad;
                let (y0, y1) = valid_range(h, dy);
                for kx in 0..self.kernel {
                    let dx = kx as isize - pad;
                    let (x0, x1) = valid_range(w, dx);
                    let dst = &mut col[row * hw..(row + 1) * hw];
                    if x0 < x1 {
                        let sx0 = (x0 as isize + dx) as usize;
                        for y in y0..y1 {
                            let sy = (y as isize + dy) as usize;
                            dst[y * w + x0..y * w + x1].copy_from_slice(&src[sy * w + sx0..sy * w + sx0 + (x1 - x0)]);
                        }
                    }
                    row += 1;
                }
            }
        }
        col
    }

    /// Adjoint of [`Self::im2col`].
    fn col2im(&self, col: &[T], h: usize, w: usize) -> Tensor<T> {
        let hw = h * w;
        let pad = (self.kernel / 2) as isize;
        let mut out = Tensor::zeros(self.in_channels, h, w);
        let mut row = 0;
        for ic in 0..self.in_channels {
            let dst = out.plane_mut(ic);
            for ky in 0..self.kernel {
                let dy = ky as isize - pad;
                let (y0, y1) = valid_range(h, dy);
                for kx in 0..self.kernel {
                    let dx = kx as isize - pad;
                    let (x0, x1) = valid_range(w, dx);
                    let src = &col[row * hw..(row + 1) * hw];
                    if x0 < x1 {
                        let sx0 = (x0 as isize + dx) as usize;
                        for y in y0..y1 {
                            let sy = (y as isize + dy) as usize;
                            let d = &mut dst[sy * w + sx0..sy * w + sx0 + (x1 - x0)];
                            for (a, &b) in d.iter_mut().zip(&src[y * w + x0..y * w + x1]) {
                                *a += b;
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
        out
    }

    pub fn forward(&self, input: &Tensor<T>) -> Tensor<T> {
        debug_assert_eq!(input.channels(), self.in_channels);
        let (h, w) = (input.height(), input.width());
        let hw = h * w;
        let col = self.im2col(input);
        let depth = self.in_channels * self.kernel * self.kernel;
        let mut out = Tensor::zeros(self.out_channels, h, w);
        let data = out.data_mut();
        for (oc, plane) in data.chunks_mut(hw).enumerate() {
            plane.iter_mut().for_each(|v| *v = self.bias[oc]);
        }
        // four output channels per pass over the column matrix
        let mut oc = 0;
        while oc < self.out_channels {
            let block = (self.out_channels - oc).min(4);
            let (head, _) = data[oc * hw..].split_at_mut(block * hw);
            let mut rows: Vec<&mut [T]> = head.chunks_mut(hw).collect();
            for j in 0..depth {
                let c = &col[j * hw..(j + 1) * hw];
                if block == 4 {
                    let k0 = self.weight[oc * depth + j];
                    let k1 = self.weight[(oc + 1) * depth + j];
                    let k2 = self.weight[(oc + 2) * depth + j];
                    let k3 = self.weight[(oc + 3) * depth + j];
                    let [r0, r1, r2, r3] = &mut rows[..] else { unreachable!() };
                    let (r0, r1, r2, r3) = (&mut r0[..hw], &mut r1[..hw], &mut r2[..hw], &mut r3[..hw]);
                    for i in 0..hw {
                        let v = c[i];
                        r0[i] += k0 * v;
                        r1[i] += k1 * v;
                        r2[i] += k2 * v;
                        r3[i] += k3 * v;
                    }
                } else {
                    for (b, r) in rows.iter_mut().enumerate() {
                        let k = self.weight[(oc + b) * depth + j];
                        for (o, &v) in r.iter_mut().zip(c) {
                            *o += k * v;
                        }
                    }
                }
            }
            oc += block;
        }
        out
    }

    /// Accumulates parameter gradients into `grads` and optionally returns
    /// the gradient with respect to `input`.
    pub fn backward(
        &self,
        input: &Tensor<T>,
        grad_out: &Tensor<T>,
        grads: &mut Conv2d<T>,
        want_input_grad: bool,
    ) -> Option<Tensor<T>> {
        let (h, w) = (input.height(), input.width());
        let hw = h * w;
        let depth = self.in_channels * self.kernel * self.kernel;
        let col = self.im2col(input);
        for oc in 0..self.out_channels {
            let g = grad_out.plane(oc);
            grads.bias[oc] += g.iter().copied().sum::<T>();
            let gw = &mut grads.weight[oc * depth..(oc + 1) * depth];
            for (j, acc) in gw.iter_mut().enumerate() {
                let c = &col[j * hw..(j + 1) * hw];
                *acc += g.iter().zip(c).map(|(&a, &b)| a * b).sum::<T>();
            }
        }
        if !want_input_grad {
            return None;
        }
        let mut dcol = col;
        dcol.iter_mut().for_each(|v| *v = T::zero());
        for oc in 0..self.out_channels {
            let g = grad_out.plane(oc);
            for j in 0..depth {
                let k = self.weight[oc * depth + j];
                if k == T::zero() {
                    continue;
                }
                for (d, &a) in dcol[j * hw..(j + 1) * hw].iter_mut().zip(g) {
                    *d += k * a;
                }
            }
        }
        Some(self.col2im(&dcol, h, w))
    }
}

/// Output rows `y` for which `y + offset` stays inside `[0, len)`.
#[inline]
fn valid_range(len: usize, offset: isize) -> (usize, usize) {
    let lo = (-offset).max(0) as usize;
    let hi = (len as isize - offset).min(len as isize).max(0) as usize;
    (lo.min(hi), hi)
}

/// Transposed convolution ("deconvolution"): stride `s`, kernel `k`, no padding.
/// Output size is `(n - 1) * s + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    /// `[in][out][ky][kx]`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvTranspose2d<T> {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            weight: vec![T::zero(); in_channels * out_channels * kernel * kernel],
            bias: vec![T::zero(); out_channels],
        }
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.in_channels, self.out_channels, self.kernel, self.kernel]
    }

    pub fn output_len(&self, n: usize) -> usize {
        (n.max(1) - 1) * self.stride + self.kernel
    }

    pub fn forward(&self, input: &Tensor<T>) -> Tensor<T> {
        let (h, w) = (input.height(), input.width());
        let (oh, ow) = (self.output_len(h), self.output_len(w));
        let k = self.kernel;
        let mut out = Tensor::zeros(self.out_channels, oh, ow);
        for oc in 0..self.out_channels {
            out.plane_mut(oc).iter_mut().for_each(|v| *v = self.bias[oc]);
        }
        for ic in 0..self.in_channels {
            let src = input.plane(ic);
            for oc in 0..self.out_channels {
                let base = (ic * self.out_channels + oc) * k * k;
                let dst = out.plane_mut(oc);
                for y in 0..h {
                    for x in 0..w {
                        let v = src[y * w + x];
                        for ky in 0..k {
                            let row = (y * self.stride + ky) * ow + x * self.stride;
                            for kx in 0..k {
                                dst[row + kx] += v * self.weight[base + ky * k + kx];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn backward(&self, input: &Tensor<T>, grad_out: &Tensor<T>, grads: &mut Self) {
        let (h, w) = (input.height(), input.width());
        let ow = grad_out.width();
        let k = self.kernel;
        for oc in 0..self.out_channels {
            grads.bias[oc] += grad_out.plane(oc).iter().copied().sum::<T>();
        }
        for ic in 0..self.in_channels {
            let src = input.plane(ic);
            for oc in 0..self.out_channels {
                let base = (ic * self.out_channels + oc) * k * k;
                let g = grad_out.plane(oc);
                for y in 0..h {
                    for x in 0..w {
                        let v = src[y * w + x];
                        for ky in 0..k {
                            let row = (y * self.stride + ky) * ow + x * self.stride;
                            for kx in 0..k {
                                grads.weight[base + ky * k + kx] += v * g[row + kx];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// 2x2 max pooling, stride 2. Returns the pooled map and the argmax slot
/// (0..4, row-major within the window) of every output cell.
pub fn max_pool2<T: Scalar>(input: &Tensor<T>) -> (Tensor<T>, Vec<u8>) {
    let (c, h, w) = input.shape();
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(c, oh, ow);
    let mut arg = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let src = input.plane(ch);
        let dst = out.plane_mut(ch);
        for y in 0..oh {
            for x in 0..ow {
                let i0 = 2 * y * w + 2 * x;
                let cand = [src[i0], src[i0 + 1], src[i0 + w], src[i0 + w + 1]];
                let mut best = 0u8;
                for (j, &v) in cand.iter().enumerate().skip(1) {
                    if v > cand[best as usize] {
                        best = j as u8;
                    }
                }
                dst[y * ow + x] = cand[best as usize];
                arg.push(best);
            }
        }
    }
    (out, arg)
}

pub fn max_pool2_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    argmax: &[u8],
    in_h: usize,
    in_w: usize,
) -> Tensor<T> {
    let (c, oh, ow) = grad_out.shape();
    let mut grad_in = Tensor::zeros(c, in_h, in_w);
    for ch in 0..c {
        let g = grad_out.plane(ch);
        let dst = grad_in.plane_mut(ch);
        for y in 0..oh {
            for x in 0..ow {
                let a = argmax[(ch * oh + y) * ow + x] as usize;
                let idx = (2 * y + a / 2) * in_w + 2 * x + a % 2;
                dst[idx] += g[y * ow + x];
            }
        }
    }
    grad_in
}

pub fn relu_in_place<T: Scalar>(t: &mut Tensor<T>) {
    for v in t.data_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Masks `grad` by the positive support of a ReLU output.
pub fn relu_backward_in_place<T: Scalar>(output: &Tensor<T>, grad: &mut Tensor<T>) {
    for (g, &o) in grad.data_mut().iter_mut().zip(output.data()) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Fully connected layer, `weight` is `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![T::zero(); in_dim * out_dim],
            bias: vec![T::zero(); out_dim],
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: he_normal(rng, in_dim * out_dim, in_dim),
            bias: vec![T::zero(); out_dim],
        }
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        (0..self.out_dim)
            .map(|o| {
                let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
                row.iter().zip(x).fold(self.bias[o], |acc, (&w, &v)| acc + w * v)
            })
            .collect()
    }

    pub fn backward(&self, x: &[T], grad_out: &[T], grads: &mut Self) -> Vec<T> {
        let mut grad_in = vec![T::zero(); self.in_dim];
        for o in 0..self.out_dim {
            let g = grad_out[o];
            grads.bias[o] += g;
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut grads.weight[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grow[i] += g * x[i];
                grad_in[i] += g * row[i];
            }
        }
        grad_in
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(conv: &Conv2d<f64>, input: &Tensor<f64>) -> Tensor<f64> {
        let (_, h, w) = input.shape();
        let p = (conv.kernel / 2) as isize;
        Tensor::from_fn(conv.out_channels, h, w, |oc, y, x| {
            let mut acc = conv.bias[oc];
            for ic in 0..conv.in_channels {
                for ky in 0..conv.kernel {
                    for kx in 0..conv.kernel {
                        let sy = y as isize + ky as isize - p;
                        let sx = x as isize + kx as isize - p;
                        if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                            acc += conv.weight[((oc * conv.in_channels + ic) * conv.kernel + ky) * conv.kernel + kx] * input.get(ic, sy as usize, sx as usize);
                        }
                    }
                }
            }
            acc
        })
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    }

    #[test]
    fn conv_matches_direct_definition() {
        let mut s = 3u64;
        let mut conv = Conv2d::<f64>::zeros(3, 4, 3);
        conv.weight.iter_mut().for_each(|w| *w = lcg(&mut s));
        conv.bias.iter_mut().for_each(|b| *b = lcg(&mut s));
        let input = Tensor::from_fn(3, 7, 5, |_, _, _| lcg(&mut s));
        let fast = conv.forward(&input);
        let slow = naive_conv(&conv, &input);
        for (a, b) in fast.data().iter().zip(slow.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_backward_is_adjoint_of_forward() {
        // <conv(x) - b, g> == <x, conv^T g> for the linear part.
        let mut s = 11u64;
        let mut conv = Conv2d::<f64>::zeros(2, 3, 3);
        conv.weight.iter_mut().for_each(|w| *w = lcg(&mut s));
        let x = Tensor::from_fn(2, 6, 6, |_, _, _| lcg(&mut s));
        let g = Tensor::from_fn(3, 6, 6, |_, _, _| lcg(&mut s));
        let y = conv.forward(&x);
        let mut grads = Conv2d::zeros(2, 3, 3);
        let gx = conv.backward(&x, &g, &mut grads, true).unwrap();
        let lhs: f64 = y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(gx.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
        // weight gradient of <conv(x), g> is linear in w, so it must reproduce lhs
        let via_w: f64 = conv.weight.iter().zip(&grads.weight).map(|(a, b)| a * b).sum();
        assert!((lhs - via_w).abs() < 1e-10);
    }

    #[test]
    fn transposed_conv_output_shape() {
        let t = ConvTranspose2d::<f32>::zeros(3, 3, 4, 2);
        assert_eq!(t.output_len(32), 66);
        let t3 = ConvTranspose2d::<f32>::zeros(3, 3, 6, 3);
        assert_eq!(t3.output_len(21), 66);
    }

    #[test]
    fn max_pool_round_trip_routes_gradient_to_argmax() {
        let x = Tensor::from_vec(1, 2, 4, vec![1.0f64, 5.0, 2.0, 0.0, 3.0, 4.0, 9.0, 1.0]).unwrap();
        let (p, arg) = max_pool2(&x);
        assert_eq!(p.data(), &[5.0, 9.0]);
        let g = Tensor::from_vec(1, 1, 2, vec![1.0, 2.0]).unwrap();
        let gi = max_pool2_backward(&g, &arg, 2, 4);
        assert_eq!(gi.data(), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
    }
}
