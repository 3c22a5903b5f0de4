//! Five-stage convolutional encoder shared by the reference and SR branches.
//!
//! Stage `i` (1-based) runs at `1 / 2^(i-1)` of the padded input resolution.
//! Stage 1 convolves the input directly; every later stage first applies a
//! 2x2 max-pool to the previous stage output. The tapped feature of a stage
//! is the ReLU output of its last convolution.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{max_pool2, max_pool2_backward, relu_backward_in_place, relu_in_place, Conv2d};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const STAGES: usize = 5;

/// Inputs are padded so every dimension is a multiple of this.
pub const SPATIAL_MULTIPLE: usize = 1 << (STAGES - 1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Preset {
    Vgg16Like,
    Tiny,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InputSize {
    #[default]
    Free,
    Fixed(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub stage_channels: [usize; STAGES],
    pub convs_per_stage: [usize; STAGES],
    pub kernel_size: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub input_size: InputSize,
    pub preset: Preset,
}

impl BackboneConfig {
    pub fn vgg16_like() -> Self {
        Self {
            stage_channels: [64, 128, 256, 512, 512],
            convs_per_stage: [2, 2, 3, 3, 3],
            kernel_size: 3,
            activation: Activation::Relu,
            input_size: InputSize::Free,
            preset: Preset::Vgg16Like,
        }
    }

    pub fn tiny() -> Self {
        Self {
            stage_channels: [8, 16, 32, 64, 64],
            convs_per_stage: [1, 1, 1, 1, 1],
            kernel_size: 3,
            activation: Activation::Relu,
            input_size: InputSize::Free,
            preset: Preset::Tiny,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "kernel size must be odd and positive, got {}",
                self.kernel_size
            )));
        }
        if self.stage_channels.contains(&0) || self.convs_per_stage.contains(&0) {
            return Err(Error::InvalidArgument(
                "stage channels and conv counts must be positive".into(),
            ));
        }
        let expected = match self.preset {
            Preset::Vgg16Like => Some(Self::vgg16_like()),
            Preset::Tiny => Some(Self::tiny()),
            Preset::Custom => None,
        };
        if let Some(p) = expected {
            if p.stage_channels != self.stage_channels
                || p.convs_per_stage != self.convs_per_stage
                || p.kernel_size != self.kernel_size
            {
                return Err(Error::InvalidArgument(format!(
                    "{:?} preset does not match its layer schedule",
                    self.preset
                )));
            }
        }
        Ok(())
    }

    /// `(name, shape)` of every parameter array, in storage order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut in_c = 3;
        for s in 0..STAGES {
            for j in 0..self.convs_per_stage[s] {
                let oc = self.stage_channels[s];
                let k = self.kernel_size;
                out.push((conv_name(s, j, "weight"), alloc::vec![oc, in_c, k, k]));
                out.push((conv_name(s, j, "bias"), alloc::vec![oc]));
                in_c = oc;
            }
        }
        out
    }
}

pub(crate) fn conv_name(stage: usize, conv: usize, what: &str) -> String {
    format!("backbone.stage{}.conv{}.{}", stage + 1, conv + 1, what)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneParams<T> {
    pub stages: Vec<Vec<Conv2d<T>>>,
}

impl<T: Scalar> BackboneParams<T> {
    pub fn zeros(config: &BackboneConfig) -> Self {
        Self::build(config, |i, o, k| Conv2d::zeros(i, o, k))
    }

    pub fn random<R: Rng + ?Sized>(config: &BackboneConfig, rng: &mut R) -> Self {
        Self::build(config, |i, o, k| Conv2d::random(rng, i, o, k))
    }

    fn build(config: &BackboneConfig, mut make: impl FnMut(usize, usize, usize) -> Conv2d<T>) -> Self {
        let mut in_c = 3;
        let stages = (0..STAGES)
            .map(|s| {
                (0..config.convs_per_stage[s])
                    .map(|_| {
                        let conv = make(in_c, config.stage_channels[s], config.kernel_size);
                        in_c = config.stage_channels[s];
                        conv
                    })
                    .collect()
            })
            .collect();
        Self { stages }
    }

    pub fn matches(&self, config: &BackboneConfig) -> bool {
        self.stages.len() == STAGES
            && self.stages.iter().enumerate().all(|(s, convs)| {
                convs.len() == config.convs_per_stage[s]
                    && convs.iter().all(|c| {
                        c.out_channels == config.stage_channels[s] && c.kernel == config.kernel_size
                    })
            })
    }

    pub fn stage5_channels(&self) -> usize {
        self.stages[STAGES - 1].last().map_or(0, |c| c.out_channels)
    }

    pub fn stage_channels(&self) -> [usize; STAGES] {
        let mut out = [0; STAGES];
        for (s, convs) in self.stages.iter().enumerate() {
            out[s] = convs.last().map_or(0, |c| c.out_channels);
        }
        out
    }

    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(String, Vec<usize>, &'a [T])) {
        for (s, convs) in self.stages.iter().enumerate() {
            for (j, c) in convs.iter().enumerate() {
                f(conv_name(s, j, "weight"), c.weight_shape().to_vec(), &c.weight);
                f(conv_name(s, j, "bias"), alloc::vec![c.out_channels], &c.bias);
            }
        }
    }

    pub fn visit_mut<'a>(&'a mut self, f: &mut dyn FnMut(String, Vec<usize>, &'a mut [T])) {
        for (s, convs) in self.stages.iter_mut().enumerate() {
            for (j, c) in convs.iter_mut().enumerate() {
                let ws = c.weight_shape().to_vec();
                let oc = c.out_channels;
                f(conv_name(s, j, "weight"), ws, &mut c.weight);
                f(conv_name(s, j, "bias"), alloc::vec![oc], &mut c.bias);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Ref,
    Sr,
}

/// Five tapped feature maps of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramid<T> {
    pub stages: Vec<Tensor<T>>,
    pub branch: Branch,
}

impl<T: Scalar> FeaturePyramid<T> {
    /// Stage-5 map; for the SR branch this is the artifacts-aware feature `f_s`.
    pub fn top(&self) -> &Tensor<T> {
        &self.stages[STAGES - 1]
    }
}

/// Bottom/right reflection padding applied to reach [`SPATIAL_MULTIPLE`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Padding {
    pub height: usize,
    pub width: usize,
    pub bottom: usize,
    pub right: usize,
}

impl Padding {
    pub fn for_size(height: usize, width: usize) -> Self {
        let up = |n: usize| n.div_ceil(SPATIAL_MULTIPLE).max(1) * SPATIAL_MULTIPLE;
        Self {
            height,
            width,
            bottom: up(height) - height,
            right: up(width) - width,
        }
    }

    pub fn padded(&self) -> (usize, usize) {
        (self.height + self.bottom, self.width + self.right)
    }
}

/// Mirror index into `[0, n)` for any non-negative `i` (reflection without
/// edge repetition, periodic beyond one reflection).
#[inline]
pub fn mirror(i: usize, n: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i % period;
    if m < n {
        m
    } else {
        period - m
    }
}

pub fn pad_reflect<T: Copy + Default>(t: &Tensor<T>, pad: &Padding) -> Tensor<T> {
    if pad.bottom == 0 && pad.right == 0 {
        return t.clone();
    }
    let (ph, pw) = pad.padded();
    Tensor::from_fn(t.channels(), ph, pw, |c, y, x| {
        t.get(c, mirror(y, pad.height), mirror(x, pad.width))
    })
}

/// Adjoint of [`pad_reflect`]: folds padded gradients back onto the source grid.
pub fn unpad_grad<T: Scalar>(g: &Tensor<T>, pad: &Padding) -> Tensor<T> {
    if pad.bottom == 0 && pad.right == 0 {
        return g.clone();
    }
    let mut out = Tensor::zeros(g.channels(), pad.height, pad.width);
    for c in 0..g.channels() {
        for y in 0..g.height() {
            let sy = mirror(y, pad.height);
            for x in 0..g.width() {
                let sx = mirror(x, pad.width);
                let v = out.get(c, sy, sx) + g.get(c, y, x);
                out.set(c, sy, sx, v);
            }
        }
    }
    out
}

/// Intermediate activations needed by [`backward`].
#[derive(Debug, Clone)]
pub struct PyramidTrace<T> {
    input: Tensor<T>,
    /// Input of the first conv of stages 2..5 (pooled maps).
    pooled: Vec<Tensor<T>>,
    pool_argmax: Vec<Vec<u8>>,
    /// ReLU output of every conv, per stage.
    outputs: Vec<Vec<Tensor<T>>>,
}

impl<T: Scalar> PyramidTrace<T> {
    /// Appends ReLU on/off bits and pooling choices, which fix the
    /// piecewise-linear region the trace was computed in.
    pub fn activation_pattern(&self, out: &mut Vec<u8>) {
        for stage in &self.outputs {
            for t in stage {
                out.extend(t.data().iter().map(|&v| u8::from(v > T::zero())));
            }
        }
        for a in &self.pool_argmax {
            out.extend_from_slice(a);
        }
    }

    pub fn stage_shape(&self, stage: usize) -> (usize, usize, usize) {
        self.outputs[stage].last().expect("non-empty stage").shape()
    }
}

fn check_input<T: Scalar>(image: &Tensor<T>) -> Result<()> {
    if image.height() == 0 || image.width() == 0 {
        return Err(Error::InvalidArgument("zero-sized image".into()));
    }
    if image.channels() != 3 {
        return Err(Error::Shape(format!(
            "expected 3 channels, got {}",
            image.channels()
        )));
    }
    image.ensure_finite("input image")
}

/// Runs the encoder on an already padded image and keeps the trace.
pub fn forward_traced<T: Scalar>(
    params: &BackboneParams<T>,
    image: &Tensor<T>,
    branch: Branch,
) -> Result<(FeaturePyramid<T>, PyramidTrace<T>)> {
    check_input(image)?;
    if image.height() % SPATIAL_MULTIPLE != 0 || image.width() % SPATIAL_MULTIPLE != 0 {
        return Err(Error::Shape(format!(
            "input {}x{} is not padded to a multiple of {SPATIAL_MULTIPLE}",
            image.height(),
            image.width()
        )));
    }
    let mut pooled = Vec::with_capacity(STAGES - 1);
    let mut pool_argmax = Vec::with_capacity(STAGES - 1);
    let mut outputs: Vec<Vec<Tensor<T>>> = Vec::with_capacity(STAGES);
    for (s, convs) in params.stages.iter().enumerate() {
        let mut x = if s == 0 {
            image.clone()
        } else {
            let prev = outputs[s - 1].last().expect("non-empty stage");
            let (p, a) = max_pool2(prev);
            pool_argmax.push(a);
            pooled.push(p.clone());
            p
        };
        let mut outs = Vec::with_capacity(convs.len());
        for conv in convs {
            let mut y = conv.forward(&x);
            relu_in_place(&mut y);
            outs.push(y.clone());
            x = y;
        }
        outputs.push(outs);
    }
    let stages = outputs
        .iter()
        .map(|o| o.last().expect("non-empty stage").clone())
        .collect();
    Ok((
        FeaturePyramid { stages, branch },
        PyramidTrace {
            input: image.clone(),
            pooled,
            pool_argmax,
            outputs,
        },
    ))
}

/// Backpropagates per-stage gradients (any may be `None`) through the
/// encoder, accumulating into `grads`. Returns the input gradient when asked.
pub fn backward<T: Scalar>(
    params: &BackboneParams<T>,
    trace: &PyramidTrace<T>,
    mut stage_grads: Vec<Option<Tensor<T>>>,
    grads: &mut BackboneParams<T>,
    want_input_grad: bool,
) -> Option<Tensor<T>> {
    let mut carry: Option<Tensor<T>> = None;
    for s in (0..STAGES).rev() {
        let g = match (carry.take(), stage_grads[s].take()) {
            (Some(mut a), Some(b)) => {
                a.add_assign(&b);
                Some(a)
            }
            (a, b) => a.or(b),
        };
        let Some(mut g) = g else { continue };
        let convs = &params.stages[s];
        for j in (0..convs.len()).rev() {
            relu_backward_in_place(&trace.outputs[s][j], &mut g);
            let input = if j > 0 {
                &trace.outputs[s][j - 1]
            } else if s > 0 {
                &trace.pooled[s - 1]
            } else {
                &trace.input
            };
            let need = j > 0 || s > 0 || want_input_grad;
            match convs[j].backward(input, &g, &mut grads.stages[s][j], need) {
                Some(gi) => g = gi,
                None => return None,
            }
        }
        if s == 0 {
            return Some(g);
        }
        let prev = trace.outputs[s - 1].last().expect("non-empty stage");
        carry = Some(max_pool2_backward(
            &g,
            &trace.pool_argmax[s - 1],
            prev.height(),
            prev.width(),
        ));
    }
    None
}

/// Pads `image` and extracts its feature pyramid.
pub fn extract_pyramid<T: Scalar>(
    image: &Tensor<T>,
    params: &BackboneParams<T>,
    config: &BackboneConfig,
) -> Result<FeaturePyramid<T>> {
    check_input(image)?;
    if !params.matches(config) {
        return Err(Error::Shape("backbone parameters do not match config".into()));
    }
    let pad = Padding::for_size(image.height(), image.width());
    let padded = pad_reflect(image, &pad);
    forward_traced(params, &padded, Branch::Sr).map(|(p, _)| p)
}
