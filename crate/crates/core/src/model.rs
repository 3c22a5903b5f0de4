//! The full SPQE network: shared backbone, structure/perception/weight heads,
//! score fusion and the L1 objective, with an exact backward pass.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backbone::{
    self, pad_reflect, unpad_grad, BackboneConfig, BackboneParams, Branch, FeaturePyramid, Padding,
    PyramidTrace, STAGES,
};
use crate::data::{RefKind, ScoreBundle};
use crate::error::{Error, Result};
use crate::mlp::{Mlp, MlpTrace};
use crate::perception::{apply_gate, gate_weights};
use crate::saliency::{spectral_residual, SaliencyMap};
use crate::scalar::Scalar;
use crate::structure::{adapt_reference, ScaleWeights, RefAdapter};
use crate::tensor::{Image, Tensor};

/// Which score is supervised, and how the two branch scores are fused.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "w", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    /// Adaptive fusion with the learned `W_p`.
    Full,
    StructureOnly,
    PerceptionOnly,
    /// `w * S_p + (1 - w) * S_s` with a constant `w`.
    FixedWeight(f64),
}

impl Mode {
    pub fn label(&self) -> String {
        match self {
            Mode::Full => "FULL".into(),
            Mode::StructureOnly => "STRUCTURE_ONLY".into(),
            Mode::PerceptionOnly => "PERCEPTION_ONLY".into(),
            Mode::FixedWeight(w) => format!("FIXED_WEIGHT({w})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    /// Fuse all five scales; otherwise only stage 5 scores structure.
    pub multi_scale: bool,
    /// Gate perception features with saliency; otherwise an all-ones map.
    pub saliency: bool,
}

impl Default for Strategy {
    fn default() -> Self {
        Self {
            multi_scale: true,
            saliency: true,
        }
    }
}

/// Per-channel standardisation applied to images before the backbone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputNorm {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Default for InputNorm {
    /// ImageNet statistics, the customary VGG preprocessing.
    fn default() -> Self {
        Self {
            mean: [0.485, 0.456, 0.406],
            std: [0.229, 0.224, 0.225],
        }
    }
}

impl InputNorm {
    pub fn identity() -> Self {
        Self {
            mean: [0.0; 3],
            std: [1.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.iter().chain(&self.std).any(|v| !v.is_finite()) || self.std.iter().any(|&s| s <= 0.0) {
            return Err(Error::InvalidArgument(format!("invalid input normalisation {self:?}")));
        }
        Ok(())
    }

    pub fn apply<T: Scalar>(&self, t: &Tensor<T>) -> Tensor<T> {
        let mut out = t.clone();
        for c in 0..out.channels() {
            let (m, s) = (T::of(self.mean[c]), T::of(self.std[c]));
            out.plane_mut(c).iter_mut().for_each(|v| *v = (*v - m) / s);
        }
        out
    }

    /// Chain rule through [`Self::apply`].
    pub fn backward<T: Scalar>(&self, grad: &mut Tensor<T>) {
        for c in 0..grad.channels() {
            let s = T::of(self.std[c]);
            grad.plane_mut(c).iter_mut().for_each(|v| *v /= s);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub backbone: BackboneConfig,
    pub ref_kind: RefKind,
    /// Upsampling factor of the LR adapter; ignored for HR references.
    pub scale_factor: usize,
    pub mode: Mode,
    pub strategy: Strategy,
    #[serde(default)]
    pub input_norm: InputNorm,
}

impl ModelConfig {
    /// Default strategy (both on) and input normalisation.
    pub fn new(backbone: BackboneConfig, ref_kind: RefKind, scale_factor: usize, mode: Mode) -> Self {
        Self {
            backbone,
            ref_kind,
            scale_factor,
            mode,
            strategy: Strategy::default(),
            input_norm: InputNorm::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.backbone.validate()?;
        self.input_norm.validate()?;
        if let Mode::FixedWeight(w) = self.mode {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidArgument(format!("fixed weight {w} outside [0, 1]")));
            }
        }
        if self.mode == Mode::StructureOnly && self.ref_kind == RefKind::None {
            return Err(Error::InvalidArgument("structure-only mode requires references".into()));
        }
        if self.ref_kind == RefKind::Lr && self.scale_factor < 2 {
            return Err(Error::InvalidArgument("LR references need scale factor >= 2".into()));
        }
        Ok(())
    }

    pub fn uses_structure(&self) -> bool {
        self.mode != Mode::PerceptionOnly && self.ref_kind != RefKind::None
    }
}

/// One training/evaluation example held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub sr: Image,
    pub reference: Option<Image>,
    pub ref_kind: RefKind,
    pub scale_factor: usize,
    pub saliency: Option<SaliencyMap>,
    pub gt: f64,
}

/// All learned parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SpqeParams<T> {
    pub backbone: BackboneParams<T>,
    pub scale_heads: Vec<Mlp<T>>,
    pub scale_weights: ScaleWeights<T>,
    pub perception_head: Mlp<T>,
    pub weight_head: Mlp<T>,
    pub adapter: Option<RefAdapter<T>>,
}

impl<T: Scalar> SpqeParams<T> {
    /// Every parameter zero (the LR adapter, if any, still starts bilinear).
    pub fn zeros(config: &ModelConfig) -> Self {
        let channels = config.backbone.stage_channels;
        Self {
            backbone: BackboneParams::zeros(&config.backbone),
            scale_heads: channels.iter().map(|&c| Mlp::zeros(c)).collect(),
            scale_weights: ScaleWeights::uniform(),
            perception_head: Mlp::zeros(channels[STAGES - 1]),
            weight_head: Mlp::zeros(channels[STAGES - 1]),
            adapter: (config.ref_kind == RefKind::Lr).then(|| RefAdapter::bilinear(config.scale_factor)),
        }
    }

    pub fn random<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Self {
        let channels = config.backbone.stage_channels;
        let backbone = BackboneParams::random(&config.backbone, rng);
        let scale_heads = channels.iter().map(|&c| Mlp::random(rng, c)).collect();
        let perception_head = Mlp::random(rng, channels[STAGES - 1]);
        let weight_head = Mlp::random(rng, channels[STAGES - 1]);
        Self {
            backbone,
            scale_heads,
            scale_weights: ScaleWeights::uniform(),
            perception_head,
            weight_head,
            adapter: (config.ref_kind == RefKind::Lr).then(|| RefAdapter::bilinear(config.scale_factor)),
        }
    }

    /// Gradient accumulator with the same layout as `self`.
    /// Sets the output bias of every score head (perception and per-scale
    /// structure heads) so each starts by predicting `target`.
    pub fn set_score_bias(&mut self, target: f64) {
        let t = target.clamp(0.01, 0.99);
        let logit = T::of(libm::log(t / (1.0 - t)));
        for head in self.scale_heads.iter_mut().chain(core::iter::once(&mut self.perception_head)) {
            head.layers[2].bias[0] = logit;
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.visit_mut(&mut |_, _, s| s.iter_mut().for_each(|v| *v = T::zero()));
        z
    }

    /// Zeroes every score head, so all scores and the weight sit at 0.5.
    pub fn zero_heads(&mut self) {
        let zero = |m: &mut Mlp<T>| {
            for l in &mut m.layers {
                l.weight.iter_mut().for_each(|v| *v = T::zero());
                l.bias.iter_mut().for_each(|v| *v = T::zero());
            }
        };
        self.scale_heads.iter_mut().for_each(zero);
        zero(&mut self.perception_head);
        zero(&mut self.weight_head);
    }

    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(String, Vec<usize>, &'a [T])) {
        self.backbone.visit(f);
        for (i, h) in self.scale_heads.iter().enumerate() {
            h.visit(&format!("structure.scale{}", i + 1), f);
        }
        f("structure.scale_logits".into(), vec![self.scale_weights.logits.len()], &self.scale_weights.logits);
        self.perception_head.visit("perception", f);
        self.weight_head.visit("weight", f);
        if let Some(a) = &self.adapter {
            f("adapter.weight".into(), a.deconv.weight_shape().to_vec(), &a.deconv.weight);
            f("adapter.bias".into(), vec![a.deconv.out_channels], &a.deconv.bias);
        }
    }

    pub fn visit_mut<'a>(&'a mut self, f: &mut dyn FnMut(String, Vec<usize>, &'a mut [T])) {
        self.backbone.visit_mut(f);
        for (i, h) in self.scale_heads.iter_mut().enumerate() {
            h.visit_mut(&format!("structure.scale{}", i + 1), f);
        }
        let n = self.scale_weights.logits.len();
        f("structure.scale_logits".into(), vec![n], &mut self.scale_weights.logits);
        self.perception_head.visit_mut("perception", f);
        self.weight_head.visit_mut("weight", f);
        if let Some(a) = &mut self.adapter {
            let shape = a.deconv.weight_shape().to_vec();
            let oc = a.deconv.out_channels;
            f("adapter.weight".into(), shape, &mut a.deconv.weight);
            f("adapter.bias".into(), vec![oc], &mut a.deconv.bias);
        }
    }

    pub fn slices(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        self.visit(&mut |_, _, s| out.push(s));
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        self.visit_mut(&mut |_, _, s| out.push(s));
        out
    }

    pub fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn cast<U: Scalar>(&self) -> SpqeParams<U> {
        let conv = |v: &Vec<T>| v.iter().map(|x| U::of(x.f64())).collect::<Vec<U>>();
        let mlp = |m: &Mlp<T>| Mlp {
            layers: m.layers.clone().map(|l| crate::layers::Dense {
                in_dim: l.in_dim,
                out_dim: l.out_dim,
                weight: conv(&l.weight),
                bias: conv(&l.bias),
            }),
        };
        SpqeParams {
            backbone: BackboneParams {
                stages: self
                    .backbone
                    .stages
                    .iter()
                    .map(|s| {
                        s.iter()
                            .map(|c| crate::layers::Conv2d {
                                in_channels: c.in_channels,
                                out_channels: c.out_channels,
                                kernel: c.kernel,
                                weight: conv(&c.weight),
                                bias: conv(&c.bias),
                            })
                            .collect()
                    })
                    .collect(),
            },
            scale_heads: self.scale_heads.iter().map(mlp).collect(),
            scale_weights: ScaleWeights {
                logits: conv(&self.scale_weights.logits),
            },
            perception_head: mlp(&self.perception_head),
            weight_head: mlp(&self.weight_head),
            adapter: self.adapter.as_ref().map(|a| RefAdapter {
                scale: a.scale,
                deconv: crate::layers::ConvTranspose2d {
                    in_channels: a.deconv.in_channels,
                    out_channels: a.deconv.out_channels,
                    kernel: a.deconv.kernel,
                    stride: a.deconv.stride,
                    weight: conv(&a.deconv.weight),
                    bias: conv(&a.deconv.bias),
                },
            }),
        }
    }
}

/// `w * a + (1 - w) * b`, clamped so rounding never leaves `[min, max]`.
fn convex<T: Scalar>(w: T, a: T, b: T) -> T {
    (w * a + (T::one() - w) * b).max(a.min(b)).min(a.max(b))
}

/// Convex fusion `w_p * s_p + (1 - w_p) * s_s`.
pub fn fuse_scores(s_p: f64, s_s: f64, w_p: f64) -> Result<f64> {
    if !(s_p.is_finite() && s_s.is_finite() && w_p.is_finite()) {
        return Err(Error::NonFinite("fusion inputs".into()));
    }
    if !(0.0..=1.0).contains(&w_p) {
        return Err(Error::InvalidArgument(format!("w_p = {w_p} outside [0, 1]")));
    }
    Ok(convex(w_p, s_p, s_s))
}

/// Mean absolute error.
pub fn l1_loss(preds: &[f64], gts: &[f64]) -> Result<f64> {
    if preds.len() != gts.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} targets",
            preds.len(),
            gts.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    Ok(preds.iter().zip(gts).map(|(p, g)| (p - g).abs()).sum::<f64>() / preds.len() as f64)
}

/// Scalar outputs of one forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores<T> {
    pub s_s: Option<T>,
    pub scale_scores: Option<[T; STAGES]>,
    pub s_p: T,
    /// Weight actually used for fusion (`W_p` head output, or the fixed weight).
    pub w_p: T,
    /// Raw `W_p` head output.
    pub w_head: T,
    pub s_spqe: T,
}

impl<T: Scalar> Scores<T> {
    pub fn bundle(&self) -> ScoreBundle {
        ScoreBundle {
            s_s: self.s_s.map(|v| v.f64()),
            s_p: self.s_p.f64(),
            w_p: self.w_p.f64(),
            s_spqe: self.s_spqe.f64(),
        }
    }
}

struct StructureTrace<T> {
    ref_trace: PyramidTrace<T>,
    ref_pad: Padding,
    lr_input: Option<Tensor<T>>,
    head_traces: Vec<(usize, MlpTrace<T>)>,
    plane_sizes: [usize; STAGES],
    weights: Vec<T>,
}

/// Everything the backward pass needs.
pub struct Trace<T> {
    sr_trace: PyramidTrace<T>,
    f_s_shape: (usize, usize, usize),
    gate: Tensor<T>,
    perception: MlpTrace<T>,
    weight: MlpTrace<T>,
    structure: Option<StructureTrace<T>>,
    scores: Scores<T>,
}

impl<T: Scalar> Trace<T> {
    pub fn scores(&self) -> &Scores<T> {
        &self.scores
    }

    pub fn activation_pattern(&self, out: &mut Vec<u8>) {
        self.sr_trace.activation_pattern(out);
        self.perception.activation_pattern(out);
        self.weight.activation_pattern(out);
        if let Some(st) = &self.structure {
            st.ref_trace.activation_pattern(out);
            for (_, t) in &st.head_traces {
                t.activation_pattern(out);
            }
        }
    }
}

fn saliency_for(sample: &Sample, strategy: &Strategy) -> SaliencyMap {
    if !strategy.saliency {
        return SaliencyMap::ones(sample.sr.height(), sample.sr.width());
    }
    match &sample.saliency {
        Some(s) => s.clone(),
        None => spectral_residual(&sample.sr),
    }
}

fn broadcast<T: Scalar>(vec_grad: &[T], shape: (usize, usize, usize)) -> Tensor<T> {
    let (c, h, w) = shape;
    let n = T::of((h * w) as f64);
    let mut t = Tensor::zeros(c, h, w);
    for (ch, &g) in vec_grad.iter().enumerate() {
        let v = g / n;
        t.plane_mut(ch).iter_mut().for_each(|x| *x = v);
    }
    t
}

/// Forward pass over one sample.
pub fn forward<T: Scalar>(
    params: &SpqeParams<T>,
    config: &ModelConfig,
    sample: &Sample,
) -> Result<(Scores<T>, Trace<T>)> {
    let sr: Tensor<T> = sample.sr.cast();
    let sr_pad = Padding::for_size(sr.height(), sr.width());
    let (sr_pyr, sr_trace) = backbone::forward_traced(
        &params.backbone,
        &pad_reflect(&config.input_norm.apply(&sr), &sr_pad),
        Branch::Sr,
    )?;
    let f_s = sr_pyr.top();
    let f_s_shape = f_s.shape();

    let sal = saliency_for(sample, &config.strategy);
    if sal.dims() != (sr.height(), sr.width()) {
        return Err(Error::Shape(format!(
            "saliency {:?} does not match SR image {}x{}",
            sal.dims(),
            sr.height(),
            sr.width()
        )));
    }
    let gate: Tensor<T> = gate_weights(&sal, &sr_pad, f_s.height(), f_s.width());
    let gated = apply_gate(&gate, f_s);
    let perception = params.perception_head.forward_traced(&gated.global_average());
    let weight = params.weight_head.forward_traced(&f_s.global_average());

    let want_structure = config.mode != Mode::PerceptionOnly && sample.ref_kind != RefKind::None;
    if want_structure && sample.ref_kind != config.ref_kind {
        return Err(Error::InvalidArgument(format!(
            "model expects {:?} references, sample {} has {:?}",
            config.ref_kind, sample.id, sample.ref_kind
        )));
    }
    let structure = if want_structure {
        let reference = sample
            .reference
            .as_ref()
            .ok_or_else(|| Error::MissingReference(sample.id.clone()))?;
        let lr: Tensor<T> = reference.cast();
        let adapted = adapt_reference(
            &lr,
            sample.ref_kind,
            sample.scale_factor,
            params.adapter.as_ref(),
            (sr.height(), sr.width()),
        )?;
        let ref_pad = Padding::for_size(adapted.height(), adapted.width());
        let (ref_pyr, ref_trace) =
            backbone::forward_traced(
                &params.backbone,
                &pad_reflect(&config.input_norm.apply(&adapted), &ref_pad),
                Branch::Ref,
            )?;
        Some(structure_forward(params, config, &ref_pyr, &sr_pyr, ref_trace, ref_pad, lr)?)
    } else if config.mode == Mode::StructureOnly {
        return Err(Error::MissingReference(sample.id.clone()));
    } else {
        None
    };

    let s_p = perception.output;
    let w_head = weight.output;
    let s_s = structure.as_ref().map(|(s, _, _)| *s);
    let scale_scores = structure.as_ref().map(|(_, sc, _)| *sc);
    let (w_p, s_spqe) = match (config.mode, s_s) {
        (Mode::Full, Some(ss)) => (w_head, convex(w_head, s_p, ss)),
        (Mode::FixedWeight(w), Some(ss)) => {
            let w = T::of(w);
            (w, convex(w, s_p, ss))
        }
        (Mode::StructureOnly, Some(ss)) => (w_head, ss),
        (_, None) => (w_head, s_p),
        (Mode::PerceptionOnly, Some(_)) => (w_head, s_p),
    };
    let scores = Scores {
        s_s,
        scale_scores,
        s_p,
        w_p,
        w_head,
        s_spqe,
    };
    if !s_spqe.is_finite() {
        return Err(Error::NonFinite(format!("score of sample {}", sample.id)));
    }
    Ok((
        scores,
        Trace {
            sr_trace,
            f_s_shape,
            gate,
            perception,
            weight,
            structure: structure.map(|(_, _, t)| t),
            scores,
        },
    ))
}

fn structure_forward<T: Scalar>(
    params: &SpqeParams<T>,
    config: &ModelConfig,
    ref_pyr: &FeaturePyramid<T>,
    sr_pyr: &FeaturePyramid<T>,
    ref_trace: PyramidTrace<T>,
    ref_pad: Padding,
    lr: Tensor<T>,
) -> Result<(T, [T; STAGES], StructureTrace<T>)> {
    let mut scale_scores = [T::zero(); STAGES];
    let mut head_traces = Vec::new();
    let mut plane_sizes = [0; STAGES];
    let used: &[usize] = if config.strategy.multi_scale {
        &[0, 1, 2, 3, 4]
    } else {
        &[STAGES - 1]
    };
    for &i in used {
        let (r, s) = (&ref_pyr.stages[i], &sr_pyr.stages[i]);
        plane_sizes[i] = r.plane_len();
        let pooled: Vec<T> = r
            .global_average()
            .into_iter()
            .zip(s.global_average())
            .map(|(a, b)| a - b)
            .collect();
        let t = params.scale_heads[i].forward_traced(&pooled);
        scale_scores[i] = t.output;
        head_traces.push((i, t));
    }
    let (s_s, weights) = if config.strategy.multi_scale {
        let w = params.scale_weights.weights();
        (w.iter().zip(&scale_scores).map(|(&a, &b)| a * b).sum(), w)
    } else {
        (scale_scores[STAGES - 1], Vec::new())
    };
    let lr_input = (config.ref_kind == RefKind::Lr).then_some(lr);
    Ok((
        s_s,
        scale_scores,
        StructureTrace {
            ref_trace,
            ref_pad,
            lr_input,
            head_traces,
            plane_sizes,
            weights,
        },
    ))
}

/// Backpropagates `d loss / d s_spqe` into `grads`.
pub fn backward<T: Scalar>(
    params: &SpqeParams<T>,
    config: &ModelConfig,
    trace: &Trace<T>,
    d_score: T,
    grads: &mut SpqeParams<T>,
) -> Result<()> {
    let sc = &trace.scores;
    let (d_sp, d_ss, d_w) = match (config.mode, sc.s_s) {
        (Mode::Full, Some(ss)) => (d_score * sc.w_p, d_score * (T::one() - sc.w_p), d_score * (sc.s_p - ss)),
        (Mode::FixedWeight(w), Some(_)) => {
            let w = T::of(w);
            (d_score * w, d_score * (T::one() - w), T::zero())
        }
        (Mode::StructureOnly, Some(_)) => (T::zero(), d_score, T::zero()),
        _ => (d_score, T::zero(), T::zero()),
    };

    let (c5, h5, w5) = trace.f_s_shape;
    let mut d_fs = Tensor::zeros(c5, h5, w5);
    if d_sp != T::zero() {
        let dv = params.perception_head.backward(&trace.perception, d_sp, &mut grads.perception_head);
        let d_gated = broadcast(&dv, trace.f_s_shape);
        d_fs.add_assign(&apply_gate(&trace.gate, &d_gated));
    }
    if d_w != T::zero() {
        let dv = params.weight_head.backward(&trace.weight, d_w, &mut grads.weight_head);
        d_fs.add_assign(&broadcast(&dv, trace.f_s_shape));
    }

    let mut sr_grads: Vec<Option<Tensor<T>>> = vec![None; STAGES];
    sr_grads[STAGES - 1] = Some(d_fs);

    if let (Some(st), true) = (&trace.structure, d_ss != T::zero()) {
        let scores = sc.scale_scores.expect("structure scores");
        let mut ref_grads: Vec<Option<Tensor<T>>> = vec![None; STAGES];
        let multi = config.strategy.multi_scale;
        for (i, ht) in &st.head_traces {
            let i = *i;
            let d_si = if multi { d_ss * st.weights[i] } else { d_ss };
            let dv = params.scale_heads[i].backward(ht, d_si, &mut grads.scale_heads[i]);
            let n = T::of(st.plane_sizes[i] as f64);
            // d/dF_r = +dv/n, d/dF_s = -dv/n, constant over the plane
            let (c, h, w) = trace.sr_trace.stage_shape(i);
            let mut pos = Tensor::zeros(c, h, w);
            for (c, &g) in dv.iter().enumerate() {
                let v = g / n;
                pos.plane_mut(c).iter_mut().for_each(|x| *x = v);
            }
            let mut neg = pos.clone();
            neg.scale(-T::one());
            ref_grads[i] = Some(pos);
            match sr_grads[i].as_mut() {
                Some(g) => g.add_assign(&neg),
                None => sr_grads[i] = Some(neg),
            }
        }
        if multi {
            let s_s = sc.s_s.expect("structure score");
            for j in 0..STAGES {
                grads.scale_weights.logits[j] += d_ss * st.weights[j] * (scores[j] - s_s);
            }
        }
        let want_input = st.lr_input.is_some();
        let d_ref = backbone::backward(&params.backbone, &st.ref_trace, ref_grads, &mut grads.backbone, want_input);
        if let (Some(lr), Some(d_ref)) = (&st.lr_input, d_ref) {
            let mut d_adapted = unpad_grad(&d_ref, &st.ref_pad);
            config.input_norm.backward(&mut d_adapted);
            let adapter = params.adapter.as_ref().expect("LR adapter");
            let g_adapter = grads.adapter.as_mut().expect("LR adapter gradient");
            adapter.backward(lr, &d_adapted, g_adapter)?;
        }
    }

    backbone::backward(&params.backbone, &trace.sr_trace, sr_grads, &mut grads.backbone, false);
    Ok(())
}

/// Mean L1 loss of a batch; accumulates its gradient into `grads`.
pub fn batch_loss_and_grad<T: Scalar>(
    params: &SpqeParams<T>,
    config: &ModelConfig,
    batch: &[&Sample],
    grads: &mut SpqeParams<T>,
) -> Result<T> {
    let n = T::of(batch.len() as f64);
    let mut loss = T::zero();
    for sample in batch {
        let (scores, trace) = forward(params, config, sample)?;
        let r = scores.s_spqe - T::of(sample.gt);
        loss += r.abs() / n;
        let sign = if r > T::zero() {
            T::one()
        } else if r < T::zero() {
            -T::one()
        } else {
            T::zero()
        };
        backward(params, config, &trace, sign / n, grads)?;
    }
    Ok(loss)
}

/// Mean L1 loss without gradients.
pub fn batch_loss<T: Scalar>(params: &SpqeParams<T>, config: &ModelConfig, batch: &[&Sample]) -> Result<T> {
    let n = T::of(batch.len() as f64);
    let mut loss = T::zero();
    for sample in batch {
        let (scores, _) = forward(params, config, sample)?;
        loss += (scores.s_spqe - T::of(sample.gt)).abs() / n;
    }
    Ok(loss)
}

/// Batch L1 loss together with the activation pattern (ReLU states, pooling
/// choices, residual signs) of every sample; the loss is smooth in the
/// parameters as long as the pattern is unchanged.
pub fn batch_loss_with_pattern<T: Scalar>(
    params: &SpqeParams<T>,
    config: &ModelConfig,
    batch: &[&Sample],
) -> Result<(T, Vec<u8>)> {
    let n = T::of(batch.len() as f64);
    let mut loss = T::zero();
    let mut pattern = Vec::new();
    for sample in batch {
        let (scores, trace) = forward(params, config, sample)?;
        let r = scores.s_spqe - T::of(sample.gt);
        loss += r.abs() / n;
        trace.activation_pattern(&mut pattern);
        pattern.push(u8::from(r > T::zero()));
    }
    Ok((loss, pattern))
}

/// Score bundle for one sample.
pub fn predict<T: Scalar>(params: &SpqeParams<T>, config: &ModelConfig, sample: &Sample) -> Result<ScoreBundle> {
    forward(params, config, sample).map(|(s, _)| s.bundle())
}

/// Structure score `S_s` of an SR image against its reference.
pub fn structure_score<T: Scalar>(params: &SpqeParams<T>, config: &ModelConfig, sample: &Sample) -> Result<T> {
    let mut cfg = config.clone();
    cfg.mode = Mode::StructureOnly;
    forward(params, &cfg, sample).map(|(s, _)| s.s_spqe)
}

/// Perception score `S_p` of an SR image alone.
pub fn perception_score<T: Scalar>(params: &SpqeParams<T>, config: &ModelConfig, sample: &Sample) -> Result<T> {
    let mut cfg = config.clone();
    cfg.mode = Mode::PerceptionOnly;
    forward(params, &cfg, sample).map(|(s, _)| s.s_p)
}
