//! Central finite-difference verification of the analytic loss gradient.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::scalar::Scalar;
use crate::model::{batch_loss_and_grad, batch_loss_with_pattern, ModelConfig, Sample, SpqeParams};

#[derive(Debug, Clone, PartialEq)]
pub struct GradEntry {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
    /// Step actually used for this parameter.
    pub step: f64,
    /// Even the smallest step changed the activation pattern.
    pub straddles_kink: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst: Option<GradEntry>,
    /// Entries whose relative error exceeded the tolerance.
    pub failures: Vec<GradEntry>,
    /// Parameters whose nominal step crossed a ReLU/pooling/sign boundary
    /// and were re-measured with a smaller step.
    pub reduced_step: usize,
    pub unresolved_kinks: usize,
}

/// Adds `N(0, scale^2)` noise to every bias. Freshly initialised biases
/// are exactly zero, which puts any unit whose input vanishes (a dead
/// hidden layer upstream) exactly on a ReLU corner where no derivative
/// exists; jittering moves the check to a differentiable point.
pub fn jitter_biases<T: Scalar, R: Rng + ?Sized>(params: &mut SpqeParams<T>, rng: &mut R, scale: f64) {
    params.visit_mut(&mut |name, _, values| {
        if name.ends_with(".bias") {
            for v in values.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v += T::of(scale * z);
            }
        }
    });
}

/// `|a - n| / max(|a|, |n|, floor)`; the floor keeps gradients that are
/// zero up to rounding from producing meaningless ratios.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = libm::fabs(analytic).max(libm::fabs(numeric)).max(floor);
    if denom == 0.0 {
        0.0
    } else {
        libm::fabs(analytic - numeric) / denom
    }
}

/// Compares every parameter's analytic gradient of the batch L1 loss with
/// `(L(p + h) - L(p - h)) / 2h`.
///
/// A central difference is only a valid reference when both probes stay in
/// the same linear piece as `p`. When a probe changes the activation
/// pattern, the step is divided by 10 (down to `min_step`) until it does not.
pub fn check_gradients(
    params: &SpqeParams<f64>,
    config: &ModelConfig,
    batch: &[&Sample],
    step: f64,
    min_step: f64,
    floor: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let mut grads = params.zeros_like();
    batch_loss_and_grad(params, config, batch, &mut grads)?;
    let (_, base_pattern) = batch_loss_with_pattern(params, config, batch)?;
    let mut names = Vec::new();
    params.visit(&mut |name, _, s| names.push((name, s.len())));
    let analytic: Vec<Vec<f64>> = grads.slices().into_iter().map(|s| s.to_vec()).collect();

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
        failures: Vec::new(),
        reduced_step: 0,
        unresolved_kinks: 0,
    };
    for (t, (name, len)) in names.iter().enumerate() {
        for i in 0..*len {
            let orig = probe.slices()[t][i];
            let mut h = step;
            let (numeric, clean) = loop {
                probe.slices_mut()[t][i] = orig + h;
                let (plus, p_pat) = batch_loss_with_pattern(&probe, config, batch)?;
                probe.slices_mut()[t][i] = orig - h;
                let (minus, m_pat) = batch_loss_with_pattern(&probe, config, batch)?;
                probe.slices_mut()[t][i] = orig;
                let clean = p_pat == base_pattern && m_pat == base_pattern;
                if clean || h / 10.0 < min_step {
                    break ((plus - minus) / (2.0 * h), clean);
                }
                h /= 10.0;
            };
            if h != step {
                report.reduced_step += 1;
            }
            if !clean {
                report.unresolved_kinks += 1;
            }
            let a = analytic[t][i];
            let rel = relative_error(a, numeric, floor);
            report.checked += 1;
            let entry = || GradEntry {
                name: name.clone(),
                index: i,
                analytic: a,
                numeric,
                rel_error: rel,
                step: h,
                straddles_kink: !clean,
            };
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some(entry());
            }
            if rel >= tolerance {
                report.failures.push(entry());
            }
        }
    }
    Ok(report)
}
