//! Adam optimisation of the L1 objective with a plateau learning-rate
//! schedule, early stopping and best-validation checkpoint selection.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backbone::Padding;
use crate::error::{Error, Result};
use crate::model::{batch_loss, batch_loss_and_grad, ModelConfig, Sample, SpqeParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// Samples are grouped by padded resolution; a group's batch size is the
/// pixel budget divided by its padded area, clamped to `[1, max_batch]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchPolicy {
    pub pixel_budget: usize,
    pub max_batch: usize,
}

impl Default for BatchPolicy {
    fn default() -> Self {
        Self {
            pixel_budget: 4 * 64 * 64,
            max_batch: 64,
        }
    }
}

impl BatchPolicy {
    pub fn batch_size(&self, padded: (usize, usize)) -> usize {
        (self.pixel_budget / (padded.0 * padded.1).max(1)).clamp(1, self.max_batch.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub lr_divisor: f64,
    pub plateau_epochs: usize,
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    pub batch: BatchPolicy,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Start every score head at the mean training target.
    pub score_bias_init: bool,
}

impl TrainConfig {
    /// Settings for the 64x64 synthetic benchmark: a tenfold larger initial
    /// rate than the default, which is tuned for long runs on large data.
    pub fn synthetic_benchmark() -> Self {
        Self {
            initial_lr: 1e-3,
            ..Self::default()
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            initial_lr: 1e-4,
            lr_divisor: 10.0,
            plateau_epochs: 5,
            early_stop_patience: 30,
            max_epochs: 30,
            batch: BatchPolicy::default(),
            seed: 42,
            adam: AdamConfig::default(),
            score_bias_init: true,
        }
    }
}

/// Divides the learning rate after `patience` consecutive epochs without a
/// new best validation loss; the counter restarts after each division and
/// on every improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauSchedule {
    lr: f64,
    divisor: f64,
    patience: usize,
    wait: usize,
    best: f64,
}

impl PlateauSchedule {
    pub fn new(initial_lr: f64, divisor: f64, patience: usize) -> Self {
        Self {
            lr: initial_lr,
            divisor,
            patience,
            wait: 0,
            best: f64::INFINITY,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Feeds one epoch's validation loss; returns true when the rate was divided.
    pub fn observe(&mut self, val_loss: f64) -> bool {
        if val_loss < self.best {
            self.best = val_loss;
            self.wait = 0;
            return false;
        }
        self.wait += 1;
        if self.wait >= self.patience {
            self.lr /= self.divisor;
            self.wait = 0;
            return true;
        }
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    wait: usize,
    best: f64,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            wait: 0,
            best: f64::INFINITY,
        }
    }

    /// Returns true when training should stop after this epoch.
    pub fn observe(&mut self, val_loss: f64) -> bool {
        if val_loss < self.best {
            self.best = val_loss;
            self.wait = 0;
            false
        } else {
            self.wait += 1;
            self.wait >= self.patience
        }
    }
}

/// Adam with bias correction; moment buffers mirror the parameter layout.
pub struct Adam<T> {
    config: AdamConfig,
    m: SpqeParams<T>,
    v: SpqeParams<T>,
    step: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &SpqeParams<T>, config: AdamConfig) -> Self {
        Self {
            config,
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    pub fn step(&mut self, params: &mut SpqeParams<T>, grads: &SpqeParams<T>, lr: f64) {
        self.step += 1;
        let (b1, b2) = (self.config.beta1, self.config.beta2);
        let c1 = 1.0 - libm::pow(b1, self.step as f64);
        let c2 = 1.0 - libm::pow(b2, self.step as f64);
        let (b1, b2, eps) = (T::of(b1), T::of(b2), T::of(self.config.epsilon));
        let (c1, c2, lr) = (T::of(c1), T::of(c2), T::of(lr));
        let one = T::one();
        let g_all = grads.slices();
        let m_all = self.m.slices_mut();
        let v_all = self.v.slices_mut();
        for (((p, g), m), v) in params.slices_mut().into_iter().zip(g_all).zip(m_all).zip(v_all) {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_l1: f64,
    pub val_l1: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters of the epoch with the lowest validation loss.
    pub params: SpqeParams<T>,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub initial_val_l1: f64,
    pub stopped_early: bool,
}

impl<T> TrainOutcome<T> {
    pub fn best_val_l1(&self) -> f64 {
        self.log
            .iter()
            .find(|e| e.epoch == self.best_epoch)
            .map_or(self.initial_val_l1, |e| e.val_l1)
    }
}

/// Deterministic batch order for one epoch.
pub fn make_batches<R: rand::Rng>(samples: &[Sample], policy: &BatchPolicy, rng: &mut R) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        let pad = Padding::for_size(s.sr.height(), s.sr.width()).padded();
        groups.entry(pad).or_default().push(i);
    }
    let mut batches = Vec::new();
    for (dims, mut idx) in groups {
        idx.shuffle(rng);
        let size = policy.batch_size(dims);
        batches.extend(idx.chunks(size).map(|c| c.to_vec()));
    }
    batches.shuffle(rng);
    batches
}

/// Non-finite activations during an epoch mean the optimisation blew up.
fn diverged(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFinite(_) => Error::Divergence { epoch, loss: f64::NAN },
        e => e,
    }
}

fn refs(samples: &[Sample]) -> Vec<&Sample> {
    samples.iter().collect()
}

/// Initialises parameters from `config.seed` and trains them.
pub fn train<T: Scalar>(
    train_set: &[Sample],
    val_set: &[Sample],
    model: &ModelConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    if let Some(bad) = train_set.iter().chain(val_set).find(|s| !(0.0..=1.0).contains(&s.gt)) {
        return Err(Error::InvalidArgument(format!("target {} of sample {} outside [0, 1]", bad.gt, bad.id)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = init_params(train_set, model, config, &mut rng);
    train_from(params, train_set, val_set, model, config, &mut rng)
}

/// Random parameters, with score heads starting at the mean training
/// target when `config.score_bias_init` is set.
pub fn init_params<T: Scalar>(
    train_set: &[Sample],
    model: &ModelConfig,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> SpqeParams<T> {
    let mut params = SpqeParams::<T>::random(model, rng);
    if config.score_bias_init && !train_set.is_empty() {
        params.set_score_bias(train_set.iter().map(|s| s.gt).sum::<f64>() / train_set.len() as f64);
    }
    params
}

/// Trains starting from the given parameters.
pub fn train_from<T: Scalar>(
    mut params: SpqeParams<T>,
    train_set: &[Sample],
    val_set: &[Sample],
    model: &ModelConfig,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainOutcome<T>> {
    model.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::EmptyPartition("training and validation sets must be non-empty".into()));
    }
    let val_refs = refs(val_set);
    let initial_val = batch_loss(&params, model, &val_refs)?.f64();
    if !initial_val.is_finite() {
        return Err(Error::Divergence { epoch: 0, loss: initial_val });
    }
    let mut adam = Adam::new(&params, config.adam);
    let mut schedule = PlateauSchedule::new(config.initial_lr, config.lr_divisor, config.plateau_epochs);
    let mut stopper = EarlyStopping::new(config.early_stop_patience);
    let mut best = (initial_val, 0usize, params.clone());
    let mut log = Vec::new();
    let mut stopped_early = false;
    let mut grads = params.zeros_like();

    for epoch in 1..=config.max_epochs {
        let lr = schedule.lr();
        let mut train_sum = 0.0;
        for batch in make_batches(train_set, &config.batch, rng) {
            grads.visit_mut(&mut |_, _, s| s.iter_mut().for_each(|v| *v = T::zero()));
            let members: Vec<&Sample> = batch.iter().map(|&i| &train_set[i]).collect();
            let loss = batch_loss_and_grad(&params, model, &members, &mut grads)
                .map_err(|e| diverged(e, epoch))?
                .f64();
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            train_sum += loss * members.len() as f64;
            adam.step(&mut params, &grads, lr);
        }
        if !params.is_finite() {
            return Err(Error::Divergence { epoch, loss: f64::NAN });
        }
        let val_l1 = batch_loss(&params, model, &val_refs)
            .map_err(|e| diverged(e, epoch))?
            .f64();
        if !val_l1.is_finite() {
            return Err(Error::Divergence { epoch, loss: val_l1 });
        }
        log.push(EpochLog {
            epoch,
            train_l1: train_sum / train_set.len() as f64,
            val_l1,
            lr,
        });
        if val_l1 < best.0 {
            best = (val_l1, epoch, params.clone());
        }
        schedule.observe(val_l1);
        if stopper.observe(val_l1) {
            stopped_early = true;
            break;
        }
    }
    Ok(TrainOutcome {
        params: best.2,
        log,
        best_epoch: best.1,
        initial_val_l1: initial_val,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_divides_after_five_flat_epochs() {
        let mut s = PlateauSchedule::new(1e-4, 10.0, 5);
        let mut reduced_at = Vec::new();
        for epoch in 1..=12 {
            if s.observe(0.5) {
                reduced_at.push(epoch);
            }
        }
        assert_eq!(reduced_at, [6, 11]);
        assert!((s.lr() - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn plateau_counter_resets_on_improvement() {
        let mut s = PlateauSchedule::new(1.0, 10.0, 3);
        for v in [1.0, 1.0, 1.0, 0.9, 1.0, 1.0] {
            assert!(!s.observe(v));
        }
        assert!(s.observe(1.0));
    }

    #[test]
    fn early_stop_after_patience() {
        let mut e = EarlyStopping::new(30);
        let stop = (1..=40).find(|_| e.observe(1.0));
        assert_eq!(stop, Some(31));
    }

    #[test]
    fn batch_size_from_budget() {
        let p = BatchPolicy { pixel_budget: 4 * 64 * 64, max_batch: 64 };
        assert_eq!(p.batch_size((64, 64)), 4);
        assert_eq!(p.batch_size((512, 512)), 1);
        assert_eq!(p.batch_size((16, 16)), 64);
    }
}
