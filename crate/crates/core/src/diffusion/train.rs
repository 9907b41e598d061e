use std::ops::Range;

use ndarray::{s, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::net::{Conditions, Coupling, DenoiserNet};
use super::optim::AdamW;
use super::schedule::{forward_diffuse_rows, NoiseSchedule};
use crate::{Error, Result, Scalar};

/// What the diffusion latent represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoisingMode {
    /// Plain Gaussian-to-trajectory denoising, no anchor input.
    Direct,
    /// Start the reverse chain from noised anchors and denoise to the path.
    Initial,
    /// Denoise the residual between the path and each anchor.
    #[default]
    Residual,
}

impl DenoisingMode {
    pub const ALL: [DenoisingMode; 3] = [
        DenoisingMode::Direct,
        DenoisingMode::Initial,
        DenoisingMode::Residual,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DenoisingMode::Direct => "Direct",
            DenoisingMode::Initial => "Initial",
            DenoisingMode::Residual => "Residual",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
    pub seed: u64,
    pub mode: DenoisingMode,
    /// The latent is the target divided by its training RMS and multiplied
    /// by this. Small values keep the clean latent well inside the unit
    /// Gaussian the sampler starts from.
    #[serde(default = "default_latent_rms")]
    pub latent_rms: f64,
    /// Clamp the implied clean latent to the training range while sampling.
    #[serde(default = "default_clip")]
    pub clip_latent: bool,
}

fn default_latent_rms() -> f64 {
    0.25
}

fn default_clip() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 512,
            epochs: 256,
            weight_decay: 1e-2,
            seed: 0,
            mode: DenoisingMode::Residual,
            latent_rms: default_latent_rms(),
            clip_latent: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0)
            || self.batch_size == 0
            || self.epochs == 0
            || self.weight_decay < 0.0
            || !(self.latent_rms > 0.0)
        {
            return Err(Error::Config(format!("invalid training config {self:?}")));
        }
        Ok(())
    }
}

/// Motion-space training data, one row per agent window.
#[derive(Debug, Clone)]
pub struct TrainSet<T> {
    /// History coordinates, rows × K.
    pub x: Array2<T>,
    /// Adapted anchors, rows × (S·K).
    pub anchors: Array2<T>,
    /// Ground-truth future coordinates, rows × K.
    pub y: Array2<T>,
    /// Row ranges of co-present agents.
    pub groups: Vec<Range<usize>>,
}

impl<T: Scalar> TrainSet<T> {
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn validate(&self, k: usize, s: usize) -> Result<()> {
        let n = self.rows();
        if self.x.ncols() != k || self.y.dim() != (n, k) || self.anchors.dim() != (n, s * k) {
            return Err(Error::shape(format!(
                "train set x {:?}, anchors {:?}, y {:?} for K={k}, S={s}",
                self.x.dim(),
                self.anchors.dim(),
                self.y.dim()
            )));
        }
        if n == 0 {
            return Err(Error::Training("empty training set".into()));
        }
        Ok(())
    }

    /// Rows of the listed groups, re-indexed from zero.
    pub fn gather(&self, group_ids: &[usize]) -> TrainSet<T> {
        let mut rows = Vec::new();
        let mut groups = Vec::with_capacity(group_ids.len());
        for &g in group_ids {
            let r = self.groups[g].clone();
            let start = rows.len();
            rows.extend(r);
            groups.push(start..rows.len());
        }
        TrainSet {
            x: self.x.select(Axis(0), &rows),
            anchors: self.anchors.select(Axis(0), &rows),
            y: self.y.select(Axis(0), &rows),
            groups,
        }
    }

    /// Root-mean-square of the conditioning inputs, used to normalise them.
    pub fn feature_scale(&self) -> T {
        let n = self.x.len() + self.anchors.len();
        let sq: T = self
            .x
            .iter()
            .chain(self.anchors.iter())
            .map(|&v| v * v)
            .sum();
        let rms = (sq / T::of(n.max(1) as f64)).sqrt();
        if rms > T::tiny() && rms.is_finite() {
            rms
        } else {
            T::one()
        }
    }

    /// Root-mean-square and largest magnitude of the denoising target
    /// under `mode`, over every anchor channel.
    pub fn latent_stats(&self, k: usize, mode: DenoisingMode) -> (T, T) {
        let mut sq = T::zero();
        let mut max = T::zero();
        let mut n = 0usize;
        for (row, y) in self.anchors.rows().into_iter().zip(self.y.rows()) {
            for a in row.exact_chunks(k) {
                for (&ai, &yi) in a.iter().zip(y.iter()) {
                    let v = if mode == DenoisingMode::Residual {
                        yi - ai
                    } else {
                        yi
                    };
                    sq = sq + v * v;
                    max = max.max(v.abs());
                    n += 1;
                }
            }
        }
        ((sq / T::of(n.max(1) as f64)).sqrt(), max)
    }
}

/// Latent target, anchor input and ground truth for one batch.
pub(crate) fn targets<T: Scalar>(
    batch: &TrainSet<T>,
    k: usize,
    s: usize,
    coupling: Coupling,
    mode: DenoisingMode,
    rng: &mut ChaCha8Rng,
) -> (Conditions<T>, Array2<T>) {
    let n = batch.rows();
    let (p, width) = match coupling {
        Coupling::Joint => (batch.anchors.clone(), s),
        Coupling::Independent => {
            let mut p = Array2::zeros((n, k));
            for g in &batch.groups {
                let pick = rng.random_range(0..s);
                p.slice_mut(s![g.clone(), ..])
                    .assign(&batch.anchors.slice(s![g.clone(), pick * k..(pick + 1) * k]));
            }
            (p, 1)
        }
    };
    let mut y0 = Array2::zeros((n, width * k));
    for j in 0..width {
        y0.slice_mut(s![.., j * k..(j + 1) * k]).assign(&batch.y);
    }
    let p = match mode {
        DenoisingMode::Residual => {
            y0 -= &p;
            p
        }
        DenoisingMode::Initial => p,
        DenoisingMode::Direct => Array2::zeros(p.dim()),
    };
    let cond = Conditions {
        x: batch.x.clone(),
        p,
        groups: batch.groups.clone(),
    };
    (cond, y0)
}

/// One optimiser update on `batch`; returns the pre-update loss.
pub fn train_step<T: Scalar>(
    net: &mut DenoiserNet<T>,
    opt: &mut AdamW<T>,
    schedule: &NoiseSchedule,
    batch: &TrainSet<T>,
    mode: DenoisingMode,
    rng: &mut ChaCha8Rng,
) -> Result<T> {
    let cfg = net.config.clone();
    batch.validate(cfg.k, cfg.s)?;
    let (cond, mut y0) = targets(batch, cfg.k, cfg.s, cfg.coupling, mode, rng);
    let inv = T::one() / net.latent_scale;
    y0.mapv_inplace(|v| v * inv);
    let steps: Vec<usize> = (0..batch.rows())
        .map(|_| rng.random_range(1..=schedule.steps()))
        .collect();
    let eps =
        Array2::from_shape_simple_fn(y0.dim(), || T::of(rng.sample::<f64, _>(StandardNormal)));
    let ym = forward_diffuse_rows(y0.view(), &steps, eps.view(), schedule);
    let (loss, grads) = net.loss_and_grad(&cond, ym.view(), &steps, eps.view())?;
    if !loss.is_finite() {
        return Err(Error::Training(format!(
            "non-finite loss {loss} after {} updates (feature scale {})",
            opt.steps_taken(),
            net.feature_scale
        )));
    }
    if let Some(bad) = grads.iter().position(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::Training(format!(
            "non-finite gradient in parameter {bad}"
        )));
    }
    let mask = net.decay_mask();
    opt.step(&mut net.params, &grads, &mask);
    Ok(loss)
}

/// Loss trace of a [`fit`] run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_loss: Vec<f64>,
    pub updates: usize,
}

/// Trains `net` on `set` and marks it trained.
pub fn fit<T: Scalar>(
    net: &mut DenoiserNet<T>,
    set: &TrainSet<T>,
    schedule: &NoiseSchedule,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    set.validate(net.config.k, net.config.s)?;
    net.feature_scale = set.feature_scale();
    net.alphas_bar = schedule.alphas_bar.clone();
    net.data_sd = config.latent_rms;
    let (rms, max) = set.latent_stats(net.config.k, config.mode);
    let scale = rms / T::of(config.latent_rms);
    net.latent_scale = if scale > T::tiny() && scale.is_finite() {
        scale
    } else {
        T::one()
    };
    net.latent_clip = config.clip_latent.then(|| max / net.latent_scale);
    log::debug!("latent rms {rms}, max {max}");
    let mut opt = AdamW::new(config.lr, config.weight_decay, &net.config.shapes());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..set.groups.len()).collect();
    let mut report = TrainReport::default();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        let mut start = 0;
        while start < order.len() {
            let mut end = start;
            let mut rows = 0;
            while end < order.len()
                && (rows == 0 || rows + set.groups[order[end]].len() <= config.batch_size)
            {
                rows += set.groups[order[end]].len();
                end += 1;
            }
            let batch = set.gather(&order[start..end]);
            let loss = train_step(net, &mut opt, schedule, &batch, config.mode, &mut rng)?;
            total += loss.to_f64_lossy();
            batches += 1;
            start = end;
        }
        let mean = total / batches as f64;
        log::debug!("epoch {epoch}: loss {mean:.5}");
        report.epoch_loss.push(mean);
    }
    report.updates = opt.steps_taken() as usize;
    net.trained = true;
    Ok(report)
}
