use std::ops::Range;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::schedule::NoiseSchedule;
use crate::{Error, Result, Scalar};

/// How the S anchor channels share one denoising pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// All S residuals form one latent of width S·K.
    #[default]
    Joint,
    /// Each anchor is denoised on its own with a width-K latent.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Motion-space dimension.
    pub k: usize,
    /// Number of anchors.
    pub s: usize,
    pub coupling: Coupling,
    pub width: usize,
    pub heads: usize,
    pub time_dim: usize,
    pub hidden: usize,
}

impl NetConfig {
    /// Full-size network: width 256, 4 heads.
    pub fn new(k: usize, s: usize) -> Self {
        Self {
            k,
            s,
            coupling: Coupling::Joint,
            width: 256,
            heads: 4,
            time_dim: 32,
            hidden: 256,
        }
    }

    pub fn with_width(mut self, width: usize, heads: usize) -> Self {
        self.width = width;
        self.heads = heads;
        self.hidden = width;
        self
    }

    pub fn with_coupling(mut self, coupling: Coupling) -> Self {
        self.coupling = coupling;
        self
    }

    /// Width of the noise latent and of the anchor input.
    pub fn latent(&self) -> usize {
        match self.coupling {
            Coupling::Joint => self.s * self.k,
            Coupling::Independent => self.k,
        }
    }

    fn head_input(&self) -> usize {
        3 * self.width + self.time_dim + self.latent()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.s == 0 || self.width == 0 || self.hidden == 0 {
            return Err(Error::Config("network sizes must be positive".into()));
        }
        if self.heads == 0 || self.width % self.heads != 0 {
            return Err(Error::Config(format!(
                "width {} not divisible into {} heads",
                self.width, self.heads
            )));
        }
        if self.time_dim % 2 != 0 {
            return Err(Error::Config("time embedding size must be even".into()));
        }
        Ok(())
    }

    /// Parameter shapes in storage order.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        let d = self.width;
        vec![
            (self.k, d),
            (1, d),
            (self.latent(), d),
            (1, d),
            (d, d),
            (1, d),
            (d, d),
            (1, d),
            (d, d),
            (1, d),
            (d, d),
            (1, d),
            (self.head_input(), self.hidden),
            (1, self.hidden),
            (self.hidden, self.latent()),
            (1, self.latent()),
            (self.time_dim, self.hidden),
            (1, self.hidden),
        ]
    }
}

const WX: usize = 0;
const BX: usize = 1;
const WP: usize = 2;
const BP: usize = 3;
const WQ: usize = 4;
const BQ: usize = 5;
const WK: usize = 6;
const BK: usize = 7;
const WV: usize = 8;
const BV: usize = 9;
const WO: usize = 10;
const BO: usize = 11;
const W1: usize = 12;
const B1: usize = 13;
const W2: usize = 14;
const B2: usize = 15;
const WG: usize = 16;
const BG: usize = 17;

pub const PARAM_NAMES: [&str; 18] = [
    "embed_x.w",
    "embed_x.b",
    "embed_p.w",
    "embed_p.b",
    "attn.q.w",
    "attn.q.b",
    "attn.k.w",
    "attn.k.b",
    "attn.v.w",
    "attn.v.b",
    "attn.o.w",
    "attn.o.b",
    "head.1.w",
    "head.1.b",
    "head.2.w",
    "head.2.b",
    "head.gain.w",
    "head.gain.b",
];

/// Conditioning for a batch of agents.
///
/// Rows are agents. `groups` lists contiguous row ranges of agents that
/// share a scene frame; attention only mixes rows within a group.
#[derive(Debug, Clone)]
pub struct Conditions<T> {
    /// Ego-frame history coordinates, rows × K.
    pub x: Array2<T>,
    /// Anchor coordinates, rows × latent.
    pub p: Array2<T>,
    pub groups: Vec<Range<usize>>,
}

impl<T: Scalar> Conditions<T> {
    /// Every agent in its own group.
    pub fn singletons(x: Array2<T>, p: Array2<T>) -> Self {
        let groups = (0..x.nrows()).map(|i| i..i + 1).collect();
        Self { x, p, groups }
    }

    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    fn validate(&self, k: usize, latent: usize) -> Result<()> {
        if self.x.ncols() != k || self.p.ncols() != latent || self.p.nrows() != self.x.nrows() {
            return Err(Error::shape(format!(
                "conditions {:?}/{:?}, expected width {k}/{latent}",
                self.x.dim(),
                self.p.dim()
            )));
        }
        let mut next = 0;
        for g in &self.groups {
            if g.start != next || g.end <= g.start {
                return Err(Error::shape(
                    "agent groups must tile the rows contiguously".to_string(),
                ));
            }
            next = g.end;
        }
        if next != self.rows() {
            return Err(Error::shape(
                "agent groups do not cover every row".to_string(),
            ));
        }
        Ok(())
    }
}

/// Anything that can estimate the noise in a latent.
pub trait NoisePredictor<T: Scalar> {
    /// Latent width per row.
    fn latent(&self) -> usize;

    fn predict_noise(
        &self,
        cond: &Conditions<T>,
        y: ArrayView2<'_, T>,
        steps: &[usize],
    ) -> Result<Array2<T>>;

    fn is_trained(&self) -> bool {
        true
    }

    /// The latent is the denoised quantity divided by this.
    fn latent_scale(&self) -> T {
        T::one()
    }

    /// Bound on the clean latent during sampling, if any.
    fn latent_clip(&self) -> Option<T> {
        None
    }
}

/// Condition encoder, one multi-head attention layer across co-present
/// agents, and a two-layer MLP noise head whose hidden units get a
/// per-step gain from the time embedding.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: serde::de::DeserializeOwned"
))]
pub struct DenoiserNet<T> {
    pub config: NetConfig,
    pub params: Vec<Array2<T>>,
    /// Inputs are divided by this before embedding.
    pub feature_scale: T,
    /// Residuals (or paths) are divided by this to form the latent.
    pub latent_scale: T,
    /// Largest clean-latent magnitude seen in training; sampling clamps to it.
    pub latent_clip: Option<T>,
    /// ᾱ per step. When set, the head works on a noise-level-normalised
    /// latent and its output is mixed with the latent into the noise
    /// estimate; when empty the head output is the noise estimate.
    #[serde(default)]
    pub alphas_bar: Vec<f64>,
    /// Expected scale of the clean latent, used by that normalisation.
    #[serde(default = "unit")]
    pub data_sd: f64,
    pub trained: bool,
}

fn unit() -> f64 {
    1.0
}

struct Precondition<T> {
    input: T,
    skip: T,
    out: T,
}

/// Activations kept for the backward pass.
pub struct Cache<T> {
    xs: Array2<T>,
    ps: Array2<T>,
    c: Array2<T>,
    q: Array2<T>,
    k: Array2<T>,
    v: Array2<T>,
    attn: Vec<Vec<Array2<T>>>,
    o: Array2<T>,
    hin: Array2<T>,
    temb: Array2<T>,
    z1: Array2<T>,
    h1: Array2<T>,
    gain: Array2<T>,
    a1: Array2<T>,
    /// d(output)/d(head output) per row.
    out_gain: Option<Vec<T>>,
    groups: Vec<Range<usize>>,
}

fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

fn silu<T: Scalar>(z: T) -> T {
    z * sigmoid(z)
}

fn silu_grad<T: Scalar>(z: T) -> T {
    let sg = sigmoid(z);
    sg * (T::one() + z * (T::one() - sg))
}

fn affine<T: Scalar>(x: ArrayView2<'_, T>, w: &Array2<T>, b: &Array2<T>) -> Array2<T> {
    x.dot(w) + b
}

fn col_sum<T: Scalar>(d: &Array2<T>) -> Array2<T> {
    d.sum_axis(Axis(0)).insert_axis(Axis(0))
}

fn softmax_rows<T: Scalar>(s: &mut Array2<T>) {
    for mut row in s.rows_mut() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: T = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Sinusoidal embedding of the diffusion step.
pub fn timestep_embedding<T: Scalar>(steps: &[usize], dim: usize) -> Array2<T> {
    let half = dim / 2;
    let mut out = Array2::zeros((steps.len(), dim));
    for (r, &m) in steps.iter().enumerate() {
        for i in 0..half {
            let freq = (-(10_000f64.ln()) * i as f64 / half as f64).exp();
            let arg = m as f64 * freq;
            out[[r, i]] = T::of(arg.sin());
            out[[r, half + i]] = T::of(arg.cos());
        }
    }
    out
}

impl<T: Scalar> DenoiserNet<T> {
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = config
            .shapes()
            .into_iter()
            .map(|(r, c)| {
                if r == 1 {
                    return Array2::zeros((r, c));
                }
                let a = (6.0 / (r + c) as f64).sqrt();
                Array2::from_shape_simple_fn((r, c), || T::of(rng.random_range(-a..a)))
            })
            .collect();
        Ok(Self {
            config,
            params,
            feature_scale: T::one(),
            latent_scale: T::one(),
            latent_clip: None,
            alphas_bar: Vec::new(),
            data_sd: 1.0,
            trained: false,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    /// Weight matrices get decoupled weight decay, biases do not.
    pub fn decay_mask(&self) -> Vec<bool> {
        self.params.iter().map(|p| p.nrows() > 1).collect()
    }

    /// Uses `schedule` for the latent normalisation of the head.
    pub fn with_schedule(mut self, schedule: &NoiseSchedule) -> Self {
        self.alphas_bar = schedule.alphas_bar.clone();
        self
    }

    /// Per-row input scale and output mix. With `a = √ᾱ`, `σ = √(1−ᾱ)/a`,
    /// data scale `d` and `n = √(σ²+d²)`, the head sees `y / (a·n)` and the
    /// noise estimate is `σ/n² · y/a − (d/n)·G`, so the head's regression
    /// target has unit scale at every step.
    fn preconditioning(&self, steps: &[usize]) -> Result<Option<Vec<Precondition<T>>>> {
        if self.alphas_bar.is_empty() {
            return Ok(None);
        }
        steps
            .iter()
            .map(|&m| {
                if m == 0 || m > self.alphas_bar.len() {
                    return Err(Error::Argument(format!(
                        "step {m} not in 1..={}",
                        self.alphas_bar.len()
                    )));
                }
                let a = self.alphas_bar[m - 1].sqrt();
                let sigma = (1.0 - self.alphas_bar[m - 1]).sqrt() / a;
                let sd = self.data_sd;
                let norm = (sigma * sigma + sd * sd).sqrt();
                Ok(Precondition {
                    input: T::of(1.0 / (a * norm)),
                    skip: T::of(sigma / (norm * norm * a)),
                    out: T::of(sd / norm),
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    pub fn forward(
        &self,
        cond: &Conditions<T>,
        y: ArrayView2<'_, T>,
        steps: &[usize],
    ) -> Result<Array2<T>> {
        Ok(self.forward_cached(cond, y, steps)?.0)
    }

    pub fn forward_cached(
        &self,
        cond: &Conditions<T>,
        y: ArrayView2<'_, T>,
        steps: &[usize],
    ) -> Result<(Array2<T>, Cache<T>)> {
        let cfg = &self.config;
        cond.validate(cfg.k, cfg.latent())?;
        if y.dim() != (cond.rows(), cfg.latent()) || steps.len() != cond.rows() {
            return Err(Error::shape(format!(
                "latent {:?} with {} steps for {} rows of width {}",
                y.dim(),
                steps.len(),
                cond.rows(),
                cfg.latent()
            )));
        }
        let pre = self.preconditioning(steps)?;
        let y_in = match &pre {
            Some(rows) => {
                let mut y_in = y.to_owned();
                for (mut row, c) in y_in.rows_mut().into_iter().zip(rows) {
                    row.mapv_inplace(|v| v * c.input);
                }
                y_in
            }
            None => y.to_owned(),
        };
        let p = &self.params;
        let inv = T::one() / self.feature_scale;
        let xs = cond.x.mapv(|v| v * inv);
        let ps = cond.p.mapv(|v| v * inv);
        let ex = affine(xs.view(), &p[WX], &p[BX]);
        let ep = affine(ps.view(), &p[WP], &p[BP]);
        let c = &ex + &ep;
        let q = affine(c.view(), &p[WQ], &p[BQ]);
        let k = affine(c.view(), &p[WK], &p[BK]);
        let v = affine(c.view(), &p[WV], &p[BV]);

        let dh = cfg.width / cfg.heads;
        let scale = T::one() / T::of(dh as f64).sqrt();
        let mut o = Array2::zeros(c.dim());
        let mut attn = Vec::with_capacity(cond.groups.len());
        for g in &cond.groups {
            let mut per_head = Vec::with_capacity(cfg.heads);
            for h in 0..cfg.heads {
                let cols = h * dh..(h + 1) * dh;
                let qh = q.slice(s![g.clone(), cols.clone()]);
                let kh = k.slice(s![g.clone(), cols.clone()]);
                let vh = v.slice(s![g.clone(), cols.clone()]);
                let mut a = qh.dot(&kh.t()).mapv(|x| x * scale);
                softmax_rows(&mut a);
                o.slice_mut(s![g.clone(), cols]).assign(&a.dot(&vh));
                per_head.push(a);
            }
            attn.push(per_head);
        }
        let interaction = affine(o.view(), &p[WO], &p[BO]);
        let temb = timestep_embedding::<T>(steps, cfg.time_dim);
        let hin = concatenate(
            Axis(1),
            &[
                ex.view(),
                ep.view(),
                interaction.view(),
                temb.view(),
                y_in.view(),
            ],
        )
        .expect("head input");
        let z1 = affine(hin.view(), &p[W1], &p[B1]);
        let h1 = z1.mapv(silu);
        // per-step gain on the hidden units
        let gain = affine(temb.view(), &p[WG], &p[BG]).mapv(|g| g + T::one());
        let a1 = &h1 * &gain;
        let mut out = affine(a1.view(), &p[W2], &p[B2]);
        if let Some(rows) = &pre {
            for ((mut o, yr), c) in out.rows_mut().into_iter().zip(y.rows()).zip(rows) {
                Zip::from(&mut o)
                    .and(&yr)
                    .for_each(|o, &v| *o = c.skip * v - c.out * *o);
            }
        }
        let cache = Cache {
            xs,
            ps,
            c,
            q,
            k,
            v,
            attn,
            o,
            hin,
            temb,
            z1,
            h1,
            gain,
            a1,
            out_gain: pre.map(|rows| rows.iter().map(|c| -c.out).collect()),
            groups: cond.groups.clone(),
        };
        Ok((out, cache))
    }

    /// Parameter gradients given `dL/d(output)`.
    pub fn backward(&self, cache: &Cache<T>, dout: &Array2<T>) -> Vec<Array2<T>> {
        let cfg = &self.config;
        let p = &self.params;
        let d = cfg.width;
        let mut g: Vec<Array2<T>> = p.iter().map(|w| Array2::zeros(w.dim())).collect();

        let scaled;
        let dout = match &cache.out_gain {
            Some(gain) => {
                let mut d = dout.clone();
                for (mut row, &k) in d.rows_mut().into_iter().zip(gain) {
                    row.mapv_inplace(|v| v * k);
                }
                scaled = d;
                &scaled
            }
            None => dout,
        };
        g[W2] = cache.a1.t().dot(dout);
        g[B2] = col_sum(dout);
        let da1 = dout.dot(&p[W2].t());
        let dgain = &da1 * &cache.h1;
        g[WG] = cache.temb.t().dot(&dgain);
        g[BG] = col_sum(&dgain);
        let dh1 = &da1 * &cache.gain;
        let dz1 = Zip::from(&dh1)
            .and(&cache.z1)
            .map_collect(|&da, &z| da * silu_grad(z));
        g[W1] = cache.hin.t().dot(&dz1);
        g[B1] = col_sum(&dz1);
        let dhin = dz1.dot(&p[W1].t());
        let mut dex = dhin.slice(s![.., 0..d]).to_owned();
        let mut dep = dhin.slice(s![.., d..2 * d]).to_owned();
        let dint = dhin.slice(s![.., 2 * d..3 * d]).to_owned();

        g[WO] = cache.o.t().dot(&dint);
        g[BO] = col_sum(&dint);
        let d_o = dint.dot(&p[WO].t());

        let dh = d / cfg.heads;
        let scale = T::one() / T::of(dh as f64).sqrt();
        let mut dq = Array2::zeros(cache.q.dim());
        let mut dk = Array2::zeros(cache.k.dim());
        let mut dv = Array2::zeros(cache.v.dim());
        for (gi, grp) in cache.groups.iter().enumerate() {
            for h in 0..cfg.heads {
                let cols = h * dh..(h + 1) * dh;
                let a = &cache.attn[gi][h];
                let doh = d_o.slice(s![grp.clone(), cols.clone()]);
                let qh = cache.q.slice(s![grp.clone(), cols.clone()]);
                let kh = cache.k.slice(s![grp.clone(), cols.clone()]);
                let vh = cache.v.slice(s![grp.clone(), cols.clone()]);
                let da = doh.dot(&vh.t());
                dv.slice_mut(s![grp.clone(), cols.clone()])
                    .assign(&a.t().dot(&doh));
                let mut ds = a * &da;
                for (mut row, arow) in ds.rows_mut().into_iter().zip(a.rows()) {
                    let total: T = row.sum();
                    Zip::from(&mut row)
                        .and(&arow)
                        .for_each(|x, &aa| *x = *x - aa * total);
                }
                ds.mapv_inplace(|x| x * scale);
                dq.slice_mut(s![grp.clone(), cols.clone()])
                    .assign(&ds.dot(&kh));
                dk.slice_mut(s![grp.clone(), cols]).assign(&ds.t().dot(&qh));
            }
        }
        g[WQ] = cache.c.t().dot(&dq);
        g[BQ] = col_sum(&dq);
        g[WK] = cache.c.t().dot(&dk);
        g[BK] = col_sum(&dk);
        g[WV] = cache.c.t().dot(&dv);
        g[BV] = col_sum(&dv);
        let dc = dq.dot(&p[WQ].t()) + dk.dot(&p[WK].t()) + dv.dot(&p[WV].t());
        dex += &dc;
        dep += &dc;

        g[WX] = cache.xs.t().dot(&dex);
        g[BX] = col_sum(&dex);
        g[WP] = cache.ps.t().dot(&dep);
        g[BP] = col_sum(&dep);
        g
    }

    /// Mean squared error against `target` and its parameter gradients.
    pub fn loss_and_grad(
        &self,
        cond: &Conditions<T>,
        y: ArrayView2<'_, T>,
        steps: &[usize],
        target: ArrayView2<'_, T>,
    ) -> Result<(T, Vec<Array2<T>>)> {
        let (out, cache) = self.forward_cached(cond, y, steps)?;
        if out.dim() != target.dim() {
            return Err(Error::shape(format!(
                "output {:?} vs target {:?}",
                out.dim(),
                target.dim()
            )));
        }
        let diff = &out - &target;
        let n = T::of(diff.len() as f64);
        let loss = diff.iter().map(|&e| e * e).sum::<T>() / n;
        let dout = diff.mapv(|e| T::of(2.0) * e / n);
        Ok((loss, self.backward(&cache, &dout)))
    }

    pub fn loss(
        &self,
        cond: &Conditions<T>,
        y: ArrayView2<'_, T>,
        steps: &[usize],
        target: ArrayView2<'_, T>,
    ) -> Result<T> {
        let out = self.forward(cond, y, steps)?;
        let diff = &out - &target;
        Ok(diff.iter().map(|&e| e * e).sum::<T>() / T::of(diff.len() as f64))
    }
}

impl<T: Scalar> NoisePredictor<T> for DenoiserNet<T> {
    fn latent(&self) -> usize {
        self.config.latent()
    }

    fn predict_noise(
        &self,
        cond: &Conditions<T>,
        y: ArrayView2<'_, T>,
        steps: &[usize],
    ) -> Result<Array2<T>> {
        self.forward(cond, y, steps)
    }

    fn is_trained(&self) -> bool {
        self.trained
    }

    fn latent_scale(&self) -> T {
        self.latent_scale
    }

    fn latent_clip(&self) -> Option<T> {
        self.latent_clip
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> DenoiserNet<f64> {
        DenoiserNet::new(NetConfig::new(2, 2).with_width(8, 2), 3).unwrap()
    }

    #[test]
    fn output_shape_follows_rows() {
        let net = tiny();
        for n in [1, 3] {
            let cond = Conditions::singletons(Array2::ones((n, 2)), Array2::ones((n, 4)));
            let out = net
                .forward(&cond, Array2::zeros((n, 4)).view(), &vec![1; n])
                .unwrap();
            assert_eq!(out.dim(), (n, 4));
        }
    }

    #[test]
    fn rejects_bad_groups_and_shapes() {
        let net = tiny();
        let mut cond = Conditions::singletons(Array2::ones((2, 2)), Array2::ones((2, 4)));
        cond.groups = vec![0..1];
        assert!(net
            .forward(&cond, Array2::zeros((2, 4)).view(), &[1, 1])
            .is_err());
        let cond = Conditions::singletons(Array2::ones((2, 3)), Array2::ones((2, 4)));
        assert!(net
            .forward(&cond, Array2::zeros((2, 4)).view(), &[1, 1])
            .is_err());
        assert!(DenoiserNet::<f64>::new(NetConfig::new(2, 2).with_width(10, 4), 0).is_err());
    }

    #[test]
    fn embedding_is_bounded() {
        let e = timestep_embedding::<f64>(&[0, 10], 8);
        assert_eq!(e[[0, 0]], 0.0);
        assert_eq!(e[[0, 4]], 1.0);
        assert!(e.iter().all(|v| v.abs() <= 1.0));
    }
}
