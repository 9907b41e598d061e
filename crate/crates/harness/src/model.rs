use std::ops::Range;
use std::path::Path;

use ndarray::{Array2, Array4, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use trajspace::anchor::{adapt_anchors, cluster_prototypes, AdaptConfig, AnchorSet};
use trajspace::dataset::scene_groups;
use trajspace::diffusion::{
    fit, make_schedule, sample, Checkpoint, Coupling, DenoiserNet, DenoisingMode, NetConfig,
    NoiseSchedule, TrainConfig, TrainReport, TrainSet,
};
use trajspace::singular_space::{
    build_gists, fit_svd, tracks_from_windows, GistFrame, SingularSpace, SpaceArtifact,
};

use crate::corpus::{Fields, Window};
use crate::{HarnessError, Result};

/// Everything that shapes one trained predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub k: usize,
    pub t_win: usize,
    /// Diffusion steps M.
    pub steps: usize,
    pub width: usize,
    pub heads: usize,
    pub hidden: usize,
    pub time_dim: usize,
    pub coupling: Coupling,
    /// Deform anchors with the scene's vector field.
    pub adapt: bool,
    pub adapt_config: AdaptConfig,
    pub train: TrainConfig,
    /// Seed of clustering, weight init and sampling.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            k: 4,
            t_win: 12,
            steps: 10,
            width: 256,
            heads: 4,
            hidden: 256,
            time_dim: 32,
            // the joint latent lets the net read the target off the average
            // of its channels, which the sampler's pure-noise start lacks
            coupling: Coupling::Independent,
            adapt: true,
            adapt_config: AdaptConfig::default(),
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Reduced network that trains in about a minute per split on one core.
    pub fn desk() -> Self {
        Self {
            width: 96,
            hidden: 96,
            time_dim: 16,
            train: TrainConfig {
                epochs: 2000,
                batch_size: 256,
                lr: 2e-3,
                ..TrainConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn net_config(&self, s: usize) -> NetConfig {
        NetConfig {
            k: self.k,
            s,
            coupling: self.coupling,
            width: self.width,
            heads: self.heads,
            time_dim: self.time_dim,
            hidden: self.hidden,
        }
    }

    /// Human-readable differences from the full-size defaults.
    pub fn deviations(&self) -> Vec<String> {
        let base = ModelConfig::default();
        let mut out = Vec::new();
        let mut diff = |name: &str, a: String, b: String| {
            if a != b {
                out.push(format!("{name}: {a} -> {b}"));
            }
        };
        diff("k", base.k.to_string(), self.k.to_string());
        diff("steps", base.steps.to_string(), self.steps.to_string());
        diff("width", base.width.to_string(), self.width.to_string());
        diff("heads", base.heads.to_string(), self.heads.to_string());
        diff("hidden", base.hidden.to_string(), self.hidden.to_string());
        diff(
            "time_dim",
            base.time_dim.to_string(),
            self.time_dim.to_string(),
        );
        diff(
            "coupling",
            format!("{:?}", base.coupling),
            format!("{:?}", self.coupling),
        );
        diff("adapt", base.adapt.to_string(), self.adapt.to_string());
        diff(
            "epochs",
            base.train.epochs.to_string(),
            self.train.epochs.to_string(),
        );
        diff(
            "batch_size",
            base.train.batch_size.to_string(),
            self.train.batch_size.to_string(),
        );
        diff("lr", base.train.lr.to_string(), self.train.lr.to_string());
        diff(
            "weight_decay",
            base.train.weight_decay.to_string(),
            self.train.weight_decay.to_string(),
        );
        diff(
            "mode",
            format!("{:?}", base.train.mode),
            format!("{:?}", self.train.mode),
        );
        out
    }
}

/// Windows in group order, as the network consumes them.
pub(crate) struct Batch {
    /// `order[i]` is the original index of row `i`.
    pub order: Vec<usize>,
    pub groups: Vec<Range<usize>>,
    pub origins: Vec<[f64; 2]>,
}

impl Batch {
    pub fn new(windows: &[Window]) -> Self {
        let mut order = Vec::with_capacity(windows.len());
        let mut groups = Vec::new();
        for g in scene_groups(windows) {
            let start = order.len();
            order.extend(g);
            groups.push(start..order.len());
        }
        let origins = order.iter().map(|&i| windows[i].last_observed()).collect();
        Self {
            order,
            groups,
            origins,
        }
    }

    /// Puts rows of `a` (group order) back into window order.
    pub fn restore<D: ndarray::RemoveAxis>(
        &self,
        a: ndarray::Array<f64, D>,
    ) -> ndarray::Array<f64, D> {
        let mut out = a.clone();
        for (row, &orig) in self.order.iter().enumerate() {
            out.index_axis_mut(Axis(0), orig)
                .assign(&a.index_axis(Axis(0), row));
        }
        out
    }
}

/// Basis fitted on the tracks covered by `windows`.
pub fn build_space(windows: &[Window], k: usize, t_win: usize) -> Result<SingularSpace<f64>> {
    let tracks = tracks_from_windows(windows);
    let gists = build_gists(&tracks, t_win, GistFrame::PrecedingPoint, k)?;
    Ok(fit_svd(&gists, k)?)
}

/// Ego-frame history and future coordinates, one row per window.
pub fn encode(
    space: &SingularSpace<f64>,
    windows: &[Window],
    order: &[usize],
) -> Result<(Array2<f64>, Array2<f64>)> {
    let k = space.k();
    let mut x = Array2::zeros((order.len(), k));
    let mut y = Array2::zeros((order.len(), k));
    for (row, &i) in order.iter().enumerate() {
        let (h, f) = space.project_window(&windows[i])?;
        x.row_mut(row).assign(&h);
        y.row_mut(row).assign(&f);
    }
    Ok((x, y))
}

/// Prototypes deformed per window (rows × S·K), plus how many anchor rows
/// hit the iteration cap.
pub fn adapted_anchor_rows(
    space: &SingularSpace<f64>,
    prototypes: &AnchorSet<f64>,
    windows: &[Window],
    order: &[usize],
    fields: &Fields,
    config: &ModelConfig,
) -> Result<(Array2<f64>, usize)> {
    let (s, k) = prototypes.prototypes.dim();
    let flat = prototypes.prototypes.iter().copied().collect::<Vec<_>>();
    let mut out = Array2::zeros((order.len(), s * k));
    let mut stalled = 0;
    for (row, &i) in order.iter().enumerate() {
        let w = &windows[i];
        let field = if config.adapt {
            fields.get(&w.scene_id)
        } else {
            None
        };
        match field {
            Some(field) => {
                let adapted = adapt_anchors(
                    prototypes,
                    field,
                    space,
                    w.last_observed(),
                    &config.adapt_config,
                )?;
                stalled += adapted.stalled.len();
                out.row_mut(row).assign(&ndarray::Array1::from_iter(
                    adapted.prototypes.iter().copied(),
                ));
            }
            None => out.row_mut(row).assign(&ndarray::ArrayView1::from(&flat)),
        }
    }
    Ok((out, stalled))
}

/// Trained motion space, prototypes and denoiser.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorDiffusion {
    pub config: ModelConfig,
    pub space: SpaceArtifact,
    pub prototypes: AnchorSet<f64>,
    pub denoiser: Checkpoint<f64>,
    #[serde(skip)]
    space_cache: Option<SingularSpace<f64>>,
}

impl AnchorDiffusion {
    /// Fits basis, `s` prototypes and the denoiser on `train`.
    pub fn fit(
        train: &[Window],
        fields: &Fields,
        s: usize,
        config: &ModelConfig,
        config_hash: &str,
    ) -> Result<(Self, TrainReport)> {
        if train.is_empty() {
            return Err(HarnessError::Config("no training windows".into()));
        }
        let space = build_space(train, config.k, config.t_win)?;
        let all: Vec<usize> = (0..train.len()).collect();
        let (_, y_all) = encode(&space, train, &all)?;
        let prototypes = cluster_prototypes(y_all.view(), s, config.seed)?;

        let batch = Batch::new(train);
        let (x, y) = encode(&space, train, &batch.order)?;
        let (anchors, stalled) =
            adapted_anchor_rows(&space, &prototypes, train, &batch.order, fields, config)?;
        if stalled > 0 {
            log::info!("{stalled} training anchors stopped at the adaptation cap");
        }
        let set = TrainSet {
            x,
            anchors,
            y,
            groups: batch.groups,
        };
        let schedule = make_schedule(config.steps)?;
        let mut net = DenoiserNet::new(config.net_config(s), config.seed)?;
        let report = fit(&mut net, &set, &schedule, &config.train)?;
        log::info!(
            "trained on {} windows: loss {:.4} -> {:.4}",
            train.len(),
            report.epoch_loss.first().copied().unwrap_or(f64::NAN),
            report.epoch_loss.last().copied().unwrap_or(f64::NAN)
        );
        let denoiser = Checkpoint::new(
            net,
            schedule,
            config.train.mode,
            config.train.clone(),
            "embedded".into(),
            config_hash.to_string(),
        );
        let model = Self {
            config: config.clone(),
            space: space.to_artifact(),
            prototypes,
            denoiser,
            space_cache: Some(space),
        };
        Ok((model, report))
    }

    pub fn samples(&self) -> usize {
        self.prototypes.s()
    }

    pub fn space(&self) -> Result<SingularSpace<f64>> {
        match &self.space_cache {
            Some(s) => Ok(s.clone()),
            None => Ok(SingularSpace::from_artifact(&self.space)?),
        }
    }

    pub fn net(&self) -> &DenoiserNet<f64> {
        &self.denoiser.net
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.denoiser.schedule
    }

    pub fn mode(&self) -> DenoisingMode {
        self.denoiser.mode
    }

    /// N × S × T_fut × 2 world-frame futures in window order.
    pub fn predict(
        &self,
        windows: &[Window],
        fields: &Fields,
        t_fut: usize,
        seed: u64,
    ) -> Result<Array4<f64>> {
        let space = self.space()?;
        if windows.is_empty() {
            return Ok(Array4::zeros((0, self.samples(), t_fut, 2)));
        }
        let batch = Batch::new(windows);
        let (x, _) = encode(&space, windows, &batch.order)?;
        let (anchors, _) = adapted_anchor_rows(
            &space,
            &self.prototypes,
            windows,
            &batch.order,
            fields,
            &self.config,
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = sample(
            self.net(),
            x.view(),
            anchors.view(),
            &batch.groups,
            &batch.origins,
            &space,
            self.schedule(),
            self.mode(),
            t_fut,
            &mut rng,
        )?;
        Ok(batch.restore(out))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(HarnessError::MissingCheckpoint(path.to_path_buf()));
        }
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut model: Self = serde_json::from_reader(f)?;
        model.space_cache = Some(SingularSpace::from_artifact(&model.space)?);
        Ok(model)
    }
}

/// Share of predicted points that land on walkable cells, over scenes that
/// have a map. `None` when no window has one.
pub fn traversable_fraction(
    pred: &Array4<f64>,
    windows: &[Window],
    fields: &Fields,
) -> Option<f64> {
    let (mut ok, mut total) = (0usize, 0usize);
    for (i, w) in windows.iter().enumerate() {
        let Some(field) = fields.get(&w.scene_id) else {
            continue;
        };
        let map = field.map();
        for s in pred.index_axis(Axis(0), i).axis_iter(Axis(0)) {
            for p in s.axis_iter(Axis(0)) {
                total += 1;
                ok += map.is_traversable([p[0], p[1]]) as usize;
            }
        }
    }
    (total > 0).then(|| ok as f64 / total as f64)
}
