use ndarray::{Array1, Array4};
use serde::{Deserialize, Serialize};
use trajspace::anchor::{cluster_prototypes, AnchorSet};
use trajspace::diffusion::coords_to_world;
use trajspace::singular_space::{to_ego, SingularSpace, SpaceArtifact};

use crate::corpus::{Fields, Window};
use crate::model::{adapted_anchor_rows, build_space, encode, ModelConfig};
use crate::{HarnessError, Result};

/// Repeats the last observed step `t_fut` times, tiled over `samples`.
pub fn constant_velocity(
    histories: &[Vec<[f64; 2]>],
    t_fut: usize,
    samples: usize,
) -> Result<Array4<f64>> {
    let mut out = Array4::zeros((histories.len(), samples, t_fut, 2));
    for (i, h) in histories.iter().enumerate() {
        if h.len() < 2 {
            return Err(HarnessError::Shape(format!(
                "history {i} has {} points, need 2",
                h.len()
            )));
        }
        let last = h[h.len() - 1];
        let prev = h[h.len() - 2];
        let v = [last[0] - prev[0], last[1] - prev[1]];
        for s in 0..samples {
            for t in 0..t_fut {
                let k = (t + 1) as f64;
                out[[i, s, t, 0]] = last[0] + k * v[0];
                out[[i, s, t, 1]] = last[1] + k * v[1];
            }
        }
    }
    Ok(out)
}

/// Adapted prototype paths with no denoising. Per agent the `samples`
/// prototypes closest in motion space to its constant-velocity future are
/// returned, closest first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NearestAnchor {
    pub config: ModelConfig,
    pub space: SpaceArtifact,
    pub prototypes: AnchorSet<f64>,
}

impl NearestAnchor {
    pub fn fit(train: &[Window], prototypes: usize, config: &ModelConfig) -> Result<Self> {
        if train.is_empty() {
            return Err(HarnessError::Config("no training windows".into()));
        }
        let space = build_space(train, config.k, config.t_win)?;
        let all: Vec<usize> = (0..train.len()).collect();
        let (_, y) = encode(&space, train, &all)?;
        let prototypes = cluster_prototypes(y.view(), prototypes, config.seed)?;
        Ok(Self {
            config: config.clone(),
            space: space.to_artifact(),
            prototypes,
        })
    }

    pub fn predict(
        &self,
        windows: &[Window],
        fields: &Fields,
        t_fut: usize,
        samples: usize,
    ) -> Result<Array4<f64>> {
        let space = SingularSpace::from_artifact(&self.space)?;
        let (s, k) = self.prototypes.prototypes.dim();
        if samples > s {
            return Err(HarnessError::Config(format!(
                "{samples} samples requested from {s} prototypes"
            )));
        }
        let order: Vec<usize> = (0..windows.len()).collect();
        let (anchors, _) = adapted_anchor_rows(
            &space,
            &self.prototypes,
            windows,
            &order,
            fields,
            &self.config,
        )?;
        let cv = constant_velocity(&crate::corpus::histories(windows), t_fut, 1)?;
        let mut picked = ndarray::Array2::zeros((windows.len(), samples * k));
        let mut origins = Vec::with_capacity(windows.len());
        for (i, w) in windows.iter().enumerate() {
            let origin = w.last_observed();
            origins.push(origin);
            let path: Vec<[f64; 2]> = (0..t_fut)
                .map(|t| [cv[[i, 0, t, 0]], cv[[i, 0, t, 1]]])
                .collect();
            let target: Array1<f64> = space.project_path(&to_ego(&path, origin))?;
            let row = anchors.row(i);
            let mut ranked: Vec<(f64, usize)> = (0..s)
                .map(|j| {
                    let d: f64 = (0..k).map(|c| (row[j * k + c] - target[c]).powi(2)).sum();
                    (d, j)
                })
                .collect();
            ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for (slot, &(_, j)) in ranked.iter().take(samples).enumerate() {
                for c in 0..k {
                    picked[[i, slot * k + c]] = row[j * k + c];
                }
            }
        }
        Ok(coords_to_world(picked.view(), &space, &origins, t_fut)?)
    }
}
