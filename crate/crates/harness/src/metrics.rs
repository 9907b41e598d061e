use ndarray::{ArrayView3, ArrayView4, Axis};
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

/// Displacement errors in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub ade: f64,
    pub fde: f64,
}

impl Metrics {
    pub fn mean(items: &[Metrics]) -> Metrics {
        let n = items.len().max(1) as f64;
        Metrics {
            ade: items.iter().map(|m| m.ade).sum::<f64>() / n,
            fde: items.iter().map(|m| m.fde).sum::<f64>() / n,
        }
    }
}

/// Per-agent best-of-S errors. ADE and FDE each pick their own sample.
pub fn best_of_s(pred: ArrayView4<'_, f64>, gt: ArrayView3<'_, f64>) -> Result<Vec<Metrics>> {
    let (n, s, t, d) = pred.dim();
    if gt.dim() != (n, t, d) || d != 2 {
        return Err(HarnessError::Shape(format!(
            "predictions {:?} vs ground truth {:?}",
            pred.dim(),
            gt.dim()
        )));
    }
    if s == 0 || t == 0 {
        return Err(HarnessError::Shape(format!(
            "empty sample or time axis in {:?}",
            pred.dim()
        )));
    }
    let mut out = Vec::with_capacity(n);
    for (p, g) in pred.axis_iter(Axis(0)).zip(gt.axis_iter(Axis(0))) {
        let mut best = Metrics {
            ade: f64::INFINITY,
            fde: f64::INFINITY,
        };
        for sample in p.axis_iter(Axis(0)) {
            let dist: Vec<f64> = (0..t)
                .map(|k| {
                    ((sample[[k, 0]] - g[[k, 0]]).powi(2) + (sample[[k, 1]] - g[[k, 1]]).powi(2))
                        .sqrt()
                })
                .collect();
            best.ade = best.ade.min(dist.iter().sum::<f64>() / t as f64);
            best.fde = best.fde.min(dist[t - 1]);
        }
        out.push(best);
    }
    Ok(out)
}

/// Mean over agents of the best-of-S ADE and FDE.
pub fn ade_fde(pred: ArrayView4<'_, f64>, gt: ArrayView3<'_, f64>) -> Result<Metrics> {
    let per = best_of_s(pred, gt)?;
    if per.is_empty() {
        return Err(HarnessError::Shape("no agents to score".into()));
    }
    Ok(Metrics::mean(&per))
}
