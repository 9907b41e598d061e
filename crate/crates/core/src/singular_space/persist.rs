//! JSON artifact for a fitted space.
//!
//! ```json
//! {
//!   "format": "trajspace.singular_space",
//!   "version": 1,
//!   "t_win": 12,
//!   "k": 4,
//!   "frame": "preceding_point",
//!   "degenerate": false,
//!   "sigma": [s1, ..., sK],
//!   "basis": [v(0,0), v(0,1), ..., v(0,K-1), v(1,0), ...]
//! }
//! ```
//!
//! `basis` is `V_K` in row-major order: 2·t_win rows of K entries, rows
//! following the interleaved `(x₁, y₁, …, x_T, y_T)` layout. Values are
//! written as decimal `f64`.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{GistFrame, SingularSpace};
use crate::{Error, Result, Scalar};

pub(crate) const FORMAT: &str = "trajspace.singular_space";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceArtifact {
    pub format: String,
    pub version: u32,
    pub t_win: usize,
    pub k: usize,
    pub frame: GistFrame,
    pub degenerate: bool,
    pub sigma: Vec<f64>,
    pub basis: Vec<f64>,
}

impl<T: Scalar> SingularSpace<T> {
    pub fn to_artifact(&self) -> SpaceArtifact {
        SpaceArtifact {
            format: FORMAT.to_string(),
            version: VERSION,
            t_win: self.t_win,
            k: self.k(),
            frame: self.frame,
            degenerate: self.degenerate,
            sigma: self.sigma.iter().map(|s| s.to_f64_lossy()).collect(),
            basis: self.basis.iter().map(|s| s.to_f64_lossy()).collect(),
        }
    }

    pub fn from_artifact(a: &SpaceArtifact) -> Result<Self> {
        if a.format != FORMAT || a.version != VERSION {
            return Err(Error::Config(format!(
                "unsupported space artifact {} v{}",
                a.format, a.version
            )));
        }
        if a.sigma.len() != a.k || a.basis.len() != 2 * a.t_win * a.k {
            return Err(Error::shape(
                "space artifact sizes disagree with t_win and k",
            ));
        }
        let basis = Array2::from_shape_vec(
            (2 * a.t_win, a.k),
            a.basis.iter().map(|&v| T::of(v)).collect(),
        )
        .map_err(|e| Error::shape(e.to_string()))?;
        let sigma = Array1::from_iter(a.sigma.iter().map(|&v| T::of(v)));
        Ok(Self::from_parts(
            basis,
            sigma,
            a.t_win,
            a.frame,
            a.degenerate,
        ))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_artifact())?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let artifact: SpaceArtifact = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_artifact(&artifact)
    }
}
