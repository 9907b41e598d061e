//! Prototype anchors in motion space and their adaptation to walkable area.

mod adapt;
mod field;
mod kmeans;
mod map;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use adapt::{adapt_anchors, anchor_paths, AdaptConfig};
pub use field::{build_vector_field, VectorField};
pub use kmeans::cluster_prototypes;
pub use map::{Homography, TraversabilityMap};

/// S prototype coordinates (S × K) plus how they were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: serde::de::DeserializeOwned"
))]
pub struct AnchorSet<T> {
    pub prototypes: Array2<T>,
    pub adapted: bool,
    /// False when adaptation stopped at the iteration cap.
    pub converged: bool,
    /// Rows that hit the cap during the last adaptation.
    #[serde(default)]
    pub stalled: Vec<usize>,
    pub seed: u64,
    pub cluster_iterations: usize,
    pub adapt_iterations: usize,
}

impl<T: crate::Scalar> AnchorSet<T> {
    /// Anchors taken as given, e.g. from a checkpoint.
    pub fn from_prototypes(prototypes: Array2<T>) -> Self {
        Self {
            prototypes,
            adapted: false,
            converged: true,
            stalled: Vec::new(),
            seed: 0,
            cluster_iterations: 0,
            adapt_iterations: 0,
        }
    }

    pub fn s(&self) -> usize {
        self.prototypes.nrows()
    }

    pub fn k(&self) -> usize {
        self.prototypes.ncols()
    }
}
