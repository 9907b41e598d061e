//! Pedestrian trajectory forecasting on a shared low-rank motion space.
//!
//! * [`dataset`]: ETH/UCY-style ingestion, windows and task protocols.
//! * [`singular_space`]: truncated-SVD motion basis and B-spline length adaptation.
//! * [`anchor`]: k-means prototype anchors deformed by a traversability field.
//! * [`diffusion`]: residual-denoising DDIM predictor over anchors.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the usual `f64` instantiation.

pub mod anchor;
pub mod dataset;
pub mod diffusion;
mod error;
pub mod linalg;
mod scalar;
pub mod singular_space;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type SingularSpace = singular_space::SingularSpace<f64>;
pub type SingularSpaceF32 = singular_space::SingularSpace<f32>;
pub type TrajectoryWindow = dataset::TrajectoryWindow<f64>;
pub type AnchorSet = anchor::AnchorSet<f64>;
pub type TraversabilityMap = anchor::TraversabilityMap<f64>;
pub type VectorField = anchor::VectorField<f64>;
pub type DenoiserNet = diffusion::DenoiserNet<f64>;
