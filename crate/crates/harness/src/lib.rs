//! Benchmark protocols, baselines, reporting and the `trajspace` CLI.

pub mod ablation;
pub mod baseline;
pub mod corpus;
mod error;
pub mod manifest;
pub mod metrics;
pub mod model;
pub mod protocol;
pub mod report;
pub mod synthetic;

pub use error::{HarnessError, Result};
pub use metrics::{ade_fde, Metrics};
pub use protocol::{run_protocol, run_task, EvalResult, PredictorHandle};
