//! Residual denoising over anchors with a deterministic DDIM sampler.

mod checkpoint;
mod net;
mod optim;
mod sample;
mod schedule;
mod train;

pub use checkpoint::Checkpoint;
pub use net::{
    timestep_embedding, Cache, Conditions, Coupling, DenoiserNet, NetConfig, NoisePredictor,
    PARAM_NAMES,
};
pub use optim::AdamW;
pub use sample::{coords_to_world, denoise, gaussian, sample, sample_with_noise};
pub use schedule::{
    ddim_step, ddim_step_clipped, forward_diffuse, make_linear_schedule, make_schedule,
    NoiseSchedule, BETA_END, BETA_START, DEFAULT_STEPS,
};
pub use train::{fit, train_step, DenoisingMode, TrainConfig, TrainReport, TrainSet};
