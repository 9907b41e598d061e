use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::DenoiserNet;
use super::schedule::NoiseSchedule;
use super::train::{DenoisingMode, TrainConfig};
use crate::{Error, Result, Scalar};

const FORMAT: &str = "trajspace.denoiser";
const VERSION: u32 = 1;

/// Trained denoiser with everything needed to sample from it again.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: serde::de::DeserializeOwned"
))]
pub struct Checkpoint<T> {
    pub format: String,
    pub version: u32,
    pub net: DenoiserNet<T>,
    pub schedule: NoiseSchedule,
    pub mode: DenoisingMode,
    pub train: TrainConfig,
    /// Where the motion space came from (path or digest).
    pub space_ref: String,
    /// Digest of the configuration that produced this checkpoint.
    pub config_hash: String,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(
        net: DenoiserNet<T>,
        schedule: NoiseSchedule,
        mode: DenoisingMode,
        train: TrainConfig,
        space_ref: String,
        config_hash: String,
    ) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            net,
            schedule,
            mode,
            train,
            space_ref,
            config_hash,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let ck: Self = serde_json::from_reader(f)?;
        if ck.format != FORMAT || ck.version != VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        let shapes = ck.net.config.shapes();
        if shapes.len() != ck.net.params.len()
            || shapes
                .iter()
                .zip(&ck.net.params)
                .any(|(s, p)| *s != p.dim())
        {
            return Err(Error::Config(
                "checkpoint parameters do not match its network config".into(),
            ));
        }
        Ok(ck)
    }
}
