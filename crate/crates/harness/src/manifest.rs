use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::ModelConfig;
use crate::synthetic::SyntheticConfig;
use crate::Result;

/// Everything a CLI run reads from `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Scene registry JSON; the synthetic corpus is used when absent.
    pub registry: Option<PathBuf>,
    pub model: ModelConfig,
    pub synthetic: SyntheticConfig,
    pub seed: u64,
    pub desk_scale: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            registry: None,
            model: ModelConfig::default(),
            synthetic: SyntheticConfig::default(),
            seed: 0,
            desk_scale: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Seeds the model, swaps in the desk-scale network if asked.
    pub fn resolved(mut self) -> Self {
        if self.desk_scale && self.model == ModelConfig::default() {
            self.model = ModelConfig::desk();
        }
        self.model.seed = self.seed;
        self.model.train.seed = self.seed;
        self
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// First 16 hex digits of the SHA-256 of the JSON encoding.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serialises");
    hex::encode(&Sha256::digest(&json)[..8])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub config_hash: String,
    pub git_hash: Option<String>,
    /// Settings that differ from the full-size defaults.
    pub deviations: Vec<String>,
    pub created_unix: u64,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            seed: config.seed,
            config: config.clone(),
            config_hash: config.hash(),
            git_hash: git_hash(),
            deviations: config.model.deviations(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn git_hash() -> Option<String> {
    let out = std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()?;
    out.status
        .success()
        .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_config() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn desk_scale_is_logged_as_deviation() {
        let cfg = RunConfig {
            desk_scale: true,
            ..RunConfig::default()
        }
        .resolved();
        let m = Manifest::new("train", &cfg);
        assert!(m.deviations.iter().any(|d| d.starts_with("epochs")));
        assert!(Manifest::new("train", &RunConfig::default())
            .deviations
            .is_empty());
    }
}
