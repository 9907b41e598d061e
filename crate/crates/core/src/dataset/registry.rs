use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One scene: trajectory file(s), optional traversability map and the
/// row-major world-to-pixel homography.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    #[serde(with = "one_or_many")]
    pub trajectory: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homography: Option<[f64; 9]>,
}

/// JSON scene registry: `{"scenes": {"ETH": {...}, ...}}`.
/// Relative paths are resolved against the registry file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneRegistry {
    pub scenes: BTreeMap<String, SceneEntry>,
    /// Scene order for letter labels; defaults to key order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub order: Vec<String>,
    #[serde(skip)]
    pub root: PathBuf,
}

impl SceneRegistry {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut reg: SceneRegistry = serde_json::from_str(&text)?;
        reg.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for name in &reg.order {
            if !reg.scenes.contains_key(name) {
                return Err(Error::Config(format!("order lists unknown scene {name:?}")));
            }
        }
        Ok(reg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn scene_names(&self) -> Vec<String> {
        if self.order.is_empty() {
            self.scenes.keys().cloned().collect()
        } else {
            self.order.clone()
        }
    }

    pub fn entry(&self, name: &str) -> Result<&SceneEntry> {
        self.scenes
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown scene {name:?}")))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }
}

mod one_or_many {
    use std::path::PathBuf;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        One(PathBuf),
        Many(Vec<PathBuf>),
    }

    pub fn serialize<S: Serializer>(v: &[PathBuf], s: S) -> Result<S::Ok, S::Error> {
        if v.len() == 1 {
            v[0].serialize(s)
        } else {
            v.serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<PathBuf>, D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::One(p) => vec![p],
            Repr::Many(v) => v,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_and_multiple_files() {
        let json = r#"{"scenes": {
            "ETH": {"trajectory": "eth.txt", "map": "eth.pgm",
                    "homography": [1,0,0, 0,1,0, 0,0,1]},
            "UNIV": {"trajectory": ["a.txt", "b.txt"]}
        }}"#;
        let reg: SceneRegistry = serde_json::from_str(json).unwrap();
        assert_eq!(reg.scenes["ETH"].trajectory, vec![PathBuf::from("eth.txt")]);
        assert_eq!(reg.scenes["UNIV"].trajectory.len(), 2);
        assert_eq!(reg.scene_names(), vec!["ETH", "UNIV"]);
        assert!(reg.entry("ZARA1").is_err());
    }
}
