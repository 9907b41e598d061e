use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array3;
use trajspace::anchor::{build_vector_field, TraversabilityMap, VectorField};
use trajspace::dataset::{
    make_windows, parse_scene, SceneRecords, SceneRegistry, TaskSpec, TrajectoryWindow,
};

use crate::{HarnessError, Result};

pub type Window = TrajectoryWindow<f64>;
pub type Fields = BTreeMap<String, VectorField<f64>>;

/// Parsed scenes with their optional traversability maps.
#[derive(Debug, Clone)]
pub struct Corpus {
    /// Scene order used for labels and table columns.
    pub order: Vec<String>,
    pub scenes: BTreeMap<String, SceneRecords<f64>>,
    pub maps: BTreeMap<String, TraversabilityMap<f64>>,
}

impl Corpus {
    pub fn load(registry: impl AsRef<Path>) -> Result<Self> {
        Self::from_registry(&SceneRegistry::load(registry)?)
    }

    pub fn from_registry(reg: &SceneRegistry) -> Result<Self> {
        let mut scenes = BTreeMap::new();
        let mut maps = BTreeMap::new();
        for name in reg.scene_names() {
            let entry = reg.entry(&name)?;
            let mut merged: Option<SceneRecords<f64>> = None;
            for (i, file) in entry.trajectory.iter().enumerate() {
                let mut part = parse_scene::<f64>(reg.resolve(file))?;
                // keep agents of different files apart
                for r in &mut part.records {
                    r.ped_id += i as i64 * 1_000_000;
                }
                match &mut merged {
                    None => merged = Some(part),
                    Some(m) => m.records.extend(part.records),
                }
            }
            let mut records = merged.ok_or_else(|| {
                HarnessError::Config(format!("scene {name} lists no trajectory file"))
            })?;
            records.name = name.clone();
            records.records.sort_by_key(|r| (r.ped_id, r.frame_id));
            scenes.insert(name.clone(), records);
            if let Some(map) = &entry.map {
                let grid = TraversabilityMap::<f64>::load_grid(reg.resolve(map))?;
                let h = entry
                    .homography
                    .unwrap_or([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
                maps.insert(
                    name.clone(),
                    TraversabilityMap::with_flat_homography(grid, &h)?,
                );
            }
        }
        Ok(Self {
            order: reg.scene_names(),
            scenes,
            maps,
        })
    }

    /// Windows of every scene cut with the lengths of `spec`.
    pub fn windows(&self, spec: &TaskSpec) -> BTreeMap<String, Vec<Window>> {
        self.scenes
            .iter()
            .map(|(name, rec)| (name.clone(), make_windows(rec, spec)))
            .collect()
    }

    /// Vector fields of the mapped scenes among `names`.
    pub fn fields<'a>(&self, names: impl IntoIterator<Item = &'a String>) -> Result<Fields> {
        let mut out = Fields::new();
        for name in names {
            if let Some(map) = self.maps.get(name) {
                out.insert(name.clone(), build_vector_field(map)?);
            }
        }
        Ok(out)
    }
}

/// Ground-truth futures as N × T × 2.
pub fn futures(windows: &[Window]) -> Array3<f64> {
    let t = windows.first().map_or(0, |w| w.fut.len());
    Array3::from_shape_fn((windows.len(), t, 2), |(i, k, d)| windows[i].fut[k][d])
}

pub fn histories(windows: &[Window]) -> Vec<Vec<[f64; 2]>> {
    windows.iter().map(|w| w.hist.clone()).collect()
}
