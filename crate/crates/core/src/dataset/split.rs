use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{TaskSpec, TrajectoryWindow};
use crate::{Error, Result};

/// Splits per-scene windows into `(train, test)` according to `spec`.
///
/// The few-shot task additionally keeps `⌊train_fraction · |train|⌋`
/// training windows chosen uniformly with `spec.split_seed`.
pub fn make_split<T: Clone>(
    spec: &TaskSpec,
    scenes: &BTreeMap<String, Vec<TrajectoryWindow<T>>>,
) -> Result<(Vec<TrajectoryWindow<T>>, Vec<TrajectoryWindow<T>>)> {
    let gather = |names: &[String]| -> Result<Vec<TrajectoryWindow<T>>> {
        let mut out = Vec::new();
        for name in names {
            let windows = scenes
                .get(name)
                .ok_or_else(|| Error::Config(format!("unknown scene {name:?}")))?;
            out.extend(windows.iter().cloned());
        }
        Ok(out)
    };
    let train = gather(&spec.train_scenes)?;
    let test = gather(&spec.test_scenes)?;
    let train = subsample_windows(train, spec.train_fraction, spec.split_seed);
    Ok((train, test))
}

/// Keeps `⌊fraction · n⌋` windows, in their original order. `fraction >= 1`
/// returns the input unchanged.
pub fn subsample_windows<T>(
    windows: Vec<TrajectoryWindow<T>>,
    fraction: f64,
    seed: u64,
) -> Vec<TrajectoryWindow<T>> {
    if fraction >= 1.0 {
        return windows;
    }
    let n = windows.len();
    let keep = ((fraction * n as f64) + 1e-9).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, n, keep.min(n)).into_vec();
    picked.sort_unstable();
    let mut slots: Vec<Option<TrajectoryWindow<T>>> = windows.into_iter().map(Some).collect();
    picked
        .into_iter()
        .map(|i| slots[i].take().expect("index drawn twice"))
        .collect()
}

/// Every ordered `(source, target)` pair with `source != target`.
pub fn domain_adaptation_pairs(scenes: &[impl AsRef<str>]) -> Vec<(String, String)> {
    let mut pairs = Vec::new();
    for a in scenes {
        for b in scenes {
            if a.as_ref() != b.as_ref() {
                pairs.push((a.as_ref().to_string(), b.as_ref().to_string()));
            }
        }
    }
    pairs
}

/// Indices of windows grouped by `(scene_id, start_frame)`; every group is
/// one co-present agent batch. Groups come out in first-appearance order.
pub fn scene_groups<T>(windows: &[TrajectoryWindow<T>]) -> Vec<Vec<usize>> {
    let mut order: Vec<(&str, i64)> = Vec::new();
    let mut groups: BTreeMap<(&str, i64), Vec<usize>> = BTreeMap::new();
    for (i, w) in windows.iter().enumerate() {
        let key = (w.scene_id.as_str(), w.start_frame);
        let entry = groups.entry(key).or_default();
        if entry.is_empty() {
            order.push(key);
        }
        entry.push(i);
    }
    order
        .into_iter()
        .map(|k| groups.remove(&k).unwrap())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Task, ETH_UCY_SCENES};

    fn dummy(scene: &str, n: usize) -> Vec<TrajectoryWindow<f64>> {
        (0..n)
            .map(|i| TrajectoryWindow {
                scene_id: scene.to_string(),
                ped_id: i as i64,
                start_frame: (i / 3) as i64,
                hist: vec![[0.0, 0.0]; 8],
                fut: vec![[0.0, 0.0]; 12],
                neighbors: vec![],
            })
            .collect()
    }

    fn corpus(per_scene: usize) -> BTreeMap<String, Vec<TrajectoryWindow<f64>>> {
        ETH_UCY_SCENES
            .iter()
            .map(|s| (s.to_string(), dummy(s, per_scene)))
            .collect()
    }

    #[test]
    fn leave_one_out_split() {
        let spec = TaskSpec::leave_one_out(Task::Stochastic, "ETH", &ETH_UCY_SCENES).unwrap();
        let (train, test) = make_split(&spec, &corpus(10)).unwrap();
        assert_eq!(train.len(), 40);
        assert!(test.iter().all(|w| w.scene_id == "ETH"));
        assert!(train.iter().all(|w| w.scene_id != "ETH"));
    }

    #[test]
    fn few_shot_keeps_ten_percent_deterministically() {
        let spec = TaskSpec::leave_one_out(Task::FewShot, "ZARA1", &ETH_UCY_SCENES)
            .unwrap()
            .with_split_seed(7);
        let data = corpus(250);
        let (a, _) = make_split(&spec, &data).unwrap();
        let (b, _) = make_split(&spec, &data).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a, b);
    }

    #[test]
    fn full_fraction_is_identity() {
        let w = dummy("X", 17);
        assert_eq!(subsample_windows(w.clone(), 1.0, 3), w);
    }

    #[test]
    fn twenty_distinct_pairs() {
        let pairs = domain_adaptation_pairs(&ETH_UCY_SCENES);
        assert_eq!(pairs.len(), 20);
        assert!(pairs.iter().all(|(a, b)| a != b));
    }

    #[test]
    fn missing_scene_is_config_error() {
        let spec = TaskSpec::domain_adaptation("ETH", "NOPE").unwrap();
        assert!(matches!(
            make_split(&spec, &corpus(2)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn groups_by_frame() {
        let g = scene_groups(&dummy("X", 7));
        assert_eq!(g, vec![vec![0, 1, 2], vec![3, 4, 5], vec![6]]);
    }
}
