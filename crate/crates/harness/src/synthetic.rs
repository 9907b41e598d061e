use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use trajspace::anchor::TraversabilityMap;
use trajspace::dataset::{parse_scene_text, SceneEntry, SceneRegistry};

use crate::corpus::Corpus;
use crate::Result;

/// Frame ids step by this much, as in the ETH/UCY annotation files.
const FRAME_STEP: i64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub scenes: usize,
    pub agents_per_scene: usize,
    pub seed: u64,
    /// Std-dev of the position noise added to every observation (m).
    pub noise: f64,
    /// Share of agents that make one turn.
    pub turn_share: f64,
    /// Side of the square map (m).
    pub extent: f64,
    pub meters_per_pixel: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            scenes: 5,
            agents_per_scene: 70,
            seed: 0,
            noise: 0.03,
            turn_share: 0.5,
            extent: 40.0,
            meters_per_pixel: 0.1,
        }
    }
}

/// One generated scene: `frame ped x y` text, walkable grid and homography.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub name: String,
    pub text: String,
    pub grid: Array2<bool>,
    pub homography: [f64; 9],
    /// Blocked rectangle `[x0, y0, x1, y1]` in meters.
    pub obstacle: [f64; 4],
}

pub fn scene_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("SYN{}", i + 1)).collect()
}

/// Walkers that go straight or make one turn, never crossing the scene's
/// rectangular obstacle or leaving the map. Headings cluster around the four
/// directions along and across a street axis shared by all scenes.
pub fn generate(cfg: &SyntheticConfig) -> Vec<SyntheticScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = cfg.extent / 2.0;
    let cells = (cfg.extent / cfg.meters_per_pixel).round() as usize + 1;
    let noise = Normal::new(0.0, cfg.noise.max(0.0)).expect("finite noise");
    scene_names(cfg.scenes)
        .into_iter()
        .enumerate()
        .map(|(si, name)| {
            let cx = rng.random_range(-6.0..6.0);
            let cy = rng.random_range(-6.0..6.0);
            let (w, h) = (rng.random_range(3.0..7.0), rng.random_range(2.0..5.0));
            let obstacle = [cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0];
            // scenes differ a little in walking speed and street direction
            let speed_scale = 0.85 + 0.075 * si as f64;
            let street: f64 = rng.random_range(-0.15..0.15);

            let homography = [
                1.0 / cfg.meters_per_pixel,
                0.0,
                half / cfg.meters_per_pixel,
                0.0,
                1.0 / cfg.meters_per_pixel,
                half / cfg.meters_per_pixel,
                0.0,
                0.0,
                1.0,
            ];
            let mut grid = Array2::from_elem((cells, cells), true);
            for ((r, c), v) in grid.indexed_iter_mut() {
                let x = c as f64 * cfg.meters_per_pixel - half;
                let y = r as f64 * cfg.meters_per_pixel - half;
                if x >= obstacle[0] && x <= obstacle[2] && y >= obstacle[1] && y <= obstacle[3] {
                    *v = false;
                }
            }

            let mut text = String::new();
            let mut ped = 0;
            while ped < cfg.agents_per_scene {
                let Some(track) = walker(&mut rng, cfg, half, &obstacle, speed_scale, street)
                else {
                    continue;
                };
                let start: i64 = rng.random_range(0..40);
                for (t, p) in track.iter().enumerate() {
                    let frame = (start + t as i64) * FRAME_STEP;
                    let (x, y) = (p[0] + noise.sample(&mut rng), p[1] + noise.sample(&mut rng));
                    writeln!(text, "{frame}\t{}\t{x}\t{y}", ped + 1).expect("write to string");
                }
                ped += 1;
            }
            SyntheticScene {
                name,
                text,
                grid,
                homography,
                obstacle,
            }
        })
        .collect()
}

fn walker(
    rng: &mut ChaCha8Rng,
    cfg: &SyntheticConfig,
    half: f64,
    obstacle: &[f64; 4],
    speed_scale: f64,
    street: f64,
) -> Option<Vec<[f64; 2]>> {
    let len = rng.random_range(20..=28);
    let margin = 2.0;
    let mut p = [
        rng.random_range(-half + margin..half - margin),
        rng.random_range(-half + margin..half - margin),
    ];
    // along or across the street, either way, with some spread
    let flow = rng.random_range(0..4) as f64 * std::f64::consts::FRAC_PI_2;
    let mut heading: f64 = street + flow + rng.random_range(-0.3..0.3);
    let speed = rng.random_range(0.25..0.55) * speed_scale;
    let turning = rng.random::<f64>() < cfg.turn_share;
    let turn_at = rng.random_range(6..len - 4);
    let turn = rng.random_range(0.4..1.4) * if rng.random::<bool>() { 1.0 } else { -1.0 };
    let mut track = Vec::with_capacity(len);
    for t in 0..len {
        let clear = 0.4;
        let inside_obstacle = p[0] > obstacle[0] - clear
            && p[0] < obstacle[2] + clear
            && p[1] > obstacle[1] - clear
            && p[1] < obstacle[3] + clear;
        if inside_obstacle || p[0].abs() > half - 1.0 || p[1].abs() > half - 1.0 {
            return None;
        }
        track.push(p);
        if turning && t >= turn_at && t < turn_at + 3 {
            heading += turn / 3.0;
        }
        p = [p[0] + speed * heading.cos(), p[1] + speed * heading.sin()];
    }
    Some(track)
}

/// Parses generated scenes without touching the disk.
pub fn corpus(cfg: &SyntheticConfig) -> Result<Corpus> {
    let scenes = generate(cfg);
    let mut records = BTreeMap::new();
    let mut maps = BTreeMap::new();
    for s in &scenes {
        records.insert(
            s.name.clone(),
            parse_scene_text(&s.name, &s.text, format!("{}.txt", s.name))?,
        );
        maps.insert(
            s.name.clone(),
            TraversabilityMap::with_flat_homography(s.grid.clone(), &s.homography)?,
        );
    }
    Ok(Corpus {
        order: scenes.iter().map(|s| s.name.clone()).collect(),
        scenes: records,
        maps,
    })
}

/// Writes `<name>.txt`, `<name>.pgm` and `registry.json` under `dir` and
/// returns the registry path.
pub fn write(scenes: &[SyntheticScene], dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut reg = SceneRegistry::default();
    for s in scenes {
        let txt = format!("{}.txt", s.name);
        let pgm = format!("{}.pgm", s.name);
        std::fs::write(dir.join(&txt), &s.text)?;
        std::fs::write(dir.join(&pgm), to_pgm(&s.grid))?;
        reg.scenes.insert(
            s.name.clone(),
            SceneEntry {
                trajectory: vec![txt.into()],
                map: Some(pgm.into()),
                homography: Some(s.homography),
            },
        );
        reg.order.push(s.name.clone());
    }
    let path = dir.join("registry.json");
    reg.save(&path)?;
    Ok(path)
}

fn to_pgm(grid: &Array2<bool>) -> Vec<u8> {
    let (h, w) = grid.dim();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(grid.iter().map(|&t| if t { 255u8 } else { 0 }));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticConfig {
        SyntheticConfig {
            scenes: 2,
            agents_per_scene: 6,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn deterministic_and_obstacle_free() {
        let a = generate(&small());
        let b = generate(&small());
        assert_eq!(a[0].text, b[0].text);
        let c = corpus(&small()).unwrap();
        for (name, rec) in &c.scenes {
            let map = &c.maps[name];
            assert!(rec.records.iter().all(|r| map.is_traversable([r.x, r.y])));
            assert_eq!(rec.frame_stride, FRAME_STEP);
        }
    }

    #[test]
    fn written_registry_loads_back() {
        let dir = std::env::temp_dir().join(format!("trajspace-syn-{}", std::process::id()));
        let scenes = generate(&small());
        let reg = write(&scenes, &dir).unwrap();
        let loaded = Corpus::load(&reg).unwrap();
        let direct = corpus(&small()).unwrap();
        assert_eq!(loaded.order, direct.order);
        for name in &direct.order {
            assert_eq!(loaded.scenes[name].records, direct.scenes[name].records);
            assert_eq!(loaded.maps[name].grid(), direct.maps[name].grid());
        }
        std::fs::remove_dir_all(dir).ok();
    }
}
