//! Small deterministic scenes shared by the checks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trajspace::anchor::TraversabilityMap;
use trajspace::singular_space::{build_gists, fit_svd, to_ego, GistFrame, SingularSpace};

pub type Track = Vec<[f64; 2]>;

/// Straight walkers and walkers that make one gradual turn.
pub fn tracks(seed: u64, count: usize, len: usize) -> Vec<Track> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let mut p = [rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)];
            let mut heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let speed = rng.random_range(0.3..0.6);
            let turn_at = rng.random_range(4..len.max(5));
            let turn = if i % 2 == 0 {
                0.0
            } else {
                rng.random_range(0.5..1.5) * if rng.random::<bool>() { 1.0 } else { -1.0 }
            };
            let mut out = Vec::with_capacity(len);
            for t in 0..len {
                out.push(p);
                if t >= turn_at && t < turn_at + 4 {
                    heading += turn / 4.0;
                }
                p = [p[0] + speed * heading.cos(), p[1] + speed * heading.sin()];
            }
            out
        })
        .collect()
}

pub fn space(k: usize) -> SingularSpace<f64> {
    let gists =
        build_gists(&tracks(1, 80, 24), 12, GistFrame::PrecedingPoint, k).expect("fixture gists");
    fit_svd(&gists, k).expect("fixture space")
}

/// Ego-frame future coordinates (12 steps after 8 observed) of fixture tracks.
pub fn future_coords(space: &SingularSpace<f64>, seed: u64, count: usize) -> Array2<f64> {
    let tr = tracks(seed, count, 20);
    let mut out = Array2::zeros((count, space.k()));
    for (i, t) in tr.iter().enumerate() {
        let origin = t[7];
        let c = space
            .project_path(&to_ego(&t[8..20], origin))
            .expect("fixture projection");
        out.row_mut(i).assign(&c);
    }
    out
}

/// 20 m × 20 m at 0.1 m per pixel, centred on the origin, with a blocked
/// rectangle spanning x ∈ [1, 3], y ∈ [-2, 2].
pub fn obstacle_map() -> TraversabilityMap<f64> {
    let mut grid = Array2::from_elem((201, 201), true);
    for r in 80..=120 {
        for c in 110..=130 {
            grid[[r, c]] = false;
        }
    }
    let h = TraversabilityMap::scaled_homography(0.1, [-10.0, -10.0]);
    TraversabilityMap::new(grid, h).expect("fixture map")
}
