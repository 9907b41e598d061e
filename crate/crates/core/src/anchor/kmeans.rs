use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AnchorSet;
use crate::{Error, Result, Scalar};

const RESTARTS: usize = 8;
const MAX_ITER: usize = 300;

/// k-means over motion-space coordinates: k-means++ seeding, Lloyd
/// iterations, best of several seeded restarts.
pub fn cluster_prototypes<T: Scalar>(
    coords: ArrayView2<'_, T>,
    s: usize,
    seed: u64,
) -> Result<AnchorSet<T>> {
    let n = coords.nrows();
    if s == 0 {
        return Err(Error::Clustering("zero clusters requested".into()));
    }
    if n < s {
        return Err(Error::Clustering(format!("{n} rows for {s} clusters")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(T, Array2<T>, usize)> = None;
    let restarts = if s == 1 { 1 } else { RESTARTS };
    for _ in 0..restarts {
        let init = plus_plus_init(coords, s, &mut rng);
        let (centroids, inertia, iters) = lloyd(coords, init);
        if best.as_ref().is_none_or(|b| inertia < b.0) {
            best = Some((inertia, centroids, iters));
        }
    }
    let (_, prototypes, iterations) = best.expect("at least one restart");
    Ok(AnchorSet {
        prototypes,
        adapted: false,
        converged: true,
        stalled: Vec::new(),
        seed,
        cluster_iterations: iterations,
        adapt_iterations: 0,
    })
}

fn sq_dist<T: Scalar>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum()
}

fn plus_plus_init<T: Scalar>(x: ArrayView2<'_, T>, s: usize, rng: &mut ChaCha8Rng) -> Array2<T> {
    let n = x.nrows();
    let mut centroids = Array2::<T>::zeros((s, x.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&x.row(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(x.row(i), x.row(first)).to_f64_lossy())
        .collect();
    let mut chosen = vec![first];
    for k in 1..s {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            if d2[pick] == 0.0 {
                pick = (0..n).rev().find(|&i| d2[i] > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            // all points coincide with chosen centres: take any unused row
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(pick);
        centroids.row_mut(k).assign(&x.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(pick)).to_f64_lossy());
        }
    }
    centroids
}

fn lloyd<T: Scalar>(x: ArrayView2<'_, T>, mut centroids: Array2<T>) -> (Array2<T>, T, usize) {
    let (n, dim) = x.dim();
    let s = centroids.nrows();
    let mut assign = vec![usize::MAX; n];
    let mut iters = 0;
    loop {
        iters += 1;
        let mut changed = false;
        for i in 0..n {
            let mut best = (T::infinity(), 0);
            for k in 0..s {
                let d = sq_dist(x.row(i), centroids.row(k));
                if d < best.0 {
                    best = (d, k);
                }
            }
            if assign[i] != best.1 {
                assign[i] = best.1;
                changed = true;
            }
        }
        let mut sums = Array2::<T>::zeros((s, dim));
        let mut counts = vec![0usize; s];
        for i in 0..n {
            sums.row_mut(assign[i]).scaled_add(T::one(), &x.row(i));
            counts[assign[i]] += 1;
        }
        for k in 0..s {
            if counts[k] > 0 {
                let c = T::of(counts[k] as f64);
                centroids.row_mut(k).assign(&sums.row(k).mapv(|v| v / c));
            } else {
                // re-seed an empty cluster with the worst-fit point
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(x.row(a), centroids.row(assign[a]));
                        let db = sq_dist(x.row(b), centroids.row(assign[b]));
                        da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .unwrap_or(0);
                centroids.row_mut(k).assign(&x.row(far));
                assign[far] = k;
                changed = true;
            }
        }
        if !changed || iters >= MAX_ITER {
            break;
        }
    }
    let inertia = (0..n)
        .map(|i| sq_dist(x.row(i), centroids.row(assign[i])))
        .sum();
    (centroids, inertia, iters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_cluster_is_mean() {
        let x = array![[1.0, 0.0, 0.0, 0.0], [3.0, 0.0, 0.0, 0.0]];
        let a = cluster_prototypes(x.view(), 1, 0).unwrap();
        assert_eq!(a.prototypes, array![[2.0, 0.0, 0.0, 0.0]]);
    }

    #[test]
    fn one_cluster_per_point() {
        let x = array![[0.0, 1.0], [5.0, 5.0], [-3.0, 2.0]];
        let a = cluster_prototypes(x.view(), 3, 11).unwrap();
        let mut got: Vec<Vec<f64>> = a
            .prototypes
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect();
        got.sort_by(|p, q| p.partial_cmp(q).unwrap());
        assert_eq!(got, vec![vec![-3.0, 2.0], vec![0.0, 1.0], vec![5.0, 5.0]]);
    }

    #[test]
    fn too_few_rows() {
        let x = array![[0.0, 1.0]];
        assert!(matches!(
            cluster_prototypes(x.view(), 2, 0),
            Err(Error::Clustering(_))
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let x = Array2::from_shape_fn((60, 3), |(i, j)| ((i * 31 + j * 17) % 23) as f64);
        let a = cluster_prototypes(x.view(), 5, 42).unwrap();
        let b = cluster_prototypes(x.view(), 5, 42).unwrap();
        assert_eq!(a.prototypes, b.prototypes);
    }

    #[test]
    fn duplicate_points_do_not_break_seeding() {
        let x = Array2::<f64>::ones((6, 2));
        let a = cluster_prototypes(x.view(), 3, 1).unwrap();
        assert!(a.prototypes.iter().all(|&v| v == 1.0));
    }
}
