//! Exact 2-means by enumerating every two-way partition.

use ndarray::{Array1, Array2};

/// Optimal two centroids (sorted lexicographically) and their inertia.
pub fn exhaustive_two_means(points: &Array2<f64>) -> (Vec<Vec<f64>>, f64) {
    let (n, d) = points.dim();
    assert!((2..=24).contains(&n), "enumeration is exponential");
    let total: Array1<f64> = points.sum_axis(ndarray::Axis(0));
    let sq_total: f64 = points.iter().map(|x| x * x).sum();
    let mut best = (f64::INFINITY, 0u32);
    // point 0 always in cluster A; mask bit i-1 puts point i in cluster B
    for mask in 1u32..(1 << (n - 1)) {
        let mut sum_b = vec![0.0; d];
        let mut nb = 0usize;
        for i in 1..n {
            if mask & (1 << (i - 1)) != 0 {
                nb += 1;
                for j in 0..d {
                    sum_b[j] += points[[i, j]];
                }
            }
        }
        let na = n - nb;
        let mut between = 0.0;
        for j in 0..d {
            let sa = total[j] - sum_b[j];
            between += sa * sa / na as f64 + sum_b[j] * sum_b[j] / nb as f64;
        }
        let inertia = sq_total - between;
        if inertia < best.0 {
            best = (inertia, mask);
        }
    }
    let mask = best.1;
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    let (mut na, mut nb) = (0.0, 0.0);
    for i in 0..n {
        let in_b = i > 0 && mask & (1 << (i - 1)) != 0;
        let (acc, cnt) = if in_b {
            (&mut b, &mut nb)
        } else {
            (&mut a, &mut na)
        };
        *cnt += 1.0;
        for j in 0..d {
            acc[j] += points[[i, j]];
        }
    }
    let mut cents = vec![
        a.iter().map(|v| v / na).collect::<Vec<_>>(),
        b.iter().map(|v| v / nb).collect(),
    ];
    cents.sort_by(|x, y| x.partial_cmp(y).unwrap());
    (cents, best.0)
}
