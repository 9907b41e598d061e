//! Curve evaluation by de Boor's algorithm.

/// Knots of a clamped uniform spline with `n` control points.
pub fn clamped_uniform_knots(n: usize) -> (usize, Vec<f64>) {
    let p = if n > 3 { 3 } else { n - 1 };
    let inner = n - p - 1;
    let mut knots = Vec::with_capacity(n + p + 1);
    for _ in 0..=p {
        knots.push(0.0);
    }
    for i in 0..inner {
        knots.push((i + 1) as f64 / (inner + 1) as f64);
    }
    for _ in 0..=p {
        knots.push(1.0);
    }
    (p, knots)
}

/// Value at `u` of the spline with control values `ctrl`.
pub fn de_boor(knots: &[f64], ctrl: &[f64], p: usize, u: f64) -> f64 {
    let n = ctrl.len();
    let k = if u >= knots[n] {
        n - 1
    } else {
        (p..n).filter(|&i| knots[i] <= u).last().unwrap()
    };
    let mut d: Vec<f64> = (0..=p).map(|j| ctrl[j + k - p]).collect();
    for r in 1..=p {
        for j in (r..=p).rev() {
            let lo = knots[j + k - p];
            let hi = knots[j + 1 + k - r];
            let alpha = if hi > lo { (u - lo) / (hi - lo) } else { 0.0 };
            d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
        }
    }
    d[p]
}

/// Interpolates `values` (uniform parameters on [0, 1]) with a clamped
/// cubic spline and samples it at `target` uniform parameters.
pub fn resample(values: &[f64], target: usize) -> Vec<f64> {
    let n = values.len();
    let (p, knots) = clamped_uniform_knots(n);
    let param = |i: usize, count: usize| i as f64 / (count - 1) as f64;
    let colloc = ndarray::Array2::from_shape_fn((n, n), |(i, j)| {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        de_boor(&knots, &e, p, param(i, n))
    });
    let ctrl = crate::numerics::gauss_solve(&colloc, values);
    (0..target)
        .map(|i| de_boor(&knots, &ctrl, p, param(i, target)))
        .collect()
}
