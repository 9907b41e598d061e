//! Cubic B-spline resampling matrices.
//!
//! A length-`t_win` path is interpolated by a clamped cubic B-spline with
//! uniform knots and `t_win` control points, then sampled at `t_target`
//! uniformly spaced parameters. Away from the clamped ends the basis
//! functions are the order-4 cardinal B-spline (the Irwin–Hall density).

use ndarray::Array2;

use crate::linalg::pinv;
use crate::{Error, Result, Scalar};

/// `(2·t_target) × (2·t_win)` resampling matrix acting on interleaved
/// `(x₁, y₁, …, x_T, y_T)` column vectors. The x and y channels share the
/// same `t_target × t_win` block and never mix.
pub fn bspline_matrix<T: Scalar>(t_target: usize, t_win: usize) -> Result<Array2<T>> {
    let block = channel_block::<T>(t_target, t_win)?;
    let mut out = Array2::<T>::zeros((2 * t_target, 2 * t_win));
    for ((i, j), &v) in block.indexed_iter() {
        out[[2 * i, 2 * j]] = v;
        out[[2 * i + 1, 2 * j + 1]] = v;
    }
    Ok(out)
}

/// Single-channel `t_target × t_win` block; each row sums to one.
pub fn channel_block<T: Scalar>(t_target: usize, t_win: usize) -> Result<Array2<T>> {
    if t_target < 2 {
        return Err(Error::Argument(format!(
            "resampling target length {t_target} < 2"
        )));
    }
    if t_win < 2 {
        return Err(Error::Argument(format!("window length {t_win} < 2")));
    }
    let spline = ClampedSpline::new(t_win);
    let at_window = spline.collocation::<T>(t_win);
    let at_target = spline.collocation::<T>(t_target);
    Ok(at_target.dot(&pinv(at_window.view())))
}

/// Clamped uniform B-spline basis with `n` control points.
#[derive(Debug, Clone)]
pub struct ClampedSpline {
    degree: usize,
    knots: Vec<f64>,
    n: usize,
}

impl ClampedSpline {
    pub fn new(n: usize) -> Self {
        let degree = 3.min(n - 1);
        let interior = n - degree - 1;
        let mut knots = vec![0.0; degree + 1];
        for i in 1..=interior {
            knots.push(i as f64 / (interior + 1) as f64);
        }
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Self { degree, knots, n }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Basis values `N_j(u)` for all control points (Cox–de Boor).
    pub fn basis(&self, u: f64) -> Vec<f64> {
        let p = self.degree;
        let t = &self.knots;
        let n = self.n;
        let u = u.clamp(0.0, 1.0);
        if u >= 1.0 {
            let mut out = vec![0.0; n];
            out[n - 1] = 1.0;
            return out;
        }
        // degree-0 indicator on the half-open span containing u
        let mut vals: Vec<f64> = (0..t.len() - 1)
            .map(|i| if t[i] <= u && u < t[i + 1] { 1.0 } else { 0.0 })
            .collect();
        for d in 1..=p {
            let next: Vec<f64> = (0..t.len() - 1 - d)
                .map(|i| {
                    let mut acc = 0.0;
                    let left = t[i + d] - t[i];
                    if left > 0.0 {
                        acc += (u - t[i]) / left * vals[i];
                    }
                    let right = t[i + d + 1] - t[i + 1];
                    if right > 0.0 {
                        acc += (t[i + d + 1] - u) / right * vals[i + 1];
                    }
                    acc
                })
                .collect();
            vals = next;
        }
        vals.truncate(n);
        vals
    }

    /// `samples × n` matrix of basis values at uniform parameters on [0, 1].
    pub fn collocation<T: Scalar>(&self, samples: usize) -> Array2<T> {
        let mut out = Array2::<T>::zeros((samples, self.n));
        for i in 0..samples {
            let u = if samples == 1 {
                0.0
            } else {
                i as f64 / (samples - 1) as f64
            };
            for (j, v) in self.basis(u).into_iter().enumerate() {
                out[[i, j]] = T::of(v);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_at_window_length() {
        let c = bspline_matrix::<f64>(12, 12).unwrap();
        let worst = c
            .indexed_iter()
            .map(|((i, j), &v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn rows_sum_to_one() {
        for target in [2, 3, 8, 12, 20] {
            let b = channel_block::<f64>(target, 12).unwrap();
            for row in b.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn endpoints_are_preserved() {
        let b = channel_block::<f64>(5, 12).unwrap();
        assert!((b[[0, 0]] - 1.0).abs() < 1e-12);
        assert!((b[[4, 11]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn short_target_rejected() {
        assert!(matches!(
            bspline_matrix::<f64>(1, 12),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn channels_do_not_mix() {
        let c = bspline_matrix::<f64>(8, 12).unwrap();
        for ((i, j), &v) in c.indexed_iter() {
            if i % 2 != j % 2 {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn basis_partition_of_unity() {
        let s = ClampedSpline::new(12);
        for k in 0..=50 {
            let sum: f64 = s.basis(k as f64 / 50.0).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
