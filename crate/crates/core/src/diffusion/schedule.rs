use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

pub const DEFAULT_STEPS: usize = 10;
pub const BETA_START: f64 = 1e-4;
pub const BETA_END: f64 = 0.05;

/// Variance schedule. Index `m - 1` holds step `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub betas: Vec<f64>,
    pub alphas_bar: Vec<f64>,
}

/// Linear betas from 1e-4 to 0.05 over `m` steps.
pub fn make_schedule(m: usize) -> Result<NoiseSchedule> {
    make_linear_schedule(m, BETA_START, BETA_END)
}

pub fn make_linear_schedule(m: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if m < 1 {
        return Err(Error::Argument("diffusion needs at least one step".into()));
    }
    let betas = if m == 1 {
        vec![beta_start]
    } else {
        (0..m)
            .map(|i| beta_start + (beta_end - beta_start) * i as f64 / (m - 1) as f64)
            .collect()
    };
    NoiseSchedule::from_betas(betas)
}

impl NoiseSchedule {
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::Argument("empty beta schedule".into()));
        }
        if betas.iter().any(|&b| !(0.0..1.0).contains(&b)) {
            return Err(Error::Argument("betas must lie in [0, 1)".into()));
        }
        if betas.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Argument("betas must be non-decreasing".into()));
        }
        let mut acc = 1.0;
        let alphas_bar = betas
            .iter()
            .map(|b| {
                acc *= 1.0 - b;
                acc
            })
            .collect();
        Ok(Self { betas, alphas_bar })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    /// ᾱ_m, with ᾱ_0 = 1.
    pub fn alpha_bar(&self, m: usize) -> f64 {
        if m == 0 {
            1.0
        } else {
            self.alphas_bar[m - 1]
        }
    }

    fn check_step(&self, m: usize) -> Result<()> {
        if m == 0 || m > self.steps() {
            return Err(Error::Argument(format!(
                "step {m} not in 1..={}",
                self.steps()
            )));
        }
        Ok(())
    }
}

/// Closed-form corruption `√ᾱ_m · y0 + √(1 − ᾱ_m) · noise`.
pub fn forward_diffuse<T: Scalar>(
    y0: ArrayView2<'_, T>,
    m: usize,
    noise: ArrayView2<'_, T>,
    schedule: &NoiseSchedule,
) -> Result<Array2<T>> {
    schedule.check_step(m)?;
    if y0.dim() != noise.dim() {
        return Err(Error::shape(format!(
            "latent {:?} vs noise {:?}",
            y0.dim(),
            noise.dim()
        )));
    }
    let ab = schedule.alpha_bar(m);
    let (a, b) = (T::of(ab.sqrt()), T::of((1.0 - ab).sqrt()));
    Ok(Zip::from(&y0)
        .and(&noise)
        .map_collect(|&y, &e| a * y + b * e))
}

/// Row-wise corruption where each row has its own step.
pub(crate) fn forward_diffuse_rows<T: Scalar>(
    y0: ArrayView2<'_, T>,
    steps: &[usize],
    noise: ArrayView2<'_, T>,
    schedule: &NoiseSchedule,
) -> Array2<T> {
    let mut out = Array2::zeros(y0.dim());
    for (i, &m) in steps.iter().enumerate() {
        let ab = schedule.alpha_bar(m);
        let (a, b) = (T::of(ab.sqrt()), T::of((1.0 - ab).sqrt()));
        Zip::from(out.row_mut(i))
            .and(y0.row(i))
            .and(noise.row(i))
            .for_each(|o, &y, &e| *o = a * y + b * e);
    }
    out
}

/// Deterministic (η = 0) update from step `m` to `m - 1` given a noise
/// estimate.
pub fn ddim_step<T: Scalar>(
    y: ArrayView2<'_, T>,
    eps_hat: ArrayView2<'_, T>,
    m: usize,
    schedule: &NoiseSchedule,
) -> Result<Array2<T>> {
    schedule.check_step(m)?;
    if y.dim() != eps_hat.dim() {
        return Err(Error::shape(format!(
            "latent {:?} vs noise {:?}",
            y.dim(),
            eps_hat.dim()
        )));
    }
    let ab = schedule.alpha_bar(m);
    let ab_prev = schedule.alpha_bar(m - 1);
    let (sa, sb) = (T::of(ab.sqrt()), T::of((1.0 - ab).sqrt()));
    let (pa, pb) = (T::of(ab_prev.sqrt()), T::of((1.0 - ab_prev).sqrt()));
    Ok(Zip::from(&y).and(&eps_hat).map_collect(|&y, &e| {
        let x0 = (y - sb * e) / sa;
        pa * x0 + pb * e
    }))
}

/// [`ddim_step`] with the implied clean latent clamped to `[-clip, clip]`
/// and the noise estimate re-derived from the clamped value.
pub fn ddim_step_clipped<T: Scalar>(
    y: ArrayView2<'_, T>,
    eps_hat: ArrayView2<'_, T>,
    m: usize,
    schedule: &NoiseSchedule,
    clip: T,
) -> Result<Array2<T>> {
    schedule.check_step(m)?;
    if y.dim() != eps_hat.dim() {
        return Err(Error::shape(format!(
            "latent {:?} vs noise {:?}",
            y.dim(),
            eps_hat.dim()
        )));
    }
    let ab = schedule.alpha_bar(m);
    let ab_prev = schedule.alpha_bar(m - 1);
    let (sa, sb) = (T::of(ab.sqrt()), T::of((1.0 - ab).sqrt()));
    let (pa, pb) = (T::of(ab_prev.sqrt()), T::of((1.0 - ab_prev).sqrt()));
    Ok(Zip::from(&y).and(&eps_hat).map_collect(|&y, &e| {
        let x0 = (y - sb * e) / sa;
        let x0c = x0.max(-clip).min(clip);
        if x0c == x0 || sb <= T::zero() {
            return pa * x0c + pb * e;
        }
        pa * x0c + pb * ((y - sa * x0c) / sb)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_step_schedule() {
        let s = make_schedule(1).unwrap();
        assert_eq!(s.betas, vec![1e-4]);
        assert_eq!(s.alphas_bar, vec![0.9999]);
    }

    #[test]
    fn ten_step_endpoints() {
        let s = make_schedule(10).unwrap();
        assert_eq!(s.betas[0], 1e-4);
        assert!((s.betas[9] - 0.05).abs() < 1e-15);
        assert!(s.alphas_bar.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rejects_zero_steps_and_bad_betas() {
        assert!(matches!(make_schedule(0), Err(Error::Argument(_))));
        assert!(NoiseSchedule::from_betas(vec![0.2, 0.1]).is_err());
        assert!(NoiseSchedule::from_betas(vec![1.0]).is_err());
    }

    #[test]
    fn zero_beta_is_identity() {
        let s = NoiseSchedule::from_betas(vec![0.0; 4]).unwrap();
        assert!(s.alphas_bar.iter().all(|&a| a == 1.0));
        let y0 = array![[1.0, -2.0]];
        let n = array![[0.3, 0.7]];
        assert_eq!(forward_diffuse(y0.view(), 3, n.view(), &s).unwrap(), y0);
    }

    #[test]
    fn zero_noise_scales_signal() {
        let s = make_schedule(10).unwrap();
        let y0 = array![[2.0, 4.0]];
        let z = Array2::<f64>::zeros((1, 2));
        let y = forward_diffuse(y0.view(), 5, z.view(), &s).unwrap();
        let a = s.alphas_bar[4].sqrt();
        assert!((y[[0, 0]] - 2.0 * a).abs() < 1e-15);
    }

    #[test]
    fn step_and_shape_errors() {
        let s = make_schedule(3).unwrap();
        let a = Array2::<f64>::zeros((1, 2));
        let b = Array2::<f64>::zeros((2, 2));
        assert!(matches!(
            forward_diffuse(a.view(), 0, a.view(), &s),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            forward_diffuse(a.view(), 4, a.view(), &s),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            forward_diffuse(a.view(), 1, b.view(), &s),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn loose_clip_matches_plain_step() {
        let s = make_schedule(10).unwrap();
        let y = array![[0.3, -1.2], [2.0, 0.1]];
        let e = array![[0.5, 0.2], [-1.0, 0.4]];
        let plain = ddim_step(y.view(), e.view(), 6, &s).unwrap();
        let clipped = ddim_step_clipped(y.view(), e.view(), 6, &s, 1e6).unwrap();
        assert_eq!(plain, clipped);
    }

    #[test]
    fn tight_clip_bounds_the_last_step() {
        // stepping to m = 0 returns the clean estimate itself
        let s = make_schedule(1).unwrap();
        let y: Array2<f64> = array![[5.0, -5.0, 0.1]];
        let e = array![[0.0, 0.0, 0.0]];
        let out = ddim_step_clipped(y.view(), e.view(), 1, &s, 1.0).unwrap();
        let x0 = 0.1 / s.alphas_bar[0].sqrt();
        assert!((out[[0, 0]] - 1.0).abs() < 1e-12);
        assert!((out[[0, 1]] + 1.0).abs() < 1e-12);
        assert!((out[[0, 2]] - x0).abs() < 1e-12);
    }
}
