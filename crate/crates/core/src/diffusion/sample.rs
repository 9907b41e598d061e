use ndarray::{s, Array2, Array4, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::net::{Conditions, NoisePredictor};
use super::schedule::{ddim_step, ddim_step_clipped, NoiseSchedule};
use super::train::DenoisingMode;
use crate::dataset::Position;
use crate::singular_space::SingularSpace;
use crate::{Error, Result, Scalar};

/// Draws a standard-normal matrix.
pub fn gaussian<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<T> {
    Array2::from_shape_simple_fn((rows, cols), || T::of(rng.sample::<f64, _>(StandardNormal)))
}

/// Runs the deterministic reverse chain from `y_init` at step M down to 0.
pub fn denoise<T: Scalar, P: NoisePredictor<T> + ?Sized>(
    net: &P,
    cond: &Conditions<T>,
    y_init: Array2<T>,
    schedule: &NoiseSchedule,
) -> Result<Array2<T>> {
    let mut y = y_init;
    let rows = cond.rows();
    for m in (1..=schedule.steps()).rev() {
        let eps = net.predict_noise(cond, y.view(), &vec![m; rows])?;
        y = match net.latent_clip() {
            Some(c) => ddim_step_clipped(y.view(), eps.view(), m, schedule, c)?,
            None => ddim_step(y.view(), eps.view(), m, schedule)?,
        };
    }
    Ok(y)
}

/// Predicted future coordinates (rows × S·K) given the initial noise.
///
/// `anchors` holds S adapted anchors per row. A predictor whose latent is
/// K wide is run once per anchor; one whose latent is S·K wide refines all
/// anchors together. `noise` is rows × S·K in both cases.
pub fn sample_with_noise<T: Scalar, P: NoisePredictor<T> + ?Sized>(
    net: &P,
    x: ArrayView2<'_, T>,
    anchors: ArrayView2<'_, T>,
    groups: &[std::ops::Range<usize>],
    noise: ArrayView2<'_, T>,
    schedule: &NoiseSchedule,
    mode: DenoisingMode,
) -> Result<Array2<T>> {
    if !net.is_trained() {
        return Err(Error::Untrained(
            "denoiser has not been fitted or loaded".into(),
        ));
    }
    let rows = x.nrows();
    let k = x.ncols();
    let width = anchors.ncols();
    if anchors.nrows() != rows || noise.dim() != anchors.dim() || k == 0 || width % k != 0 {
        return Err(Error::shape(format!(
            "histories {:?}, anchors {:?}, noise {:?}",
            x.dim(),
            anchors.dim(),
            noise.dim()
        )));
    }
    let latent = net.latent();
    let chunks: Vec<(usize, usize)> = if latent == width {
        vec![(0, width)]
    } else if latent == k {
        (0..width / k).map(|j| (j * k, (j + 1) * k)).collect()
    } else {
        return Err(Error::shape(format!(
            "predictor latent {latent} fits neither K={k} nor S·K={width}"
        )));
    };
    let top = schedule.alpha_bar(schedule.steps());
    let scale = net.latent_scale();
    let mut out = Array2::zeros(anchors.dim());
    for (a, b) in chunks {
        let p = anchors.slice(s![.., a..b]).to_owned();
        let z = noise.slice(s![.., a..b]);
        let (cond_p, init) = match mode {
            DenoisingMode::Residual => (p.clone(), z.to_owned()),
            DenoisingMode::Direct => (Array2::zeros(p.dim()), z.to_owned()),
            DenoisingMode::Initial => {
                let (sa, sb) = (T::of(top.sqrt()), T::of((1.0 - top).sqrt()));
                (p.clone(), p.mapv(|v| v * sa / scale) + z.mapv(|v| v * sb))
            }
        };
        let cond = Conditions {
            x: x.to_owned(),
            p: cond_p,
            groups: groups.to_vec(),
        };
        let y0 = denoise(net, &cond, init, schedule)?.mapv(|v| v * scale);
        let pred = match mode {
            DenoisingMode::Residual => y0 + &p,
            _ => y0,
        };
        out.slice_mut(s![.., a..b]).assign(&pred);
    }
    Ok(out)
}

/// World-frame futures, rows × S × t_fut × 2, from freshly drawn noise.
#[allow(clippy::too_many_arguments)]
pub fn sample<T: Scalar, P: NoisePredictor<T> + ?Sized, R: Rng + ?Sized>(
    net: &P,
    x: ArrayView2<'_, T>,
    anchors: ArrayView2<'_, T>,
    groups: &[std::ops::Range<usize>],
    last_obs: &[Position<T>],
    space: &SingularSpace<T>,
    schedule: &NoiseSchedule,
    mode: DenoisingMode,
    t_fut: usize,
    rng: &mut R,
) -> Result<Array4<T>> {
    let noise = gaussian(anchors.nrows(), anchors.ncols(), rng);
    let coords = sample_with_noise(net, x, anchors, groups, noise.view(), schedule, mode)?;
    coords_to_world(coords.view(), space, last_obs, t_fut)
}

/// Reconstructs rows × (S·K) coordinates into rows × S × t_fut × 2 world
/// positions.
pub fn coords_to_world<T: Scalar>(
    coords: ArrayView2<'_, T>,
    space: &SingularSpace<T>,
    last_obs: &[Position<T>],
    t_fut: usize,
) -> Result<Array4<T>> {
    let k = space.k();
    let rows = coords.nrows();
    if last_obs.len() != rows || coords.ncols() % k != 0 {
        return Err(Error::shape(format!(
            "{rows} coordinate rows of width {} for {} origins and K={k}",
            coords.ncols(),
            last_obs.len()
        )));
    }
    let s_count = coords.ncols() / k;
    let flat = coords
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((rows * s_count, k))
        .map_err(|e| Error::shape(e.to_string()))?;
    let paths = space.reconstruct(flat.view(), t_fut)?;
    let mut out = Array4::zeros((rows, s_count, t_fut, 2));
    for i in 0..rows {
        for j in 0..s_count {
            let path = paths.row(i * s_count + j);
            for t in 0..t_fut {
                out[[i, j, t, 0]] = path[2 * t] + last_obs[i][0];
                out[[i, j, t, 1]] = path[2 * t + 1] + last_obs[i][1];
            }
        }
    }
    Ok(out)
}
