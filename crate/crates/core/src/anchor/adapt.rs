use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{AnchorSet, VectorField};
use crate::dataset::{Position, T_FUT};
use crate::singular_space::SingularSpace;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    /// Stop once no path point moves by more than this (meters).
    pub eps_eq: f64,
    pub max_iter: usize,
    /// Length of the reconstructed anchor paths.
    pub t_fut: usize,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            eps_eq: 1e-3,
            max_iter: 50,
            t_fut: T_FUT,
        }
    }
}

/// Pushes each prototype until its reconstructed path, placed at
/// `last_obs`, stays on walkable cells.
///
/// Each round samples the field along the world-frame path, projects that
/// displacement sequence into motion space and adds it to the prototype.
/// The step halves whenever two successive displacement sequences point
/// against each other.
pub fn adapt_anchors<T: Scalar>(
    anchors: &AnchorSet<T>,
    field: &VectorField<T>,
    space: &SingularSpace<T>,
    last_obs: Position<T>,
    config: &AdaptConfig,
) -> Result<AnchorSet<T>> {
    if anchors.k() != space.k() {
        return Err(Error::shape(format!(
            "anchors have {} columns, space has K = {}",
            anchors.k(),
            space.k()
        )));
    }
    if anchors.prototypes.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("non-finite anchor coordinates".into()));
    }
    let t = config.t_fut;
    let ops = space.ops(t)?;
    let eps = T::of(config.eps_eq);

    let mut out = anchors.clone();
    let mut stalled = Vec::new();
    let mut most_iters = 0;
    for (row, mut proto) in out.prototypes.axis_iter_mut(Axis(0)).enumerate() {
        let mut step = T::one();
        let mut previous: Option<Array1<T>> = None;
        let mut converged = false;
        let mut iters = 0;
        while iters < config.max_iter {
            let path = ops.basis.dot(&proto);
            let disp = path_displacement(field, &path, last_obs, eps);
            let worst = disp
                .exact_chunks(2)
                .into_iter()
                .map(|d| (d[0] * d[0] + d[1] * d[1]).sqrt())
                .fold(T::zero(), T::max);
            if worst < eps {
                converged = true;
                break;
            }
            if let Some(prev) = &previous {
                if prev.dot(&disp) < T::zero() {
                    step = step * T::of(0.5);
                }
            }
            let delta = disp.dot(&ops.projector);
            proto.scaled_add(step, &delta);
            previous = Some(disp);
            iters += 1;
        }
        if !converged {
            // the cap may be hit exactly on the step that fixes the path
            let path = ops.basis.dot(&proto);
            let disp = path_displacement(field, &path, last_obs, eps);
            converged = disp.iter().all(|v| v.abs() < eps);
        }
        if !converged {
            stalled.push(row);
        }
        most_iters = most_iters.max(iters);
    }
    if !stalled.is_empty() {
        log::debug!(
            "{} anchors hit the {}-iteration cap",
            stalled.len(),
            config.max_iter
        );
    }
    out.adapted = true;
    out.converged = stalled.is_empty();
    out.stalled = stalled;
    out.adapt_iterations = most_iters;
    Ok(out)
}

/// Field displacement at each point of a flattened ego-frame path.
///
/// Walkable points get zero. Blocked points get the bilinear field; where
/// that nearly cancels (a blocked cell between opposing neighbours) the
/// cell's own vector is used so the point still moves.
fn path_displacement<T: Scalar>(
    field: &VectorField<T>,
    path: &Array1<T>,
    origin: Position<T>,
    eps: T,
) -> Array1<T> {
    let map = field.map();
    let mut disp = Array1::<T>::zeros(path.len());
    for (i, xy) in path.exact_chunks(2).into_iter().enumerate() {
        let p = [xy[0] + origin[0], xy[1] + origin[1]];
        let cell = map.cell_of(p);
        if cell.is_some_and(|rc| map.grid()[rc]) {
            continue;
        }
        let mut f = field.sample(p);
        if (f[0] * f[0] + f[1] * f[1]).sqrt() < eps {
            if let Some((r, c)) = cell {
                let (r2, c2) = field.nearest[[r, c]];
                let target = map.cell_world(r2, c2);
                f = [target[0] - p[0], target[1] - p[1]];
            }
        }
        disp[2 * i] = f[0];
        disp[2 * i + 1] = f[1];
    }
    disp
}

/// Reconstructed world-frame paths (S × T × 2 flattened to S × 2T).
pub fn anchor_paths<T: Scalar>(
    anchors: &AnchorSet<T>,
    space: &SingularSpace<T>,
    last_obs: Position<T>,
    t_fut: usize,
) -> Result<Array2<T>> {
    let mut paths = space.reconstruct(anchors.prototypes.view(), t_fut)?;
    for mut row in paths.rows_mut() {
        for xy in row.exact_chunks_mut(2) {
            let mut xy = xy;
            xy[0] += last_obs[0];
            xy[1] += last_obs[1];
        }
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchor::{build_vector_field, TraversabilityMap};
    use crate::singular_space::GistFrame;
    use ndarray::array;

    /// K=2 space whose vectors are "constant x" and "constant y" paths.
    fn offset_space(t: usize) -> SingularSpace<f64> {
        let mut basis = Array2::<f64>::zeros((2 * t, 2));
        let n = (t as f64).sqrt();
        for i in 0..t {
            basis[[2 * i, 0]] = 1.0 / n;
            basis[[2 * i + 1, 1]] = 1.0 / n;
        }
        SingularSpace::from_parts(basis, array![1.0, 1.0], t, GistFrame::FirstPoint, false)
    }

    fn strip_field() -> VectorField<f64> {
        let map = TraversabilityMap::new(
            array![[false, true, false]],
            TraversabilityMap::identity_homography(),
        )
        .unwrap();
        build_vector_field(&map).unwrap()
    }

    #[test]
    fn traversable_prototype_is_untouched() {
        let space = offset_space(12);
        let field = strip_field();
        let n = 12f64.sqrt();
        let anchors = AnchorSet::from_prototypes(array![[1.0 * n, 0.0]]);
        let out = adapt_anchors(
            &anchors,
            &field,
            &space,
            [0.0, 0.0],
            &AdaptConfig::default(),
        )
        .unwrap();
        assert_eq!(out.prototypes, anchors.prototypes);
        assert!(out.adapted && out.converged);
        assert_eq!(out.adapt_iterations, 0);
    }

    #[test]
    fn blocked_path_moves_by_one_field_step() {
        let space = offset_space(12);
        let field = strip_field();
        let anchors = AnchorSet::from_prototypes(array![[0.0, 0.0]]);
        let out = adapt_anchors(
            &anchors,
            &field,
            &space,
            [0.0, 0.0],
            &AdaptConfig::default(),
        )
        .unwrap();
        let n = 12f64.sqrt();
        assert!((out.prototypes[[0, 0]] - n).abs() < 1e-12);
        assert!(out.prototypes[[0, 1]].abs() < 1e-12);
        assert_eq!(out.adapt_iterations, 1);
        let paths = anchor_paths(&out, &space, [0.0, 0.0], 12).unwrap();
        for xy in paths.row(0).exact_chunks(2) {
            assert!(field.map().is_traversable([xy[0], xy[1]]));
        }
    }

    #[test]
    fn shape_mismatch() {
        let space = offset_space(12);
        let anchors = AnchorSet::from_prototypes(array![[0.0, 0.0, 0.0]]);
        let err = adapt_anchors(
            &anchors,
            &strip_field(),
            &space,
            [0.0, 0.0],
            &AdaptConfig::default(),
        );
        assert!(matches!(err, Err(Error::Shape(_))));
    }
}
