//! A shared low-rank motion basis for trajectories of any length.
//!
//! Length-`t_win` trajectory segments ("gists") are stacked into a matrix
//! whose top-K right singular vectors span the motion space. Other lengths
//! reach the same space through B-spline resampling of the basis vectors.

mod bspline;
mod persist;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dataset::{Position, TrajectoryWindow};
use crate::linalg::{self, canonical_signs, complete_orthonormal, leading_columns, pinv};
use crate::{Error, Result, Scalar};

pub use bspline::{bspline_matrix, channel_block, ClampedSpline};
pub use persist::SpaceArtifact;

/// Motion-space coordinates, one row per agent (N × K).
pub type SingularCoord<T> = Array2<T>;

/// Default basis size.
pub const DEFAULT_K: usize = 4;
/// Default gist length; equal to the prediction horizon.
pub const DEFAULT_T_WIN: usize = 12;

/// Where a gist segment is anchored before it enters the SVD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GistFrame {
    /// The segment's own first point is the origin.
    FirstPoint,
    /// The point just before the segment is the origin, matching how a
    /// future is expressed relative to the last observed position.
    #[default]
    PrecedingPoint,
}

/// L × (2·t_win) matrix of translated, flattened segments.
#[derive(Debug, Clone)]
pub struct GistMatrix<T> {
    pub rows: Array2<T>,
    pub t_win: usize,
    pub frame: GistFrame,
}

impl<T> GistMatrix<T> {
    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }
}

/// Flattens positions to `(x₁, y₁, …, x_T, y_T)`.
pub fn flatten<T: Scalar>(points: &[Position<T>]) -> Array1<T> {
    points.iter().flat_map(|p| [p[0], p[1]]).collect()
}

/// Inverse of [`flatten`].
pub fn unflatten<T: Scalar>(flat: &[T]) -> Vec<Position<T>> {
    flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
}

/// Translates points so `origin` maps to zero.
pub fn to_ego<T: Scalar>(points: &[Position<T>], origin: Position<T>) -> Vec<Position<T>> {
    points
        .iter()
        .map(|p| [p[0] - origin[0], p[1] - origin[1]])
        .collect()
}

pub fn to_world<T: Scalar>(points: &[Position<T>], origin: Position<T>) -> Vec<Position<T>> {
    points
        .iter()
        .map(|p| [p[0] + origin[0], p[1] + origin[1]])
        .collect()
}

/// Recovers the contiguous tracks covered by a window set by stitching
/// overlapping or adjacent windows of the same agent.
pub fn tracks_from_windows<T: Scalar>(windows: &[TrajectoryWindow<T>]) -> Vec<Vec<Position<T>>> {
    let mut per_agent: BTreeMap<(&str, i64), Vec<&TrajectoryWindow<T>>> = BTreeMap::new();
    for w in windows {
        per_agent
            .entry((w.scene_id.as_str(), w.ped_id))
            .or_default()
            .push(w);
    }
    let mut tracks = Vec::new();
    for (_, mut ws) in per_agent {
        ws.sort_by_key(|w| w.start_frame);
        let mut current: Vec<Position<T>> = Vec::new();
        let mut current_start = 0i64;
        for w in ws {
            let pts: Vec<Position<T>> = w.hist.iter().chain(w.fut.iter()).copied().collect();
            let end = current_start + current.len() as i64;
            if !current.is_empty() && w.start_frame <= end {
                let skip = (end - w.start_frame) as usize;
                if skip < pts.len() {
                    current.extend_from_slice(&pts[skip..]);
                }
            } else {
                if !current.is_empty() {
                    tracks.push(std::mem::take(&mut current));
                }
                current = pts;
                current_start = w.start_frame;
            }
        }
        if !current.is_empty() {
            tracks.push(current);
        }
    }
    tracks
}

/// Cuts every `t_win` sliding segment out of each track.
///
/// With [`GistFrame::PrecedingPoint`] a segment needs one extra leading
/// point, which becomes the origin and is then dropped.
pub fn build_gists<T: Scalar>(
    tracks: &[Vec<Position<T>>],
    t_win: usize,
    frame: GistFrame,
    min_rows: usize,
) -> Result<GistMatrix<T>> {
    let lead = match frame {
        GistFrame::FirstPoint => 0,
        GistFrame::PrecedingPoint => 1,
    };
    let span = t_win + lead;
    let mut data = Vec::new();
    let mut rows = 0;
    for track in tracks {
        if track.len() < span {
            continue;
        }
        for seg in track.windows(span) {
            let origin = seg[0];
            for p in &seg[lead..] {
                data.push(p[0] - origin[0]);
                data.push(p[1] - origin[1]);
            }
            rows += 1;
        }
    }
    if rows < min_rows {
        return Err(Error::Build(format!(
            "{rows} gist segments of length {t_win}, need at least {min_rows}"
        )));
    }
    let rows = Array2::from_shape_vec((rows, 2 * t_win), data).expect("gist row width");
    Ok(GistMatrix { rows, t_win, frame })
}

/// Operators for one trajectory length.
#[derive(Debug, Clone)]
pub struct LengthOps<T> {
    /// `C_T`: (2T) × (2·t_win) resampling matrix.
    pub resample: Array2<T>,
    /// Resampled basis `C_T · V_K`, (2T) × K.
    pub basis: Array2<T>,
    /// Least-squares projector, (2T) × K: `batch · projector` gives coordinates.
    pub projector: Array2<T>,
}

/// The fitted motion space.
#[derive(Debug)]
pub struct SingularSpace<T> {
    basis: Array2<T>,
    sigma: Array1<T>,
    t_win: usize,
    frame: GistFrame,
    degenerate: bool,
    cache: RwLock<HashMap<usize, Arc<LengthOps<T>>>>,
}

impl<T: Scalar> Clone for SingularSpace<T> {
    fn clone(&self) -> Self {
        Self {
            basis: self.basis.clone(),
            sigma: self.sigma.clone(),
            t_win: self.t_win,
            frame: self.frame,
            degenerate: self.degenerate,
            cache: RwLock::new(self.cache.read().expect("cache lock").clone()),
        }
    }
}

/// Truncated SVD of the gist matrix.
///
/// A rank below `k` is not an error: the basis is completed with
/// Gram–Schmidt over canonical vectors and [`SingularSpace::is_degenerate`]
/// reports it.
pub fn fit_svd<T: Scalar>(gists: &GistMatrix<T>, k: usize) -> Result<SingularSpace<T>> {
    let a = &gists.rows;
    let (l, width) = a.dim();
    if k == 0 || k > width || k > l {
        return Err(Error::Argument(format!(
            "basis size {k} not in 1..=min(L={l}, 2·t_win={width})"
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Build("gist matrix has non-finite entries".into()));
    }
    let dec = linalg::svd(a.view());
    let rank = dec.rank();
    let mut basis = leading_columns(&dec.v, rank.min(k));
    canonical_signs(&mut basis);
    let degenerate = rank < k;
    if degenerate {
        log::warn!("gist matrix has rank {rank} < K = {k}; completing the basis");
        basis = complete_orthonormal(basis.view(), k);
    }
    let sigma = Array1::from_iter((0..k).map(|i| if i < rank { dec.sigma[i] } else { T::zero() }));
    Ok(SingularSpace::from_parts(
        basis,
        sigma,
        gists.t_win,
        gists.frame,
        degenerate,
    ))
}

impl<T: Scalar> SingularSpace<T> {
    /// Builds a space from an explicit basis with orthonormal columns.
    pub fn from_parts(
        basis: Array2<T>,
        sigma: Array1<T>,
        t_win: usize,
        frame: GistFrame,
        degenerate: bool,
    ) -> Self {
        assert_eq!(basis.nrows(), 2 * t_win, "basis rows must be 2·t_win");
        assert_eq!(
            basis.ncols(),
            sigma.len(),
            "one singular value per basis vector"
        );
        Self {
            basis,
            sigma,
            t_win,
            frame,
            degenerate,
            cache: RwLock::new(HashMap::new()),
        }
    }

    /// `V_K`, (2·t_win) × K.
    pub fn basis(&self) -> &Array2<T> {
        &self.basis
    }

    pub fn sigma(&self) -> &Array1<T> {
        &self.sigma
    }

    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    pub fn t_win(&self) -> usize {
        self.t_win
    }

    pub fn frame(&self) -> GistFrame {
        self.frame
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Operators for trajectories of `len` frames, built once and cached.
    pub fn ops(&self, len: usize) -> Result<Arc<LengthOps<T>>> {
        if let Some(ops) = self.cache.read().expect("cache lock").get(&len) {
            return Ok(ops.clone());
        }
        let ops = Arc::new(self.build_ops(len)?);
        self.cache
            .write()
            .expect("cache lock")
            .insert(len, ops.clone());
        Ok(ops)
    }

    fn build_ops(&self, len: usize) -> Result<LengthOps<T>> {
        if len == self.t_win {
            return Ok(LengthOps {
                resample: Array2::eye(2 * len),
                basis: self.basis.clone(),
                projector: self.basis.clone(),
            });
        }
        let resample = bspline_matrix::<T>(len, self.t_win)?;
        let basis = resample.dot(&self.basis);
        let projector = pinv(basis.view()).reversed_axes();
        Ok(LengthOps {
            resample,
            basis,
            projector,
        })
    }

    /// Coordinates of an N × (2·len) batch of ego-frame trajectories.
    ///
    /// For `len == t_win` this is `batch · V_K`. Other lengths use the
    /// least-squares fit onto the resampled basis `C_len · V_K`.
    pub fn project(&self, batch: ArrayView2<'_, T>, len: usize) -> Result<SingularCoord<T>> {
        if batch.ncols() != 2 * len {
            return Err(Error::shape(format!(
                "batch width {} does not match length {len}",
                batch.ncols()
            )));
        }
        Ok(batch.dot(&self.ops(len)?.projector))
    }

    /// N × (2·len) trajectories from coordinates: `coords · (C_len · V_K)ᵀ`.
    pub fn reconstruct(&self, coords: ArrayView2<'_, T>, len: usize) -> Result<Array2<T>> {
        if coords.ncols() != self.k() {
            return Err(Error::shape(format!(
                "coordinate width {} does not match K = {}",
                coords.ncols(),
                self.k()
            )));
        }
        Ok(coords.dot(&self.ops(len)?.basis.t()))
    }

    /// Projects a single path given as positions.
    pub fn project_path(&self, points: &[Position<T>]) -> Result<Array1<T>> {
        let flat = flatten(points);
        let len = points.len();
        let row = flat.into_shape_with_order((1, 2 * len)).expect("flat path");
        Ok(self.project(row.view(), len)?.row(0).to_owned())
    }

    pub fn reconstruct_path(&self, coords: &[T], len: usize) -> Result<Vec<Position<T>>> {
        let row = ArrayView2::from_shape((1, coords.len()), coords)
            .map_err(|e| Error::shape(e.to_string()))?;
        let out = self.reconstruct(row, len)?;
        Ok(unflatten(out.as_slice().expect("contiguous")))
    }

    /// Ego-frame history and future coordinates of a window.
    pub fn project_window(&self, w: &TrajectoryWindow<T>) -> Result<(Array1<T>, Array1<T>)> {
        let origin = w.last_observed();
        let x = self.project_path(&to_ego(&w.hist, origin))?;
        let y = self.project_path(&to_ego(&w.fut, origin))?;
        Ok((x, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array};

    fn line(n: usize, step: [f64; 2]) -> Vec<Position<f64>> {
        (0..n)
            .map(|i| [i as f64 * step[0], i as f64 * step[1]])
            .collect()
    }

    #[test]
    fn gist_shape() {
        let tracks = vec![
            line(12, [1.0, 0.0]),
            line(12, [0.0, 1.0]),
            line(12, [1.0, 1.0]),
        ];
        let g = build_gists(&tracks, 12, GistFrame::FirstPoint, 1).unwrap();
        assert_eq!(g.rows.dim(), (3, 24));
    }

    #[test]
    fn stationary_agent_gives_zero_row() {
        let tracks = vec![vec![[3.0, -2.0]; 13]];
        for frame in [GistFrame::FirstPoint, GistFrame::PrecedingPoint] {
            let g = build_gists(&tracks, 12, frame, 1).unwrap();
            assert!(g.rows.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn too_few_segments() {
        let tracks = vec![line(12, [1.0, 0.0]), line(12, [0.0, 1.0])];
        let err = build_gists(&tracks, 12, GistFrame::FirstPoint, 4).unwrap_err();
        assert!(matches!(err, Error::Build(_)));
    }

    #[test]
    fn preceding_point_gists_start_one_step_out() {
        let tracks = vec![line(13, [0.5, 0.0])];
        let g = build_gists(&tracks, 12, GistFrame::PrecedingPoint, 1).unwrap();
        assert_eq!(g.rows[[0, 0]], 0.5);
        assert_eq!(g.rows[[0, 22]], 6.0);
    }

    #[test]
    fn rank_one_matrix() {
        let v = Array::linspace(1.0, 24.0, 24);
        let mut rows = Array2::<f64>::zeros((5, 24));
        for mut r in rows.rows_mut() {
            r.assign(&v);
        }
        let g = GistMatrix {
            rows,
            t_win: 12,
            frame: GistFrame::FirstPoint,
        };
        let space = fit_svd(&g, 4).unwrap();
        let norm = v.dot(&v).sqrt();
        assert!((space.sigma()[0] - norm * 5f64.sqrt()).abs() < 1e-9);
        assert!(space.sigma().iter().skip(1).all(|&s| s == 0.0));
        let first = space.basis().column(0);
        let cos = first.dot(&v) / norm;
        assert!((cos.abs() - 1.0).abs() < 1e-12);
        assert!(space.is_degenerate());
        assert!(linalg::orthonormality_error(space.basis().view()) < 1e-12);
    }

    #[test]
    fn scaled_basis_vector_projects_to_axis() {
        let rows = Array2::from_shape_fn((30, 24), |(i, j)| {
            ((i * 7 + j * 3) % 11) as f64 - 5.0 + (i as f64) * 0.01 * j as f64
        });
        let g = GistMatrix {
            rows,
            t_win: 12,
            frame: GistFrame::FirstPoint,
        };
        let space = fit_svd(&g, 4).unwrap();
        let traj = space
            .basis()
            .column(0)
            .mapv(|x| 3.0 * x)
            .insert_axis(ndarray::Axis(0));
        let c = space.project(traj.view(), 12).unwrap();
        assert!((c[[0, 0]] - 3.0).abs() < 1e-12);
        for k in 1..4 {
            assert!(c[[0, k]].abs() < 1e-12);
        }
        let zero = Array2::<f64>::zeros((2, 24));
        assert!(space
            .project(zero.view(), 12)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let e2 = array![[0.0, 1.0, 0.0, 0.0]];
        let recon = space.reconstruct(e2.view(), 12).unwrap();
        for j in 0..24 {
            assert_eq!(recon[[0, j]], space.basis()[[j, 1]]);
        }
    }

    #[test]
    fn shape_errors() {
        let g = GistMatrix {
            rows: Array2::from_shape_fn((10, 24), |(i, j)| (i + 2 * j) as f64 % 5.0),
            t_win: 12,
            frame: GistFrame::FirstPoint,
        };
        let space = fit_svd(&g, 2).unwrap();
        let bad = Array2::<f64>::zeros((1, 10));
        assert!(matches!(space.project(bad.view(), 8), Err(Error::Shape(_))));
        assert!(matches!(
            space.reconstruct(bad.view(), 8),
            Err(Error::Shape(_))
        ));
        assert!(matches!(fit_svd(&g, 30), Err(Error::Argument(_))));
    }

    #[test]
    fn stitches_windows_back_into_tracks() {
        let pts = line(25, [1.0, 0.0]);
        let windows: Vec<_> = (0..6)
            .map(|s| TrajectoryWindow {
                scene_id: "s".into(),
                ped_id: 1,
                start_frame: s,
                hist: pts[s as usize..s as usize + 8].to_vec(),
                fut: pts[s as usize + 8..s as usize + 20].to_vec(),
                neighbors: vec![],
            })
            .collect();
        let tracks = tracks_from_windows(&windows);
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0], pts);
    }
}
