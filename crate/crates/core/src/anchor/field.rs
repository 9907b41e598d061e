use ndarray::Array2;

use super::TraversabilityMap;
use crate::dataset::Position;
use crate::{Error, Result, Scalar};

/// Displacement from every cell to its nearest traversable cell, in world
/// meters. Zero on traversable cells.
#[derive(Debug, Clone)]
pub struct VectorField<T> {
    pub fx: Array2<T>,
    pub fy: Array2<T>,
    /// `(row, col)` of the nearest traversable cell.
    pub nearest: Array2<(usize, usize)>,
    map: TraversabilityMap<T>,
}

/// Exact nearest-traversable feature transform.
///
/// Distances are Euclidean in pixel units; ties go to the smallest
/// `(row, col)`. A column pass finds the closest traversable row in each
/// column, then each cell scans all columns.
pub fn build_vector_field<T: Scalar>(map: &TraversabilityMap<T>) -> Result<VectorField<T>> {
    let grid = map.grid();
    let (h, w) = grid.dim();
    if !grid.iter().any(|&t| t) {
        return Err(Error::Map("no traversable cell".into()));
    }

    // per column: closest traversable row, preferring the upper one on ties
    let mut col_nearest: Array2<Option<usize>> = Array2::from_elem((h, w), None);
    for c in 0..w {
        let mut above: Option<usize> = None;
        for r in 0..h {
            if grid[[r, c]] {
                above = Some(r);
            }
            col_nearest[[r, c]] = above;
        }
        let mut below: Option<usize> = None;
        for r in (0..h).rev() {
            if grid[[r, c]] {
                below = Some(r);
            }
            col_nearest[[r, c]] = match (col_nearest[[r, c]], below) {
                (Some(a), Some(b)) => Some(if r - a <= b - r { a } else { b }),
                (a, b) => a.or(b),
            };
        }
    }

    let mut nearest = Array2::from_elem((h, w), (0usize, 0usize));
    for r in 0..h {
        for c in 0..w {
            if grid[[r, c]] {
                nearest[[r, c]] = (r, c);
                continue;
            }
            let mut best: Option<(usize, usize, usize)> = None;
            for c2 in 0..w {
                let Some(r2) = col_nearest[[r, c2]] else {
                    continue;
                };
                let d = r.abs_diff(r2).pow(2) + c.abs_diff(c2).pow(2);
                let cand = (d, r2, c2);
                if best.is_none_or(|b| cand < b) {
                    best = Some(cand);
                }
            }
            let (_, r2, c2) = best.expect("at least one traversable cell");
            nearest[[r, c]] = (r2, c2);
        }
    }

    let mut fx = Array2::<T>::zeros((h, w));
    let mut fy = Array2::<T>::zeros((h, w));
    for ((r, c), &(r2, c2)) in nearest.indexed_iter() {
        if (r, c) == (r2, c2) {
            continue;
        }
        let from = map.cell_world(r, c);
        let to = map.cell_world(r2, c2);
        fx[[r, c]] = to[0] - from[0];
        fy[[r, c]] = to[1] - from[1];
    }
    Ok(VectorField {
        fx,
        fy,
        nearest,
        map: map.clone(),
    })
}

impl<T: Scalar> VectorField<T> {
    pub fn map(&self) -> &TraversabilityMap<T> {
        &self.map
    }

    pub fn at_cell(&self, row: usize, col: usize) -> [T; 2] {
        [self.fx[[row, col]], self.fy[[row, col]]]
    }

    /// Bilinear field value at a world point. Points outside the grid are
    /// clamped onto it and the returned vector leads from the original
    /// point to where the clamped sample points.
    pub fn sample(&self, p: Position<T>) -> [T; 2] {
        let (h, w) = self.fx.dim();
        let [u, v] = self.map.to_pixel(p);
        let max_u = T::of((w - 1) as f64);
        let max_v = T::of((h - 1) as f64);
        let cu = u.max(T::zero()).min(max_u);
        let cv = v.max(T::zero()).min(max_v);
        let inside = cu == u && cv == v;

        let c0 = cu.floor().to_usize().unwrap_or(0).min(w - 1);
        let r0 = cv.floor().to_usize().unwrap_or(0).min(h - 1);
        let c1 = (c0 + 1).min(w - 1);
        let r1 = (r0 + 1).min(h - 1);
        let a = cu - T::of(c0 as f64);
        let b = cv - T::of(r0 as f64);
        let one = T::one();
        let lerp = |f: &Array2<T>| {
            (one - b) * ((one - a) * f[[r0, c0]] + a * f[[r0, c1]])
                + b * ((one - a) * f[[r1, c0]] + a * f[[r1, c1]])
        };
        let field = [lerp(&self.fx), lerp(&self.fy)];
        if inside {
            return field;
        }
        let anchor = self.map.to_world([cu, cv]);
        [anchor[0] + field[0] - p[0], anchor[1] + field[1] - p[1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn unit_map(grid: Array2<bool>) -> TraversabilityMap<f64> {
        TraversabilityMap::new(grid, TraversabilityMap::identity_homography()).unwrap()
    }

    #[test]
    fn all_traversable_is_zero() {
        let f = build_vector_field(&unit_map(Array2::from_elem((4, 5), true))).unwrap();
        assert!(f.fx.iter().chain(f.fy.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn three_cell_strip() {
        let f = build_vector_field(&unit_map(array![[false, true, false]])).unwrap();
        assert_eq!(f.at_cell(0, 0), [1.0, 0.0]);
        assert_eq!(f.at_cell(0, 1), [0.0, 0.0]);
        assert_eq!(f.at_cell(0, 2), [-1.0, 0.0]);
    }

    #[test]
    fn ties_prefer_smaller_row_then_column() {
        // centre cell equidistant from all four edge midpoints
        let grid = array![
            [false, true, false],
            [true, false, true],
            [false, true, false],
        ];
        let f = build_vector_field(&unit_map(grid)).unwrap();
        assert_eq!(f.nearest[[1, 1]], (0, 1));
        // corner (0,0): (0,1) and (1,0) tie at distance 1 → row 0 wins
        assert_eq!(f.nearest[[0, 0]], (0, 1));
    }

    #[test]
    fn meters_follow_homography() {
        let h = TraversabilityMap::<f64>::scaled_homography(0.5, [0.0, 0.0]);
        let map = TraversabilityMap::new(array![[false, false, true]], h).unwrap();
        let f = build_vector_field(&map).unwrap();
        assert_eq!(f.at_cell(0, 0), [1.0, 0.0]);
    }

    #[test]
    fn bilinear_and_out_of_bounds() {
        let f = build_vector_field(&unit_map(array![[false, true, false]])).unwrap();
        let mid = f.sample([0.5, 0.0]);
        assert!((mid[0] - 0.5).abs() < 1e-12);
        // left of the grid: clamp to cell 0, which points at cell 1
        let out = f.sample([-2.0, 0.0]);
        assert!((out[0] - 3.0).abs() < 1e-12 && out[1].abs() < 1e-12);
    }

    #[test]
    fn blocked_map_rejected_at_construction() {
        let h = TraversabilityMap::<f64>::identity_homography();
        assert!(TraversabilityMap::new(array![[false]], h).is_err());
    }
}
