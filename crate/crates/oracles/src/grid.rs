//! Exhaustive nearest-walkable-cell search.

use ndarray::Array2;

/// For each cell, the walkable cell at least squared pixel distance,
/// first in row-major order among ties.
pub fn brute_nearest(grid: &Array2<bool>) -> Array2<(usize, usize)> {
    let (h, w) = grid.dim();
    let mut out = Array2::from_elem((h, w), (0, 0));
    for r in 0..h {
        for c in 0..w {
            let mut best: Option<(usize, (usize, usize))> = None;
            for r2 in 0..h {
                for c2 in 0..w {
                    if !grid[[r2, c2]] {
                        continue;
                    }
                    let dr = r as i64 - r2 as i64;
                    let dc = c as i64 - c2 as i64;
                    let d = (dr * dr + dc * dc) as usize;
                    if best.map(|b| d < b.0).unwrap_or(true) {
                        best = Some((d, (r2, c2)));
                    }
                }
            }
            out[[r, c]] = best.expect("grid has a walkable cell").1;
        }
    }
    out
}
