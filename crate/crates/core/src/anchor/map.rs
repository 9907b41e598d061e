use std::path::Path;

use ndarray::Array2;

use crate::dataset::Position;
use crate::{Error, Result, Scalar};

/// Row-major 3×3 homography.
pub type Homography<T> = [[T; 3]; 3];

/// Binary walkable-area grid with its world↔pixel transform.
///
/// Pixel coordinates are `(u, v) = (column, row)`; cell `(r, c)` has its
/// centre at `u = c, v = r`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraversabilityMap<T> {
    grid: Array2<bool>,
    world_to_pixel: Homography<T>,
    pixel_to_world: Homography<T>,
    pixel_scale: T,
}

impl<T: Scalar> TraversabilityMap<T> {
    pub fn new(grid: Array2<bool>, world_to_pixel: Homography<T>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::Map("empty grid".into()));
        }
        if !grid.iter().any(|&t| t) {
            return Err(Error::Map("no traversable cell".into()));
        }
        let pixel_to_world = invert3(&world_to_pixel)
            .ok_or_else(|| Error::Map("world-to-pixel homography is singular".into()))?;
        let pixel_scale = local_scale(&pixel_to_world);
        Ok(Self {
            grid,
            world_to_pixel,
            pixel_to_world,
            pixel_scale,
        })
    }

    /// Map from a flat row-major homography as stored in a scene registry.
    pub fn with_flat_homography(grid: Array2<bool>, h: &[f64; 9]) -> Result<Self> {
        let m = [
            [T::of(h[0]), T::of(h[1]), T::of(h[2])],
            [T::of(h[3]), T::of(h[4]), T::of(h[5])],
            [T::of(h[6]), T::of(h[7]), T::of(h[8])],
        ];
        Self::new(grid, m)
    }

    pub fn identity_homography() -> Homography<T> {
        let (o, z) = (T::one(), T::zero());
        [[o, z, z], [z, o, z], [z, z, o]]
    }

    /// Homography for a map with `meters_per_pixel` resolution whose pixel
    /// (0, 0) sits at world `origin`, x along columns, y along rows.
    pub fn scaled_homography(meters_per_pixel: T, origin: Position<T>) -> Homography<T> {
        let s = T::one() / meters_per_pixel;
        let z = T::zero();
        [
            [s, z, -origin[0] * s],
            [z, s, -origin[1] * s],
            [z, z, T::one()],
        ]
    }

    pub fn grid(&self) -> &Array2<bool> {
        &self.grid
    }

    pub fn height(&self) -> usize {
        self.grid.nrows()
    }

    pub fn width(&self) -> usize {
        self.grid.ncols()
    }

    pub fn world_to_pixel(&self) -> &Homography<T> {
        &self.world_to_pixel
    }

    /// Meters per pixel near the pixel origin.
    pub fn pixel_scale(&self) -> T {
        self.pixel_scale
    }

    /// World → `(u, v)` pixel coordinates.
    pub fn to_pixel(&self, p: Position<T>) -> [T; 2] {
        apply(&self.world_to_pixel, p)
    }

    /// `(u, v)` pixel coordinates → world.
    pub fn to_world(&self, uv: [T; 2]) -> Position<T> {
        apply(&self.pixel_to_world, uv)
    }

    pub fn cell_world(&self, row: usize, col: usize) -> Position<T> {
        self.to_world([T::of(col as f64), T::of(row as f64)])
    }

    /// Nearest cell to a world point, if inside the grid.
    pub fn cell_of(&self, p: Position<T>) -> Option<(usize, usize)> {
        let [u, v] = self.to_pixel(p);
        let (c, r) = (u.round(), v.round());
        if !c.is_finite() || !r.is_finite() || c < T::zero() || r < T::zero() {
            return None;
        }
        let (c, r) = (c.to_usize()?, r.to_usize()?);
        (r < self.height() && c < self.width()).then_some((r, c))
    }

    /// Whether the nearest cell is walkable; out of bounds counts as blocked.
    pub fn is_traversable(&self, p: Position<T>) -> bool {
        self.cell_of(p).map(|rc| self.grid[rc]).unwrap_or(false)
    }

    /// Same map seen from a world frame shifted by `offset`.
    pub fn translated(&self, offset: Position<T>) -> Self {
        let h = &self.world_to_pixel;
        let (dx, dy) = (offset[0], offset[1]);
        // H' · (x', y', 1) = H · (x' - dx, y' - dy, 1)
        let mut out = *h;
        for row in out.iter_mut() {
            row[2] = row[2] - row[0] * dx - row[1] * dy;
        }
        Self::new(self.grid.clone(), out).expect("translation keeps the map valid")
    }

    /// Loads a PGM (P2/P5, bright = walkable) or plain-text 0/1 grid.
    pub fn load_grid(path: impl AsRef<Path>) -> Result<Array2<bool>> {
        let bytes = std::fs::read(path.as_ref())?;
        if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
            parse_pgm(&bytes)
        } else {
            parse_text_grid(&String::from_utf8_lossy(&bytes))
        }
    }
}

fn apply<T: Scalar>(h: &Homography<T>, p: [T; 2]) -> [T; 2] {
    let x = h[0][0] * p[0] + h[0][1] * p[1] + h[0][2];
    let y = h[1][0] * p[0] + h[1][1] * p[1] + h[1][2];
    let w = h[2][0] * p[0] + h[2][1] * p[1] + h[2][2];
    [x / w, y / w]
}

fn invert3<T: Scalar>(m: &Homography<T>) -> Option<Homography<T>> {
    let c =
        |r0: usize, c0: usize, r1: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let det = m[0][0] * c(1, 1, 2, 2) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() <= T::epsilon() || !det.is_finite() {
        return None;
    }
    let inv = [
        [
            c(1, 1, 2, 2),
            m[0][2] * m[2][1] - m[0][1] * m[2][2],
            c(0, 1, 1, 2),
        ],
        [
            m[1][2] * m[2][0] - m[1][0] * m[2][2],
            c(0, 0, 2, 2),
            m[0][2] * m[1][0] - m[0][0] * m[1][2],
        ],
        [
            c(1, 0, 2, 1),
            m[0][1] * m[2][0] - m[0][0] * m[2][1],
            c(0, 0, 1, 1),
        ],
    ];
    Some(inv.map(|row| row.map(|v| v / det)))
}

fn local_scale<T: Scalar>(pixel_to_world: &Homography<T>) -> T {
    let o = apply(pixel_to_world, [T::zero(), T::zero()]);
    let du = apply(pixel_to_world, [T::one(), T::zero()]);
    let dv = apply(pixel_to_world, [T::zero(), T::one()]);
    let (ax, ay) = (du[0] - o[0], du[1] - o[1]);
    let (bx, by) = (dv[0] - o[0], dv[1] - o[1]);
    (ax * by - ay * bx).abs().sqrt()
}

fn parse_pgm(bytes: &[u8]) -> Result<Array2<bool>> {
    let binary = bytes.starts_with(b"P5");
    // header tokens: magic, width, height, maxval (comments start with '#')
    let mut tokens = Vec::new();
    let mut i = 2;
    while tokens.len() < 3 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(Error::Map("truncated PGM header".into()));
        }
        let tok = std::str::from_utf8(&bytes[start..i])
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::Map("bad PGM header value".into()))?;
        tokens.push(tok);
    }
    let (w, h, maxval) = (tokens[0], tokens[1], tokens[2]);
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Map(format!("bad PGM maxval {maxval}")));
    }
    let values: Vec<usize> = if binary {
        i += 1; // single whitespace after maxval
        let wide = maxval > 255;
        let need = w * h * if wide { 2 } else { 1 };
        let data = bytes
            .get(i..i + need)
            .ok_or_else(|| Error::Map("truncated PGM raster".into()))?;
        if wide {
            data.chunks_exact(2)
                .map(|c| ((c[0] as usize) << 8) | c[1] as usize)
                .collect()
        } else {
            data.iter().map(|&b| b as usize).collect()
        }
    } else {
        std::str::from_utf8(&bytes[i..])
            .map_err(|_| Error::Map("PGM raster is not text".into()))?
            .split_whitespace()
            .take(w * h)
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| Error::Map(format!("bad PGM value {s:?}")))
            })
            .collect::<Result<_>>()?
    };
    if values.len() != w * h {
        return Err(Error::Map("truncated PGM raster".into()));
    }
    Array2::from_shape_vec((h, w), values.into_iter().map(|v| 2 * v > maxval).collect())
        .map_err(|e| Error::Map(e.to_string()))
}

fn parse_text_grid(text: &str) -> Result<Array2<bool>> {
    let mut rows: Vec<Vec<bool>> = Vec::new();
    for line in text.lines() {
        let cells: Vec<bool> = line
            .chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                other => Err(Error::Map(format!("unexpected grid character {other:?}"))),
            })
            .collect::<Result<_>>()?;
        if !cells.is_empty() {
            rows.push(cells);
        }
    }
    let width = rows.first().map(Vec::len).unwrap_or(0);
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Map("ragged text grid".into()));
    }
    let h = rows.len();
    Array2::from_shape_vec((h, width), rows.into_iter().flatten().collect())
        .map_err(|e| Error::Map(e.to_string()))
}
