//! Single-channel rasters and the resampling kernels shared by attention maps,
//! gaze density maps and label maps.

use std::io::Write;

use serde::{Deserialize, Serialize};

/// Side of the common comparison raster.
pub const MAP_SIZE: usize = 224;

/// Row-major real-valued raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "grid {rows}x{cols} needs {} values", rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// (row, col) of the first maximum.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        (best / self.cols, best % self.cols)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid::new(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Min-max normalization to [0, 1]; a constant grid maps to all zeros.
    pub fn min_max_normalized(&self) -> Grid {
        let (lo, hi) = (self.min(), self.max());
        let span = hi - lo;
        if !(span > 0.0) {
            return Grid::zeros(self.rows, self.cols);
        }
        self.map(|v| (v - lo) / span)
    }

    pub fn resize_bilinear(&self, rows: usize, cols: usize) -> Grid {
        resize_bilinear(self, rows, cols)
    }

    /// 8-bit binary PGM (P5) of the grid scaled by its maximum.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let hi = self.max();
        write!(out, "P5\n{} {}\n255\n", self.cols, self.rows)?;
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|&v| {
                if hi > 0.0 {
                    ((v / hi).clamp(0.0, 1.0) * 255.0).round() as u8
                } else {
                    0
                }
            })
            .collect();
        out.write_all(&bytes)
    }
}

fn sample_coord(dst: usize, scale: f64, n: usize) -> (usize, usize, f64) {
    let src = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (n - 1) as f64);
    let i0 = src.floor() as usize;
    let i1 = (i0 + 1).min(n - 1);
    (i0, i1, src - i0 as f64)
}

/// Bilinear resampling with half-pixel centers and edge clamping.
pub fn resize_bilinear(src: &Grid, rows: usize, cols: usize) -> Grid {
    if src.dims() == (rows, cols) {
        return src.clone();
    }
    let sy = src.rows as f64 / rows as f64;
    let sx = src.cols as f64 / cols as f64;
    let xs: Vec<_> = (0..cols).map(|c| sample_coord(c, sx, src.cols)).collect();
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (y0, y1, ty) = sample_coord(r, sy, src.rows);
        for &(x0, x1, tx) in &xs {
            let top = src.get(y0, x0) * (1.0 - tx) + src.get(y0, x1) * tx;
            let bottom = src.get(y1, x0) * (1.0 - tx) + src.get(y1, x1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    Grid::new(rows, cols, out)
}

/// One 1-D expand step: zero-insertion upsampling by 2 followed by the
/// binomial kernel [1, 4, 6, 4, 1] / 16 (gain 2), edges replicated.
fn expand_1d(src: &[f64], dst: &mut [f64]) {
    let n = src.len();
    let at = |j: isize| src[j.clamp(0, n as isize - 1) as usize];
    for m in 0..n {
        let j = m as isize;
        dst[2 * m] = (at(j - 1) + 6.0 * at(j) + at(j + 1)) / 8.0;
        dst[2 * m + 1] = (at(j) + at(j + 1)) / 2.0;
    }
}

fn expand_once(src: &Grid) -> Grid {
    let (rows, cols) = src.dims();
    let mut wide = Grid::zeros(rows, cols * 2);
    for r in 0..rows {
        let s = &src.data[r * cols..(r + 1) * cols];
        expand_1d(s, &mut wide.data[r * cols * 2..(r + 1) * cols * 2]);
    }
    let mut out = Grid::zeros(rows * 2, cols * 2);
    let mut column = vec![0.0; rows];
    let mut expanded = vec![0.0; rows * 2];
    for c in 0..cols * 2 {
        for r in 0..rows {
            column[r] = wide.get(r, c);
        }
        expand_1d(&column, &mut expanded);
        for (r, &v) in expanded.iter().enumerate() {
            out.set(r, c, v);
        }
    }
    out
}

/// Gaussian-pyramid expansion: 2x steps until both sides reach the target,
/// then a bilinear resize to exactly `rows x cols`.
pub fn pyramid_expand(src: &Grid, rows: usize, cols: usize) -> Grid {
    let mut g = src.clone();
    while g.rows < rows || g.cols < cols {
        g = expand_once(&g);
    }
    resize_bilinear(&g, rows, cols)
}

/// Normalized 1-D Gaussian kernel truncated at radius ceil(3 sigma).
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if !(sigma > 0.0) {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Per-pixel panoptic label ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    rows: usize,
    cols: usize,
    data: Vec<u16>,
}

impl LabelGrid {
    pub fn new(rows: usize, cols: usize, data: Vec<u16>) -> Self {
        assert_eq!(rows * cols, data.len());
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> u16) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[u16] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> u16 {
        self.data[r * self.cols + c]
    }

    /// Nearest-neighbour resampling (pixel centers), preserving label identities.
    pub fn resize_nearest(&self, rows: usize, cols: usize) -> LabelGrid {
        if self.dims() == (rows, cols) {
            return self.clone();
        }
        let pick = |dst: usize, n_dst: usize, n_src: usize| {
            (((dst as f64 + 0.5) * n_src as f64 / n_dst as f64).floor() as usize).min(n_src - 1)
        };
        LabelGrid::from_fn(rows, cols, |r, c| {
            self.get(pick(r, rows, self.rows), pick(c, cols, self.cols))
        })
    }
}
