//! Uniform tensor grids on `[-L, L)^N` and real fields sampled on them.
//!
//! Samples are stored row-major: for `N = 2` the flat index of `(i0, i1)` is
//! `i0 * n + i1`, with axis 0 varying slowest. Grid point `j` along an axis
//! sits at `x_j = -L + j h`, so the origin is index `n / 2`.

use crate::error::{FklError, Result};

/// A uniform periodic grid on `[-L, L)^N`.
///
/// The spacing `h = 2L/n` is always derived from `L` and `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    n: usize,
}

/// Builds a grid, validating dimension, box size and resolution.
pub fn make_grid(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Grid> {
    Grid::new(dim, half_width, points_per_axis)
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(FklError::UnsupportedDimension(dim));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(FklError::InvalidGrid(format!(
                "half width must be positive and finite, got {half_width}"
            )));
        }
        if points_per_axis < 16 || !points_per_axis.is_power_of_two() {
            return Err(FklError::InvalidGrid(format!(
                "points per axis must be a power of two >= 16, got {points_per_axis}"
            )));
        }
        Ok(Self {
            dim,
            half_width,
            n: points_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn total_points(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Quadrature weight `h^N` of a single cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of grid index `j` along any axis.
    pub fn coord(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    /// The 1-D coordinate vector shared by every axis.
    pub fn axis(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.coord(j)).collect()
    }

    /// Multi-index of a flat sample index (second entry is 0 when `N = 1`).
    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        if self.dim == 1 {
            [flat, 0]
        } else {
            [flat / self.n, flat % self.n]
        }
    }

    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        if self.dim == 1 {
            idx[0]
        } else {
            idx[0] * self.n + idx[1]
        }
    }

    /// Physical position of a flat sample index (second entry 0 when `N = 1`).
    pub fn point(&self, flat: usize) -> [f64; 2] {
        let [i0, i1] = self.multi_index(flat);
        if self.dim == 1 {
            [self.coord(i0), 0.0]
        } else {
            [self.coord(i0), self.coord(i1)]
        }
    }

    /// Euclidean distance of a sample from the origin.
    pub fn radius(&self, flat: usize) -> f64 {
        let [x, y] = self.point(flat);
        x.hypot(y)
    }

    /// Flat index of the grid origin `x = 0`.
    pub fn origin_index(&self) -> usize {
        self.flat_index([self.n / 2, self.n / 2])
    }

    /// Index of the mirror image `-x_j` of index `j` along one axis
    /// (periodic: the edge point `-L` is its own mirror).
    pub fn mirror(&self, j: usize) -> usize {
        (self.n - j) % self.n
    }

    /// The same number of points on a box scaled by `factor`.
    pub fn dilated(&self, factor: f64) -> Result<Grid> {
        Grid::new(self.dim, self.half_width * factor, self.n)
    }

    /// Same box, `n` doubled.
    pub fn refined(&self) -> Result<Grid> {
        Grid::new(self.dim, self.half_width, self.n * 2)
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.dim == other.dim && self.n == other.n && self.half_width == other.half_width
    }

    pub(crate) fn check_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(FklError::GridMismatch(format!(
                "{what}: (dim={}, n={}, L={}) vs (dim={}, n={}, L={})",
                self.dim, self.n, self.half_width, other.dim, other.n, other.half_width
            )))
        }
    }
}

/// Real samples on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    data: Vec<f64>,
}

impl Field {
    /// Wraps samples, checking length and finiteness.
    pub fn new(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.total_points() {
            return Err(FklError::LengthMismatch {
                expected: grid.total_points(),
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(FklError::NonFinite("field samples".into()));
        }
        Ok(Self { grid, data })
    }

    /// Internal constructor for data known to have the right length.
    pub(crate) fn from_vec(grid: Grid, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.total_points());
        Self { grid, data }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::from_vec(grid, vec![0.0; grid.total_points()])
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self::from_vec(grid, vec![value; grid.total_points()])
    }

    /// Samples `f(x)` at every grid point; `x[1]` is 0 when `N = 1`.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let data = (0..grid.total_points()).map(|i| f(grid.point(i))).collect();
        Self::from_vec(grid, data)
    }

    /// Samples a radial profile `f(|x|)`.
    pub fn from_radial(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |[x, y]| f(x.hypot(y)))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec(self.grid, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.grid.check_same(&other.grid, "zip_with")?;
        Ok(Field::from_vec(
            self.grid,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        self.map(|v| alpha * v)
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + alpha * b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Rectangle-rule integral `h^N Σ f`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.data.iter().sum::<f64>()
    }

    /// `∫ f g` by the rectangle rule.
    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid, "dot")?;
        Ok(self.grid.cell_volume() * dot(&self.data, &other.data))
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_volume() * dot(&self.data, &self.data)).sqrt()
    }

    /// `(∫|f|^q)^{1/q}` for finite `q ≥ 1`.
    pub fn lq_norm(&self, q: f64) -> f64 {
        let sum: f64 = self.data.iter().map(|v| v.abs().powf(q)).sum();
        (self.grid.cell_volume() * sum).powf(1.0 / q)
    }

    pub fn linf_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.data.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Mirror image `x_axis ↦ -x_axis`.
    pub fn reflected(&self, axis: usize) -> Field {
        let g = self.grid;
        let mut out = vec![0.0; self.data.len()];
        for (flat, o) in out.iter_mut().enumerate() {
            let mut idx = g.multi_index(flat);
            idx[axis] = g.mirror(idx[axis]);
            *o = self.data[g.flat_index(idx)];
        }
        Field::from_vec(g, out)
    }

    /// Average over the reflections `x_i ↦ -x_i` of every axis: the
    /// projection onto fields even in each coordinate.
    pub fn even_part(&self) -> Field {
        let mut out = self.clone();
        for axis in 0..self.grid.dim() {
            let r = out.reflected(axis);
            for (a, b) in out.data.iter_mut().zip(&r.data) {
                *a = 0.5 * (*a + b);
            }
        }
        out
    }

    /// Average over the full symmetry group of the square grid (reflections
    /// and, for `N = 2`, the axis exchange). Radial functions are fixed.
    pub fn symmetric_part(&self) -> Field {
        let mut out = self.even_part();
        if self.grid.dim() == 2 {
            let t = out.transposed();
            for (a, b) in out.data.iter_mut().zip(&t.data) {
                *a = 0.5 * (*a + b);
            }
        }
        out
    }

    /// `max(f, 0)^p` sample-wise.
    pub fn positive_power(&self, p: f64) -> Field {
        self.map(|v| if v > 0.0 { v.powf(p) } else { 0.0 })
    }

    /// Exchange of the two axes (`N = 2` only; identity for `N = 1`).
    pub fn transposed(&self) -> Field {
        let g = self.grid;
        if g.dim() == 1 {
            return self.clone();
        }
        let n = g.points_per_axis();
        let mut out = vec![0.0; self.data.len()];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.data[j * n + i];
            }
        }
        Field::from_vec(g, out)
    }
}

/// Rectangle-rule integral of a field.
pub fn integrate(f: &Field) -> f64 {
    f.integral()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
