//! Truncated rectangular domain and the space-time storage used everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform tensor grid on `[s_min, s_max] x [y_min, y_max] x [0, t_end]`.
///
/// `ns` and `ny` count interior points; every axis carries one boundary node
/// at each end, so a spatial slice holds `(ns + 2) * (ny + 2)` values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub s_min: f64,
    pub s_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub ns: usize,
    pub ny: usize,
    pub t_end: f64,
    pub nt: usize,
    /// Hölder exponent used by the norm diagnostics, in (0, 1).
    pub holder: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidGrid(m.to_string()));
        if !(self.s_max > self.s_min) || !(self.y_max > self.y_min) {
            return bad("empty spatial domain");
        }
        if self.ns < 8 || self.ny < 8 {
            return bad("NS and Ny must be at least 8");
        }
        if !(self.t_end > 0.0) || self.nt == 0 {
            return bad("horizon and step count must be positive");
        }
        if !(self.holder > 0.0 && self.holder < 1.0) {
            return bad("Hölder exponent must lie in (0, 1)");
        }
        Ok(())
    }

    /// Checks that `(s0, y0)` sits strictly inside the open domain.
    pub fn check_interior(&self, s0: f64, y0: f64) -> Result<()> {
        if s0 > self.s_min && s0 < self.s_max && y0 > self.y_min && y0 < self.y_max {
            Ok(())
        } else {
            Err(Error::InvalidGrid(format!(
                "initial point ({s0}, {y0}) is not interior"
            )))
        }
    }

    pub fn n_s(&self) -> usize {
        self.ns + 2
    }

    pub fn n_y(&self) -> usize {
        self.ny + 2
    }

    pub fn n_t(&self) -> usize {
        self.nt + 1
    }

    pub fn slice_len(&self) -> usize {
        self.n_s() * self.n_y()
    }

    pub fn ds(&self) -> f64 {
        (self.s_max - self.s_min) / (self.ns + 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny + 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.nt as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        if i == self.ns + 1 {
            self.s_max
        } else {
            self.s_min + i as f64 * self.ds()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny + 1 {
            self.y_max
        } else {
            self.y_min + j as f64 * self.dy()
        }
    }

    pub fn t(&self, k: usize) -> f64 {
        if k == self.nt {
            self.t_end
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn s_nodes(&self) -> Vec<f64> {
        (0..self.n_s()).map(|i| self.s(i)).collect()
    }

    pub fn y_nodes(&self) -> Vec<f64> {
        (0..self.n_y()).map(|j| self.y(j)).collect()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_y() + j
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.ns + 1 || j == self.ny + 1
    }

    /// Same space grid, horizon cut to `steps` steps of the current size.
    pub fn with_steps(&self, steps: usize) -> GridSpec {
        GridSpec {
            t_end: self.dt() * steps as f64,
            nt: steps,
            ..*self
        }
    }

    /// Composite trapezoid weights along y (length `n_y`).
    pub fn y_weights(&self) -> Vec<f64> {
        trapezoid_weights(self.n_y(), self.dy())
    }

    /// Composite trapezoid weights along S (length `n_s`).
    pub fn s_weights(&self) -> Vec<f64> {
        trapezoid_weights(self.n_s(), self.ds())
    }

    /// Trapezoid integral of a spatial slice over the whole rectangle.
    pub fn mass(&self, slice: &[f64]) -> f64 {
        let ws = self.s_weights();
        let wy = self.y_weights();
        let mut total = 0.0;
        for (i, wi) in ws.iter().enumerate() {
            let row = &slice[i * self.n_y()..(i + 1) * self.n_y()];
            let inner: f64 = row.iter().zip(&wy).map(|(p, w)| p * w).sum();
            total += wi * inner;
        }
        total
    }
}

pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 0 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    w
}

/// Row-major `[t][x][y]` array with physical spacings.
///
/// The same type stores densities `p(t, S, y)`, `(t, S)` surfaces (`ny = 1`)
/// and one-dimensional test fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Field3 {
    pub nt: usize,
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub dx: f64,
    pub dy: f64,
    pub data: Vec<f64>,
}

impl Field3 {
    pub fn zeros(nt: usize, nx: usize, ny: usize, dt: f64, dx: f64, dy: f64) -> Self {
        Field3 {
            nt,
            nx,
            ny,
            dt,
            dx,
            dy,
            data: vec![0.0; nt * nx * ny],
        }
    }

    /// Zero density on the full space-time grid.
    pub fn on_grid(grid: &GridSpec) -> Self {
        Self::zeros(
            grid.n_t(),
            grid.n_s(),
            grid.n_y(),
            grid.dt(),
            grid.ds(),
            grid.dy(),
        )
    }

    /// Constant-in-time extension of a spatial slice.
    pub fn extend_in_time(grid: &GridSpec, slice: &[f64]) -> Self {
        let mut f = Self::on_grid(grid);
        for k in 0..f.nt {
            f.slice_mut(k).copy_from_slice(slice);
        }
        f
    }

    pub fn from_fn(nt: usize, nx: usize, ny: usize, dt: f64, dx: f64, dy: f64, g: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut f = Self::zeros(nt, nx, ny, dt, dx, dy);
        for k in 0..nt {
            for i in 0..nx {
                for j in 0..ny {
                    f.data[(k * nx + i) * ny + j] = g(k, i, j);
                }
            }
        }
        f
    }

    #[inline]
    pub fn index(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.nx + i) * self.ny + j
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[self.index(k, i, j)]
    }

    pub fn slice_len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.slice_len();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.slice_len();
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sup |self - other|`.
    pub fn sup_distance(&self, other: &Field3) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn map(&self, g: impl Fn(f64) -> f64) -> Field3 {
        self.with_data(self.data.iter().map(|&v| g(v)).collect())
    }

    /// Same shape and spacings, new payload.
    pub fn with_data(&self, data: Vec<f64>) -> Field3 {
        assert_eq!(data.len(), self.data.len());
        Field3 {
            nt: self.nt,
            nx: self.nx,
            ny: self.ny,
            dt: self.dt,
            dx: self.dx,
            dy: self.dy,
            data,
        }
    }

    /// First `levels` time levels.
    pub fn truncate_time(&self, levels: usize) -> Field3 {
        let n = self.slice_len();
        Field3 {
            nt: levels,
            nx: self.nx,
            ny: self.ny,
            dt: self.dt,
            dx: self.dx,
            dy: self.dy,
            data: self.data[..levels * n].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec {
            s_min: 50.0,
            s_max: 150.0,
            y_min: -1.0,
            y_max: 1.0,
            ns: 9,
            ny: 19,
            t_end: 1.0,
            nt: 4,
            holder: 0.5,
        }
    }

    #[test]
    fn node_coordinates_hit_the_bounds() {
        let g = grid();
        assert_eq!(g.s(0), 50.0);
        assert_eq!(g.s(g.ns + 1), 150.0);
        assert!((g.ds() - 10.0).abs() < 1e-14);
        assert!((g.dy() - 0.1).abs() < 1e-14);
        assert_eq!(g.t(g.nt), 1.0);
    }

    #[test]
    fn mass_of_constant_is_area() {
        let g = grid();
        let slice = vec![2.0; g.slice_len()];
        assert!((g.mass(&slice) - 2.0 * 100.0 * 2.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_small_grids() {
        let mut g = grid();
        g.ns = 7;
        assert!(g.validate().is_err());
        let mut g = grid();
        g.holder = 1.0;
        assert!(g.validate().is_err());
        assert!(grid().check_interior(150.0, 0.0).is_err());
    }
}
