//! Regular lattices and fields defined on them.
//!
//! Lengths are millimetres throughout. A two-dimensional problem is a grid
//! with `nz == 1`; every routine treats an axis with a single point as
//! inactive.

use crate::error::{Error, Result};

/// Axis-aligned lattice with uniform spacing `h` on every axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    nz: usize,
    h: f64,
    origin: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], h: f64, origin: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "grid dimensions must be positive, got {dims:?}"
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "grid spacing must be positive and finite, got {h}"
            )));
        }
        if origin.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("grid origin must be finite".into()));
        }
        Ok(Grid {
            nx: dims[0],
            ny: dims[1],
            nz: dims[2],
            h,
            origin,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of axes with more than one point.
    pub fn active_axes(&self) -> usize {
        self.dims().iter().filter(|&&n| n > 1).count()
    }

    /// Measure of one cell, `h^d` for `d` active axes.
    pub fn cell_measure(&self) -> f64 {
        self.h.powi(self.active_axes() as i32)
    }

    /// Flat index of the 1-based lattice coordinate `(i, j, k)`, x fastest.
    pub fn global_index(&self, i: usize, j: usize, k: usize) -> Result<usize> {
        if i == 0 || j == 0 || k == 0 || i > self.nx || j > self.ny || k > self.nz {
            return Err(Error::IndexOutOfRange {
                i,
                j,
                k,
                nx: self.nx,
                ny: self.ny,
                nz: self.nz,
            });
        }
        Ok((i - 1) + (j - 1) * self.nx + (k - 1) * self.nx * self.ny)
    }

    /// Inverse of [`Grid::global_index`].
    pub fn lattice_coords(&self, index: usize) -> Result<(usize, usize, usize)> {
        if index >= self.len() {
            return Err(Error::InvalidInput(format!(
                "flat index {index} outside grid of {} points",
                self.len()
            )));
        }
        let [i, j, k] = self.coords0(index);
        Ok((i + 1, j + 1, k + 1))
    }

    /// 0-based lattice coordinates of a flat index; no bounds check.
    #[inline]
    pub(crate) fn coords0(&self, index: usize) -> [usize; 3] {
        let plane = self.nx * self.ny;
        [index % self.nx, (index % plane) / self.nx, index / plane]
    }

    /// Physical position of the point with flat index `index`.
    #[inline]
    pub fn point(&self, index: usize) -> [f64; 3] {
        let c = self.coords0(index);
        [
            self.origin[0] + c[0] as f64 * self.h,
            self.origin[1] + c[1] as f64 * self.h,
            self.origin[2] + c[2] as f64 * self.h,
        ]
    }

    /// Physical extent `[lo, hi]` of each axis.
    pub fn bounds(&self) -> [[f64; 2]; 3] {
        let d = self.dims();
        std::array::from_fn(|a| [self.origin[a], self.origin[a] + (d[a] - 1) as f64 * self.h])
    }

    /// Whether `p` lies in the lattice box. An inactive axis accepts points
    /// within half a spacing of its single coordinate.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        let d = self.dims();
        self.bounds().iter().enumerate().all(|(a, [lo, hi])| {
            if d[a] == 1 {
                (p[a] - lo).abs() <= 0.5 * self.h
            } else {
                p[a] >= *lo && p[a] <= *hi
            }
        })
    }
}

/// Tumor cell density sampled at every grid point, flattened by
/// [`Grid::global_index`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at index {pos}")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `Σ u · h^d`.
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_measure()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
