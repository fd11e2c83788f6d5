//! Finite-difference discretization of `∇·(D∇u)` with zero-flux boundaries,
//! stored in compressed sparse row form, plus the logistic reaction term.
//!
//! Each row uses the coefficient of its own voxel: a voxel with diffusivity
//! `D` couples to every existing axis neighbour with weight `D/h²`, and its
//! diagonal is minus the sum of those weights. A missing neighbour at a
//! boundary face is a ghost point equal to the voxel itself, so it simply
//! drops out of both the off-diagonal set and the diagonal. Rows of voxels
//! with `D = 0` are empty.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::DiffusionField;

/// Rows per parallel work item in [`SparseOperator::apply_into`].
const ROW_CHUNK: usize = 4096;

/// Linear map that can be applied to vectors and has a known 1-norm.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// Exact induced 1-norm (maximum absolute column sum).
    fn one_norm(&self) -> f64;

    /// `y ← A·x`.
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    /// Norm used for convergence monitoring of iterates.
    fn monitor_norm(&self, v: &[f64]) -> f64 {
        inf_norm(v)
    }
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Square matrix in compressed sparse row layout.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_offsets: Vec<usize>,
    column_indices: Vec<usize>,
    coefficients: Vec<f64>,
    one_norm: f64,
}

impl SparseOperator {
    /// Builds and validates a CSR matrix. Column indices must be strictly
    /// increasing within each row.
    pub fn from_csr(
        dim: usize,
        row_offsets: Vec<usize>,
        column_indices: Vec<usize>,
        coefficients: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != dim + 1 {
            return Err(Error::DimensionMismatch {
                expected: dim + 1,
                actual: row_offsets.len(),
            });
        }
        if row_offsets[0] != 0 || row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput("row offsets must start at 0 and be monotone".into()));
        }
        let nnz = row_offsets[dim];
        if column_indices.len() != nnz || coefficients.len() != nnz {
            return Err(Error::InvalidInput(format!(
                "expected {nnz} stored entries, got {} indices and {} coefficients",
                column_indices.len(),
                coefficients.len()
            )));
        }
        for row in 0..dim {
            let cols = &column_indices[row_offsets[row]..row_offsets[row + 1]];
            if cols.iter().any(|&c| c >= dim) {
                return Err(Error::InvalidInput(format!("row {row} has a column outside [0, {dim})")));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(format!(
                    "row {row} columns are not strictly increasing"
                )));
            }
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("operator coefficient".into()));
        }
        let mut op = SparseOperator {
            dim,
            row_offsets,
            column_indices,
            coefficients,
            one_norm: 0.0,
        };
        op.one_norm = op.column_abs_sums().into_iter().fold(0.0, f64::max);
        Ok(op)
    }

    pub fn zero(dim: usize) -> Self {
        SparseOperator {
            dim,
            row_offsets: vec![0; dim + 1],
            column_indices: Vec::new(),
            coefficients: Vec::new(),
            one_norm: 0.0,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        SparseOperator::from_csr(n, (0..=n).collect(), (0..n).collect(), diag.to_vec())
    }

    pub fn nnz(&self) -> usize {
        self.coefficients.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn column_indices(&self) -> &[usize] {
        &self.column_indices
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `(column, coefficient)` pairs of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        self.column_indices[span.clone()]
            .iter()
            .copied()
            .zip(self.coefficients[span].iter().copied())
    }

    fn column_abs_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.dim];
        for (&c, &v) in self.column_indices.iter().zip(&self.coefficients) {
            sums[c] += v.abs();
        }
        sums
    }

    /// `A·u` into a new vector.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: u.len(),
            });
        }
        let mut y = vec![0.0; self.dim];
        self.apply_into(u, &mut y);
        Ok(y)
    }

    #[inline]
    fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
        self.column_indices[lo..hi]
            .iter()
            .zip(&self.coefficients[lo..hi])
            .map(|(&c, &v)| v * x[c])
            .sum()
    }

    /// Writes `row col value` lines (0-based) for cross-checking elsewhere.
    pub fn write_coo(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "# {} {} {}", self.dim, self.dim, self.nnz()).map_err(io)?;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                writeln!(out, "{r} {c} {v:.17e}").map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }
}

impl LinearOperator for SparseOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn one_norm(&self) -> f64 {
        self.one_norm
    }

    /// Each output row is an independent sequential dot product, so the
    /// result does not depend on the number of worker threads.
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        if self.dim <= ROW_CHUNK {
            for (r, out) in y.iter_mut().enumerate() {
                *out = self.row_dot(r, x);
            }
        } else {
            y.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(chunk, ys)| {
                let base = chunk * ROW_CHUNK;
                for (off, out) in ys.iter_mut().enumerate() {
                    *out = self.row_dot(base + off, x);
                }
            });
        }
    }
}

/// Assembles the diffusion operator for `d` on its grid.
pub fn assemble(d: &DiffusionField) -> SparseOperator {
    let grid = *d.grid();
    let n = grid.len();
    let dims = grid.dims();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let strides = [1, dims[0], dims[0] * dims[1]];

    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut column_indices = Vec::with_capacity(7 * n);
    let mut coefficients = Vec::with_capacity(7 * n);
    row_offsets.push(0);

    // neighbours in increasing column order: -z, -y, -x, self, +x, +y, +z
    let mut lower = Vec::with_capacity(3);
    let mut upper = Vec::with_capacity(3);
    for (v, &dv) in d.values().iter().enumerate() {
        if dv != 0.0 {
            let w = dv * inv_h2;
            let c = grid.coords0(v);
            lower.clear();
            upper.clear();
            for axis in (0..3).rev() {
                if c[axis] > 0 {
                    lower.push(v - strides[axis]);
                }
            }
            for axis in 0..3 {
                if c[axis] + 1 < dims[axis] {
                    upper.push(v + strides[axis]);
                }
            }
            let neighbours = (lower.len() + upper.len()) as f64;
            for &col in &lower {
                column_indices.push(col);
                coefficients.push(w);
            }
            if neighbours > 0.0 {
                column_indices.push(v);
                coefficients.push(-neighbours * w);
            }
            for &col in &upper {
                column_indices.push(col);
                coefficients.push(w);
            }
        }
        row_offsets.push(column_indices.len());
    }

    let mut op = SparseOperator {
        dim: n,
        row_offsets,
        column_indices,
        coefficients,
        one_norm: 0.0,
    };
    op.one_norm = op.column_abs_sums().into_iter().fold(0.0, f64::max);
    op
}

/// Logistic proliferation `ρ·u·(1 − u)`, elementwise.
pub fn reaction(u: &[f64], rho: f64) -> Vec<f64> {
    u.iter().map(|&x| rho * x * (1.0 - x)).collect()
}

pub(crate) fn reaction_into(u: &[f64], rho: f64, out: &mut [f64]) {
    for (o, &x) in out.iter_mut().zip(u) {
        *o = rho * x * (1.0 - x);
    }
}
