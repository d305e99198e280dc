//! Sparse symmetric storage, permutations, fill-reducing orderings and
//! sparse Cholesky factorisation.

mod cholesky;
mod matrix;
mod ordering;
mod permutation;

pub use cholesky::{cholesky, solve_spd, solve_spd_matrix, CholeskyFactor};
pub use matrix::SparseMatrix;
pub use ordering::{
    factor_nnz, fill_in, fill_reducing_order, kr_order, kr_order_from_cholesky, symbolic_cholesky,
    LowerPattern,
};
pub use permutation::{Permutation, PermutationKind};

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Sparse symmetric matrix holding only its lower triangle.
///
/// Rows are stored compressed: row `i` lists the columns `j <= i` with a
/// stored value, sorted ascending, so the diagonal (when present) is the
/// last entry of the row. The upper triangle is implied by symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSpd {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSpd {
    /// Builds a matrix from `(row, col, value)` triplets.
    ///
    /// Entries above the diagonal are mirrored into the lower triangle and
    /// duplicates are summed, so callers may pass either triangle (not both,
    /// unless they intend the sum).
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= dim || j >= dim {
                return Err(Error::InvalidInput(format!(
                    "entry ({i}, {j}) outside a {dim}x{dim} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("sparse matrix entry"));
            }
            entries.push((i.max(j), i.min(j), v));
        }
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            last = Some((i, j));
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            dim,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            col_idx: (0..dim).collect(),
            values: diag.to_vec(),
        }
    }

    /// Lower triangle of a dense symmetric matrix, dropping entries with
    /// `|value| <= drop_tol` off the diagonal.
    pub fn from_dense(m: &DMatrix<f64>, drop_tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                context: "dense to sparse (square)",
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let dim = m.nrows();
        let mut trip = Vec::new();
        for i in 0..dim {
            for j in 0..=i {
                let v = m[(i, j)];
                if i == j || v.abs() > drop_tol {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(dim, trip)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored lower-triangle entries (diagonal included).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored `(col, value)` pairs of row `i`, columns `<= i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub(crate) fn row_cols(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub(crate) fn row_values(&self, i: usize) -> &[f64] {
        &self.values[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Lower-triangle triplets `(i, j, v)` with `i >= j`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = (i.max(j), i.min(j));
        let cols = self.row_cols(r);
        match cols.binary_search(&c) {
            Ok(k) => self.row_values(r)[k],
            Err(_) => 0.0,
        }
    }

    pub fn is_stored(&self, i: usize, j: usize) -> bool {
        let (r, c) = (i.max(j), i.min(j));
        self.row_cols(r).binary_search(&c).is_ok()
    }

    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Symmetric product `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "sparse symmetric product",
                expected: self.dim,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.dim];
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                y[i] += v * x[j];
                if j != i {
                    y[j] += v * x[i];
                }
            }
        }
        Ok(y)
    }

    /// `x^T A x`.
    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        let y = self.mul_vec(x)?;
        Ok(x.iter().zip(&y).map(|(a, b)| a * b).sum())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Sum of two matrices over the union of their patterns.
    pub fn add(&self, other: &SparseSpd) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                context: "sparse symmetric sum",
                expected: self.dim,
                found: other.dim,
            });
        }
        Self::from_triplets(self.dim, self.triplets().chain(other.triplets()))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Returns `Π A Πᵀ`, i.e. entry `(k, l)` of the result is
    /// `A[order[k], order[l]]`.
    pub fn permute(&self, perm: &Permutation) -> Result<Self> {
        if perm.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "symmetric permutation",
                expected: self.dim,
                found: perm.len(),
            });
        }
        let pos = perm.inverse();
        let trip = self
            .triplets()
            .map(|(i, j, v)| (pos.order()[i], pos.order()[j], v));
        Self::from_triplets(self.dim, trip)
    }

    /// `tr(A B)` for a dense symmetric `B`, touching only stored entries.
    pub fn trace_product_dense(&self, b: &DMatrix<f64>) -> Result<f64> {
        if b.nrows() != self.dim || b.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "trace product",
                expected: self.dim,
                found: b.nrows(),
            });
        }
        let mut t = 0.0;
        for (i, j, v) in self.triplets() {
            if i == j {
                t += v * b[(i, i)];
            } else {
                t += v * (b[(i, j)] + b[(j, i)]);
            }
        }
        Ok(t)
    }
}
