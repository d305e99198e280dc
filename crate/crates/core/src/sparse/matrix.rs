use super::SparseSpd;
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// General sparse `rows x cols` matrix in compressed-row form.
///
/// Used for observation operators `H`, whose rows come out of per-response
/// regressions.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from per-row `(col, value)` lists. Duplicated columns
    /// within a row are summed.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let nrows = rows.len();
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let start = col_idx.len();
            for (j, v) in row {
                if j >= cols {
                    return Err(Error::InvalidInput(format!(
                        "column {j} outside a matrix with {cols} columns"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite("sparse matrix entry"));
                }
                if col_idx.len() > start && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            rows: nrows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_triplets<I>(rows: usize, cols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut per_row = vec![Vec::new(); rows];
        for (i, j, v) in triplets {
            if i >= rows {
                return Err(Error::InvalidInput(format!(
                    "row {i} outside a matrix with {rows} rows"
                )));
            }
            per_row[i].push((j, v));
        }
        Self::from_rows(cols, per_row)
    }

    /// Dense matrix with exact zeros dropped.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .filter(|&j| m[(i, j)] != 0.0)
                    .map(|j| (j, m[(i, j)]))
                    .collect()
            })
            .collect();
        Self::from_rows(m.ncols(), rows).expect("dense entries are in range")
    }

    /// Selection matrix observing the given state indices, one row each.
    pub fn selection(cols: usize, observed: &[usize]) -> Result<Self> {
        Self::from_rows(cols, observed.iter().map(|&j| vec![(j, 1.0)]).collect())
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// `(row, col)` positions of stored entries.
    pub fn pattern(&self) -> Vec<(usize, usize)> {
        self.triplets().map(|(i, j, _)| (i, j)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "sparse product",
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect())
    }

    /// `Hᵀ y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "sparse transposed product",
                expected: self.rows,
                found: y.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (i, j, v) in self.triplets() {
            out[j] += v * y[i];
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    /// `Hᵀ W H` for a symmetric weight `W` (typically a diagonal precision).
    pub fn gram_weighted(&self, w: &SparseSpd) -> Result<SparseSpd> {
        if w.dim() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "weighted gram HᵀWH",
                expected: self.rows,
                found: w.dim(),
            });
        }
        let mut trip = Vec::new();
        for (k, l, wkl) in w.triplets() {
            // An off-diagonal weight also stands for w[l][k], so each product
            // lands at both (a, b) and (b, a).
            for (a, ha) in self.row(k) {
                for (b, hb) in self.row(l) {
                    let v = wkl * ha * hb;
                    if k == l {
                        if a >= b {
                            trip.push((a, b, v));
                        }
                    } else {
                        trip.push((a.max(b), a.min(b), if a == b { 2.0 * v } else { v }));
                    }
                }
            }
        }
        SparseSpd::from_triplets(self.cols, trip)
    }
}
