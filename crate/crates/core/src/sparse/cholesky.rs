use super::ordering::{ereach, etree, symbolic_from_rows, LowerPattern};
use super::{Permutation, SparseSpd};
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Pivots below this fraction of the largest diagonal entry are rejected.
const PIVOT_TOL: f64 = 1e-12;

/// Sparse Cholesky factor `L` of `Π A Πᵀ = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    perm: Permutation,
    pattern: LowerPattern,
    values: Vec<f64>,
}

/// Factors `Π m Πᵀ` with an up-looking sparse Cholesky.
pub fn cholesky(m: &SparseSpd, perm: &Permutation) -> Result<CholeskyFactor> {
    let n = m.dim();
    if perm.len() != n {
        return Err(Error::DimensionMismatch {
            context: "cholesky permutation",
            expected: n,
            found: perm.len(),
        });
    }
    let pos = perm.inverse();
    let pos = pos.order();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, j, v) in m.triplets() {
        let (a, b) = (pos[i], pos[j]);
        rows[a.max(b)].push((a.min(b), v));
    }
    for r in rows.iter_mut() {
        r.sort_unstable_by_key(|e| e.0);
    }
    let pat_rows: Vec<Vec<usize>> = rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let mut c: Vec<usize> = r.iter().map(|e| e.0).collect();
            c.push(k);
            c.dedup();
            c
        })
        .collect();
    let pattern = symbolic_from_rows(&pat_rows);
    let parent = etree(&pat_rows);

    let max_diag = m
        .diagonal_values()
        .iter()
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    let tol = PIVOT_TOL * max_diag;

    let col_ptr = pattern.col_ptr().to_vec();
    let mut values = vec![0.0; pattern.nnz()];
    let mut next = col_ptr.clone();
    let mut x = vec![0.0; n];
    let mut mark = vec![false; n];
    let mut reach = Vec::new();
    for k in 0..n {
        ereach(&pat_rows[k], k, &parent, &mut mark, &mut reach);
        for &(j, v) in &rows[k] {
            x[j] += v;
        }
        let mut d = x[k];
        x[k] = 0.0;
        for &j in &reach {
            let lkj = x[j] / values[col_ptr[j]];
            x[j] = 0.0;
            for p in col_ptr[j] + 1..next[j] {
                x[pattern.row_idx()[p]] -= values[p] * lkj;
            }
            d -= lkj * lkj;
            values[next[j]] = lkj;
            next[j] += 1;
        }
        if !(d > tol) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite {
                column: perm.order()[k],
                pivot: d,
            });
        }
        values[next[k]] = d.sqrt();
        next[k] += 1;
    }
    Ok(CholeskyFactor {
        perm: perm.clone(),
        pattern,
        values,
    })
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    pub fn pattern(&self) -> &LowerPattern {
        &self.pattern
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(row, value)` pairs of column `j` of `L`, diagonal first.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.pattern.col_ptr()[j]..self.pattern.col_ptr()[j + 1];
        self.pattern
            .column(j)
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn diag(&self, j: usize) -> f64 {
        self.values[self.pattern.col_ptr()[j]]
    }

    /// `log |A|`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|j| self.diag(j).ln()).sum::<f64>()
    }

    /// Solves `L y = b` in place (permuted coordinates).
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        for j in 0..self.dim() {
            let mut it = self.column(j);
            let (_, d) = it.next().expect("diagonal present");
            b[j] /= d;
            let bj = b[j];
            for (i, v) in it {
                b[i] -= v * bj;
            }
        }
    }

    /// Solves `Lᵀ y = b` in place (permuted coordinates).
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        for j in (0..self.dim()).rev() {
            let mut it = self.column(j);
            let (_, d) = it.next().expect("diagonal present");
            let s: f64 = it.map(|(i, v)| v * b[i]).sum();
            b[j] = (b[j] - s) / d;
        }
    }

    /// Solves `A x = b` in the original coordinates.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "cholesky solve",
                expected: self.dim(),
                found: b.len(),
            });
        }
        let mut y = self.perm.apply(b);
        self.solve_lower_in_place(&mut y);
        self.solve_upper_in_place(&mut y);
        Ok(self.perm.apply_inverse(&y))
    }

    /// Maps white noise `z` to a draw with covariance `A⁻¹`:
    /// `x = Πᵀ L⁻ᵀ z`.
    pub fn whiten_inverse(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "cholesky sample",
                expected: self.dim(),
                found: z.len(),
            });
        }
        let mut y = z.to_vec();
        self.solve_upper_in_place(&mut y);
        Ok(self.perm.apply_inverse(&y))
    }

    /// Dense copy of `L` in permuted coordinates.
    pub fn l_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut l = DMatrix::zeros(n, n);
        for j in 0..n {
            for (i, v) in self.column(j) {
                l[(i, j)] = v;
            }
        }
        l
    }

    /// Dense `A⁻¹` in original coordinates. Meant for tests and small oracles.
    pub fn inverse_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for c in 0..n {
            e[c] = 1.0;
            let x = self.solve(&e).expect("dimension checked");
            e[c] = 0.0;
            for r in 0..n {
                out[(r, c)] = x[r];
            }
        }
        out
    }
}

/// Solves `A x = b` using a fill-reducing permutation.
pub fn solve_spd(m: &SparseSpd, b: &[f64]) -> Result<Vec<f64>> {
    let perm = super::fill_reducing_order(m)?;
    cholesky(m, &perm)?.solve(b)
}

/// Solves `A X = B` column by column.
pub fn solve_spd_matrix(m: &SparseSpd, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let perm = super::fill_reducing_order(m)?;
    let f = cholesky(m, &perm)?;
    let mut out = DMatrix::zeros(b.nrows(), b.ncols());
    for c in 0..b.ncols() {
        let col: Vec<f64> = b.column(c).iter().copied().collect();
        let x = f.solve(&col)?;
        out.column_mut(c).copy_from_slice(&x);
    }
    Ok(out)
}
