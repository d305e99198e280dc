//! The ensemble matrix and the seeded random streams used to fill it.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// `n x p` matrix of realisations; row `i` is member `u⁽ⁱ⁾`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    data: DMatrix<f64>,
}

impl Ensemble {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ensemble"));
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                context: "ensemble rows",
                expected: p,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn member(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }

    pub fn variable(&self, j: usize) -> Vec<f64> {
        self.data.column(j).iter().copied().collect()
    }

    pub fn mean(&self) -> DVector<f64> {
        let n = self.n().max(1) as f64;
        DVector::from_iterator(self.p(), self.data.column_iter().map(|c| c.sum() / n))
    }

    /// Rows minus the ensemble mean.
    pub fn anomalies(&self) -> DMatrix<f64> {
        let mu = self.mean();
        let mut a = self.data.clone();
        for mut row in a.row_iter_mut() {
            row -= mu.transpose();
        }
        a
    }

    /// Sample covariance with divisor `n - 1`.
    pub fn sample_cov(&self) -> Result<DMatrix<f64>> {
        if self.n() < 2 {
            return Err(Error::InvalidInput(
                "sample covariance needs at least two members".into(),
            ));
        }
        let a = self.anomalies();
        Ok(a.transpose() * &a / (self.n() as f64 - 1.0))
    }

    /// Variables `cols`, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Ensemble {
        Ensemble {
            data: self.data.select_columns(cols),
        }
    }

    /// Members `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Ensemble {
        Ensemble {
            data: self.data.select_rows(rows),
        }
    }
}

/// Random stream for member `member` under `seed`.
///
/// Every member draws from its own ChaCha8 stream so results do not depend
/// on the order (or thread) in which members are generated.
pub fn member_rng(seed: u64, member: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(member);
    rng
}

/// `len` standard normal draws from `rng`.
pub fn standard_normals<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// `n x p` matrix of standard normals, row `i` drawn from `member_rng(seed, i)`.
pub fn normal_matrix(seed: u64, n: usize, p: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, p);
    for i in 0..n {
        let z = standard_normals(&mut member_rng(seed, i as u64), p);
        for (j, v) in z.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    out
}
