//! Ground-truth models, their samplers and analytic Gaussian oracles.

mod fem;
mod gaussian;
mod grf;
mod lorenz96;

pub use fem::{
    heat_model, local_lumped_mass, local_mass, local_stiffness, matern_fem_precision, FemMatrices,
    HeatModel, Mesh, Mesh1d, Mesh2d,
};
pub use gaussian::{
    ar1_oracle, ar1_sample, matern1_cov, matern1_exact_gain, matern1_oracle, ou_euler,
    ou_euler_sample, Ar1,
};
pub use grf::{Grf2d, GRF_ORACLE_LIMIT};
pub use lorenz96::{lorenz96_ensemble, lorenz96_integrate, lorenz96_rhs, Lorenz96};

use crate::ensemble::{normal_matrix, Ensemble};
use crate::error::{Error, Result};
use crate::sparse::SparseSpd;
use nalgebra::{DMatrix, DVector};

/// Exact Gaussian law of a simulator, kept dense on the oracle side.
#[derive(Debug, Clone)]
pub struct GaussianOracle {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub prec: Option<SparseSpd>,
}

impl GaussianOracle {
    pub fn p(&self) -> usize {
        self.mean.len()
    }

    /// Checks `cov · prec = I` entrywise when a precision is present.
    pub fn check_consistency(&self, tol: f64) -> Result<()> {
        let Some(prec) = &self.prec else {
            return Ok(());
        };
        let prod = &self.cov * prec.to_dense();
        let err = (prod - DMatrix::identity(self.p(), self.p())).amax();
        if err > tol {
            return Err(Error::InvalidInput(format!(
                "oracle covariance and precision disagree by {err:e}"
            )));
        }
        Ok(())
    }

    /// Draws `n` members `μ + L z`, with `L` the dense Cholesky factor of the
    /// covariance and `z` from the member streams of `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Ensemble> {
        let l = self
            .cov
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite {
                column: 0,
                pivot: f64::NAN,
            })?
            .l();
        let z = normal_matrix(seed, n, self.p());
        let mut data = z * l.transpose();
        for mut row in data.row_iter_mut() {
            row += self.mean.transpose();
        }
        Ensemble::new(data)
    }
}
