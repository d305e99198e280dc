//! The experiment families. Each `run` function is pure given its config and
//! seed; writing tables and manifests is left to [`crate::runner`].

pub mod dependence;
pub mod fem_heat;
pub mod grf2d;
pub mod localisation;
pub mod lorenz;
pub mod resolution;

use crate::error::LabResult;
use enif::assimilate::{condition_covariance, condition_precision};
use enif::simulators::{matern1_oracle, ou_euler, Ar1, GaussianOracle};
use enif::sparse::{SparseMatrix, SparseSpd};
use nalgebra::{DMatrix, DVector};
use std::path::Path;

/// Seed for task `(a, b)` derived from the run seed.
pub fn sub_seed(seed: u64, a: u64, b: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(a.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(b.wrapping_mul(0x94D0_49BB_1331_11EB))
        .rotate_left(17)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Writes a headed CSV table.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> LabResult<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{}", header.join(","))?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    Ok(())
}

/// The OU/Matérn-1 conditioning problem at one resolution: `p` equispaced
/// points on `[0, length]`, the right endpoint observed with noise.
pub struct OuProblem {
    pub positions: Vec<f64>,
    pub euler: Ar1,
    pub h: SparseMatrix,
    pub noise_prec: SparseSpd,
    pub d: Vec<f64>,
    /// Exact posterior of the continuous process at the grid points.
    pub truth_post: GaussianOracle,
}

impl OuProblem {
    pub fn new(kappa: f64, length: f64, p: usize, obs_value: f64, obs_sd: f64) -> LabResult<Self> {
        let dt = length / (p - 1) as f64;
        let positions: Vec<f64> = (0..p).map(|k| k as f64 * dt).collect();
        let euler = ou_euler(kappa, dt, p)?;
        let h = SparseMatrix::selection(p, &[p - 1])?;
        let noise_prec = SparseSpd::diagonal(&[1.0 / (obs_sd * obs_sd)]);
        let d = vec![obs_value];
        let prior = matern1_oracle(kappa, &positions)?;
        let prior_prec = prior
            .prec
            .clone()
            .expect("matern oracle carries its precision");
        let (mean, prec) = condition_precision(&prior.mean, &prior_prec, &h, &noise_prec, &d)?;
        let (_, cov) = condition_covariance(
            &prior.mean,
            &prior.cov,
            &h.to_dense(),
            &DMatrix::from_element(1, 1, obs_sd * obs_sd),
            &d,
        )?;
        Ok(Self {
            positions,
            euler,
            h,
            noise_prec,
            d,
            truth_post: GaussianOracle {
                mean,
                cov,
                prec: Some(prec),
            },
        })
    }

    pub fn p(&self) -> usize {
        self.positions.len()
    }

    /// Posterior of a precision-form prior model.
    pub fn condition_sparse(
        &self,
        mean: &DVector<f64>,
        prec: &SparseSpd,
    ) -> LabResult<(DVector<f64>, SparseSpd)> {
        Ok(condition_precision(
            mean,
            prec,
            &self.h,
            &self.noise_prec,
            &self.d,
        )?)
    }

    /// Posterior of a covariance-form prior model.
    pub fn condition_dense(
        &self,
        mean: &DVector<f64>,
        cov: &DMatrix<f64>,
    ) -> LabResult<(DVector<f64>, DMatrix<f64>)> {
        let r = DMatrix::from_element(1, 1, 1.0 / self.noise_prec.get(0, 0));
        Ok(condition_covariance(
            mean,
            cov,
            &self.h.to_dense(),
            &r,
            &self.d,
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helpers() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let v = log_spaced(1e-2, 1e2, 5);
        assert!((v[2] - 1.0).abs() < 1e-12 && (v[4] - 100.0).abs() < 1e-9);
        assert_ne!(sub_seed(1, 0, 0), sub_seed(1, 0, 1));
    }
}
