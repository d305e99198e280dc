//! Exact linear-Gaussian conditioning, used as the reference posterior.

use crate::error::{Error, Result};
use crate::sparse::{cholesky, fill_reducing_order, SparseMatrix, SparseSpd};
use nalgebra::{DMatrix, DVector};

pub(crate) fn dense_inverse(prec: &SparseSpd) -> Result<DMatrix<f64>> {
    let f = cholesky(prec, &fill_reducing_order(prec)?)?;
    Ok(f.inverse_dense())
}

/// Posterior mean and precision of `u ~ N(mean, prec⁻¹)` given
/// `d = H u + ε`, `ε ~ N(0, noise_prec⁻¹)`.
pub fn condition_precision(
    mean: &DVector<f64>,
    prec: &SparseSpd,
    h: &SparseMatrix,
    noise_prec: &SparseSpd,
    d: &[f64],
) -> Result<(DVector<f64>, SparseSpd)> {
    if mean.len() != prec.dim() || h.ncols() != prec.dim() {
        return Err(Error::DimensionMismatch {
            context: "mean, precision and H columns",
            expected: prec.dim(),
            found: mean.len().max(h.ncols()),
        });
    }
    let post = prec.add(&h.gram_weighted(noise_prec)?)?;
    let mut eta = prec.mul_vec(mean.as_slice())?;
    let shift = h.tr_mul_vec(&noise_prec.mul_vec(d)?)?;
    eta.iter_mut().zip(shift).for_each(|(a, b)| *a += b);
    let f = cholesky(&post, &fill_reducing_order(&post)?)?;
    Ok((DVector::from_vec(f.solve(&eta)?), post))
}

/// Posterior mean and covariance in Kalman form.
pub fn condition_covariance(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    h: &DMatrix<f64>,
    noise_cov: &DMatrix<f64>,
    d: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let s = h * cov * h.transpose() + noise_cov;
    let chol = s.cholesky().ok_or(Error::NotPositiveDefinite {
        column: 0,
        pivot: f64::NAN,
    })?;
    let ch = h * cov;
    let kt = chol.solve(&ch);
    let innov = DVector::from_column_slice(d) - h * mean;
    let post_mean = mean + kt.transpose() * innov;
    let mut post_cov = cov - kt.transpose() * ch;
    post_cov = (&post_cov + post_cov.transpose()) * 0.5;
    Ok((post_mean, post_cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulators::ar1_oracle;

    #[test]
    fn both_forms_agree() {
        let o = ar1_oracle(6, 0.6).unwrap();
        let prec = o.prec.clone().unwrap();
        let mean = DVector::from_fn(6, |i, _| i as f64 * 0.1);
        let h = SparseMatrix::from_triplets(2, 6, [(0, 1, 1.0), (1, 4, 0.5), (1, 5, 0.5)]).unwrap();
        let noise = SparseSpd::diagonal(&[2.0, 4.0]);
        let d = [0.3, -0.7];
        let (m1, p1) = condition_precision(&mean, &prec, &h, &noise, &d).unwrap();
        let (m2, c2) = condition_covariance(
            &mean,
            &o.cov,
            &h.to_dense(),
            &noise.to_dense().try_inverse().unwrap(),
            &d,
        )
        .unwrap();
        assert!((m1 - m2).amax() < 1e-12);
        assert!((p1.to_dense().try_inverse().unwrap() - c2).amax() < 1e-12);
    }
}
