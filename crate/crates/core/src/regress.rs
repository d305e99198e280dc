//! Row-wise estimation of a sparse linear observation operator `H`.

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// One fitted row of `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRowEstimate {
    /// `(column, coefficient)` on the original scale, sorted by column.
    pub coefficients: Vec<(usize, f64)>,
    pub iterations_used: usize,
    /// Approximate leave-one-out mse after `k` steps, `k = 0..=iterations_used`,
    /// plus the rejected candidate that triggered the stop (if any).
    pub cv_curve: Vec<f64>,
    pub hit_max_iter: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// Fraction of the one-dimensional least-squares coefficient taken per step.
    pub step: f64,
    /// Iteration cap; `None` means `10 p`.
    pub max_iter: Option<usize>,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            step: 0.1,
            max_iter: None,
        }
    }
}

fn centred_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Monotone LASSO by forward stagewise boosting with 1D linear learners,
/// stopped when an influence-function approximation of leave-one-out error
/// stops improving.
///
/// Features and response are standardised internally. At each step the
/// coordinate whose 1D fit to the current residual reduces the training mse
/// the most is moved by `step` times its 1D coefficient (ties go to the
/// lowest index). The leave-one-out residual of member `i` is approximated
/// by `r_i (1 + Σ_{j active} x_ij² / Σ_l x_lj²)`.
pub fn monotone_lasso_row(
    x: &Ensemble,
    y: &[f64],
    opts: &LassoOptions,
) -> Result<SparseRowEstimate> {
    let (n, p) = (x.n(), x.p());
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            context: "response length",
            expected: n,
            found: y.len(),
        });
    }
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "monotone lasso needs at least 3 members, got {n}"
        )));
    }
    if !(opts.step > 0.0 && opts.step <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "step must lie in (0, 1], got {}",
            opts.step
        )));
    }
    let max_iter = opts.max_iter.unwrap_or(10 * p);

    let (_, sd_y) = centred_sd(y);
    if sd_y == 0.0 {
        return Ok(SparseRowEstimate {
            coefficients: Vec::new(),
            iterations_used: 0,
            cv_curve: Vec::new(),
            hit_max_iter: false,
        });
    }
    let (mean_y, _) = centred_sd(y);
    let ys: Vec<f64> = y.iter().map(|v| (v - mean_y) / sd_y).collect();

    // Standardised usable features, stored column-major.
    let mut cols: Vec<usize> = Vec::new();
    let mut sds: Vec<f64> = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    for j in 0..p {
        let col = x.variable(j);
        let (m, s) = centred_sd(&col);
        if s > 0.0 {
            cols.push(j);
            sds.push(s);
            xs.extend(col.iter().map(|v| (v - m) / s));
        }
    }
    let q = cols.len();
    let feat = |k: usize| &xs[k * n..(k + 1) * n];
    // Σ_i x_ij² equals n after standardisation, but compute it to stay exact.
    let ss: Vec<f64> = (0..q)
        .map(|k| feat(k).iter().map(|v| v * v).sum())
        .collect();

    let mut beta = vec![0.0; q];
    let mut active = vec![false; q];
    let mut resid = ys.clone();
    // Σ_{j active} x_ij² / S_j per member.
    let mut lev = vec![0.0; n];
    let cv = |resid: &[f64], lev: &[f64]| {
        resid
            .iter()
            .zip(lev)
            .map(|(r, l)| (r * (1.0 + l)).powi(2))
            .sum::<f64>()
            / n as f64
    };
    let mut cv_curve = vec![cv(&resid, &lev)];
    let mut iterations = 0;
    let mut hit_max_iter = false;
    if q > 0 {
        loop {
            if iterations >= max_iter {
                hit_max_iter = true;
                break;
            }
            let mut best = (0usize, f64::NEG_INFINITY, 0.0);
            for k in 0..q {
                let xr: f64 = feat(k).iter().zip(&resid).map(|(a, b)| a * b).sum();
                let gain = xr * xr / ss[k];
                if gain > best.1 {
                    best = (k, gain, xr / ss[k]);
                }
            }
            let (k, _, b1) = best;
            let delta = opts.step * b1;
            let new_resid: Vec<f64> = resid
                .iter()
                .zip(feat(k))
                .map(|(r, xk)| r - delta * xk)
                .collect();
            let new_lev: Vec<f64> = if active[k] {
                lev.clone()
            } else {
                lev.iter()
                    .zip(feat(k))
                    .map(|(l, xk)| l + xk * xk / ss[k])
                    .collect()
            };
            let cand = cv(&new_resid, &new_lev);
            cv_curve.push(cand);
            if cand
                >= *cv_curve
                    .iter()
                    .rev()
                    .nth(1)
                    .expect("curve has a previous entry")
            {
                break;
            }
            beta[k] += delta;
            active[k] = true;
            resid = new_resid;
            lev = new_lev;
            iterations += 1;
        }
    }

    let coefficients = (0..q)
        .filter(|&k| beta[k] != 0.0)
        .map(|k| (cols[k], beta[k] * sd_y / sds[k]))
        .collect();
    Ok(SparseRowEstimate {
        coefficients,
        iterations_used: iterations,
        cv_curve,
        hit_max_iter,
    })
}

/// Ordinary least squares on centred data.
pub fn lls_row(x: &Ensemble, y: &[f64]) -> Result<Vec<f64>> {
    let (n, p) = (x.n(), x.p());
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            context: "response length",
            expected: n,
            found: y.len(),
        });
    }
    if n <= p {
        return Err(Error::Underdetermined {
            members: n,
            features: p,
        });
    }
    let a = x.anomalies();
    let my = y.iter().sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - my));
    let chol = a
        .tr_mul(&a)
        .cholesky()
        .ok_or(Error::SingularDesign { row: 0 })?;
    Ok(chol.solve(&a.tr_mul(&yc)).iter().copied().collect())
}

/// How `H` is obtained.
#[derive(Debug, Clone)]
pub enum HMethod {
    Known(SparseMatrix),
    MonotoneLasso(LassoOptions),
    Lls,
}

/// Estimated `H` with per-response residual variances of `y - H u`.
#[derive(Debug, Clone)]
pub struct HEstimate {
    pub h: SparseMatrix,
    pub residual_var: Vec<f64>,
    pub rows: Vec<Option<SparseRowEstimate>>,
}

/// Estimates `H` from states `x` (`n x p`) and responses `y` (`n x m`).
pub fn estimate_h(x: &Ensemble, y: &DMatrix<f64>, method: &HMethod) -> Result<HEstimate> {
    if y.nrows() != x.n() {
        return Err(Error::DimensionMismatch {
            context: "responses vs states (members)",
            expected: x.n(),
            found: y.nrows(),
        });
    }
    let m = y.ncols();
    let (h, rows) = match method {
        HMethod::Known(h) => {
            if h.nrows() != m || h.ncols() != x.p() {
                return Err(Error::DimensionMismatch {
                    context: "known H shape",
                    expected: m * x.p(),
                    found: h.nrows() * h.ncols(),
                });
            }
            (h.clone(), vec![None; m])
        }
        HMethod::MonotoneLasso(opts) => {
            let fits: Vec<SparseRowEstimate> = (0..m)
                .into_par_iter()
                .map(|k| {
                    let yk: Vec<f64> = y.column(k).iter().copied().collect();
                    monotone_lasso_row(x, &yk, opts)
                })
                .collect::<Result<_>>()?;
            let h = SparseMatrix::from_rows(
                x.p(),
                fits.iter().map(|f| f.coefficients.clone()).collect(),
            )?;
            (h, fits.into_iter().map(Some).collect())
        }
        HMethod::Lls => {
            let dense: Vec<Vec<f64>> = (0..m)
                .into_par_iter()
                .map(|k| {
                    let yk: Vec<f64> = y.column(k).iter().copied().collect();
                    lls_row(x, &yk)
                })
                .collect::<Result<_>>()?;
            let h = SparseMatrix::from_rows(
                x.p(),
                dense
                    .into_iter()
                    .map(|r| r.into_iter().enumerate().collect())
                    .collect(),
            )?;
            (h, vec![None; m])
        }
    };
    let residual_var = residual_variances(x, y, &h)?;
    Ok(HEstimate {
        h,
        residual_var,
        rows,
    })
}

/// Sample variance (divisor `n - 1`) of each column of `Y - U Hᵀ`.
pub fn residual_variances(x: &Ensemble, y: &DMatrix<f64>, h: &SparseMatrix) -> Result<Vec<f64>> {
    let n = x.n();
    if n < 2 {
        return Ok(vec![0.0; y.ncols()]);
    }
    let mut resid = y.clone();
    for i in 0..n {
        let hu = h.mul_vec(&x.member(i))?;
        for (k, v) in hu.into_iter().enumerate() {
            resid[(i, k)] -= v;
        }
    }
    Ok(resid
        .column_iter()
        .map(|c| {
            let m = c.mean();
            c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 - 1.0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::normal_matrix;
    use crate::simulators::ar1_sample;

    fn noise_features(n: usize, p: usize, seed: u64) -> Ensemble {
        Ensemble::new(normal_matrix(seed, n, p)).unwrap()
    }

    #[test]
    fn zero_response_gives_empty_estimate() {
        let x = noise_features(50, 5, 1);
        let est = monotone_lasso_row(&x, &vec![0.0; 50], &LassoOptions::default()).unwrap();
        assert!(est.coefficients.is_empty());
        assert_eq!(est.iterations_used, 0);
    }

    #[test]
    fn exact_recovery_of_single_feature() {
        let x = noise_features(200, 20, 2);
        let y = x.variable(5);
        let est = monotone_lasso_row(&x, &y, &LassoOptions::default()).unwrap();
        assert_eq!(est.coefficients.len(), 1, "{:?}", est.coefficients);
        assert_eq!(est.coefficients[0].0, 5);
        assert!((est.coefficients[0].1 - 1.0).abs() < 0.05);
    }

    #[test]
    fn stopping_rule_and_monotone_training_error() {
        let x = noise_features(100, 30, 3);
        let mut y = x.variable(2);
        let z = normal_matrix(99, 100, 1);
        for (i, v) in y.iter_mut().enumerate() {
            *v += 0.5 * x.variable(7)[i] + z[(i, 0)];
        }
        let est = monotone_lasso_row(&x, &y, &LassoOptions::default()).unwrap();
        let k = est.iterations_used;
        assert!(!est.hit_max_iter);
        assert!(est.cv_curve[k + 1] >= est.cv_curve[k]);
        assert!(est.cv_curve[..=k].windows(2).all(|w| w[1] < w[0]));
        assert!(est.coefficients.len() <= k);
    }

    #[test]
    fn scale_equivariance() {
        let x = noise_features(120, 6, 4);
        let y: Vec<f64> = (0..120)
            .map(|i| x.variable(1)[i] - 0.7 * x.variable(3)[i])
            .collect();
        let a = monotone_lasso_row(&x, &y, &LassoOptions::default()).unwrap();
        let mut d = x.data().clone();
        d.column_mut(3).scale_mut(4.0);
        let b =
            monotone_lasso_row(&Ensemble::new(d).unwrap(), &y, &LassoOptions::default()).unwrap();
        for ((ja, va), (jb, vb)) in a.coefficients.iter().zip(&b.coefficients) {
            assert_eq!(ja, jb);
            let want = if *ja == 3 { va / 4.0 } else { *va };
            assert!((vb - want).abs() < 1e-12);
        }
    }

    #[test]
    fn lls_recovers_coefficients() {
        let x = ar1_sample(10, 0.5, 1000, 5).unwrap();
        let beta: Vec<f64> = (0..10).map(|j| j as f64 * 0.1 - 0.3).collect();
        let z = normal_matrix(77, 1000, 1);
        let y: Vec<f64> = (0..1000)
            .map(|i| {
                let u = x.member(i);
                u.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + 0.5 * z[(i, 0)]
            })
            .collect();
        let est = lls_row(&x, &y).unwrap();
        // Standard errors of OLS under unit-variance AR-1 design are below
        // 0.5 * sqrt(2 / 1000 * (1+φ²)/(1-φ²)) ≈ 0.04.
        for (e, b) in est.iter().zip(&beta) {
            assert!((e - b).abs() < 3.0 * 0.04, "{e} vs {b}");
        }
        let sq = noise_features(4, 4, 6);
        assert!(matches!(
            lls_row(&sq, &[1.0, 2.0, 3.0, 4.0]),
            Err(Error::Underdetermined { .. })
        ));
    }

    #[test]
    fn estimate_h_identity_observation() {
        let x = noise_features(500, 25, 7);
        let y = x.data().clone();
        let est = estimate_h(&x, &y, &HMethod::MonotoneLasso(LassoOptions::default())).unwrap();
        for i in 0..25 {
            let stray = est.h.row(i).filter(|&(j, _)| j != i).count();
            assert!(stray <= 2);
            assert!(est.h.row(i).any(|(j, _)| j == i));
        }
    }

    #[test]
    fn estimate_h_known_and_empty() {
        let x = noise_features(10, 3, 8);
        let h = SparseMatrix::selection(3, &[2]).unwrap();
        let y = DMatrix::from_fn(10, 1, |i, _| x.data()[(i, 2)]);
        let est = estimate_h(&x, &y, &HMethod::Known(h.clone())).unwrap();
        assert_eq!(est.h, h);
        assert!(est.residual_var[0] < 1e-20);
        let est = estimate_h(&x, &DMatrix::zeros(10, 0), &HMethod::Lls).unwrap();
        assert_eq!(est.h.nrows(), 0);
    }
}
