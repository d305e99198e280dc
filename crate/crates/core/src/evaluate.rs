//! Gaussian divergences, likelihood curves and update summaries.

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::graph::CIGraph;
use crate::simulators::GaussianOracle;
use crate::sparse::{cholesky, fill_reducing_order, SparseSpd};
use crate::transport::{fit_affine_kr_with, gaussian_nll, FitOptions};
use nalgebra::{DMatrix, DVector};

/// `D(P‖Q)` split into its three halves: `total = mean + trace + log_det`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KldReport {
    pub total: f64,
    pub per_variable_average: f64,
    /// `½ (μ_Q-μ_P)ᵀ Λ_Q (μ_Q-μ_P)`
    pub mean_term: f64,
    /// `½ (tr(Λ_Q Σ_P) - p)`
    pub trace_term: f64,
    /// `½ (log|Σ_Q| - log|Σ_P|)`
    pub log_det_term: f64,
}

impl KldReport {
    fn new(p: usize, mean_term: f64, trace_term: f64, log_det_term: f64) -> Self {
        let total = mean_term + trace_term + log_det_term;
        Self {
            total,
            per_variable_average: total / p.max(1) as f64,
            mean_term,
            trace_term,
            log_det_term,
        }
    }
}

fn sparse_log_det(m: &SparseSpd) -> Result<f64> {
    Ok(cholesky(m, &fill_reducing_order(m)?)?.log_det())
}

fn dense_log_det(m: &DMatrix<f64>) -> Result<f64> {
    let l = m.clone().cholesky().ok_or(Error::NotPositiveDefinite {
        column: 0,
        pivot: f64::NAN,
    })?;
    Ok(2.0 * l.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

fn check_dims(p: usize, q_mean: usize, q_prec: usize) -> Result<()> {
    if q_mean != p || q_prec != p {
        return Err(Error::DimensionMismatch {
            context: "KLD operands",
            expected: p,
            found: if q_mean != p { q_mean } else { q_prec },
        });
    }
    Ok(())
}

/// `D(P₀‖Q)` with the truth `P₀` and a sparse-precision model `Q`.
pub fn gaussian_kld(
    truth: &GaussianOracle,
    q_mean: &DVector<f64>,
    q_prec: &SparseSpd,
) -> Result<KldReport> {
    let p = truth.p();
    check_dims(p, q_mean.len(), q_prec.dim())?;
    let diff: Vec<f64> = (q_mean - &truth.mean).iter().copied().collect();
    let mean_term = 0.5 * q_prec.quad_form(&diff)?;
    let trace_term = 0.5 * (q_prec.trace_product_dense(&truth.cov)? - p as f64);
    let log_det_p = match &truth.prec {
        Some(prec) => -sparse_log_det(prec)?,
        None => dense_log_det(&truth.cov)?,
    };
    let log_det_q = -sparse_log_det(q_prec)?;
    Ok(KldReport::new(
        p,
        mean_term,
        trace_term,
        0.5 * (log_det_q - log_det_p),
    ))
}

/// `D(Q‖P₀)`, the reverse orientation.
pub fn gaussian_kld_reverse(
    truth: &GaussianOracle,
    q_mean: &DVector<f64>,
    q_prec: &SparseSpd,
) -> Result<KldReport> {
    let p = truth.p();
    check_dims(p, q_mean.len(), q_prec.dim())?;
    let q_cov = cholesky(q_prec, &fill_reducing_order(q_prec)?)?.inverse_dense();
    gaussian_kld_dense(q_mean, &q_cov, &truth.mean, &truth.cov)
}

/// `D(P‖Q)` from dense means and covariances.
pub fn gaussian_kld_dense(
    p_mean: &DVector<f64>,
    p_cov: &DMatrix<f64>,
    q_mean: &DVector<f64>,
    q_cov: &DMatrix<f64>,
) -> Result<KldReport> {
    let p = p_mean.len();
    check_dims(p, q_mean.len(), q_cov.nrows())?;
    let lq = q_cov.clone().cholesky().ok_or(Error::NotPositiveDefinite {
        column: 0,
        pivot: f64::NAN,
    })?;
    let diff = q_mean - p_mean;
    let mean_term = 0.5 * diff.dot(&lq.solve(&diff));
    let trace_term = 0.5 * (lq.solve(p_cov).trace() - p as f64);
    let log_det_q = 2.0 * lq.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let log_det_p = dense_log_det(p_cov)?;
    Ok(KldReport::new(
        p,
        mean_term,
        trace_term,
        0.5 * (log_det_q - log_det_p),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllPoint {
    pub train_nll: f64,
    pub test_nll: f64,
}

/// Train and test NLL of affine maps fitted on each graph of a nested
/// sequence. All fits share the fill-reducing order of the largest graph,
/// so the fitted models are nested and the train curve is non-increasing.
pub fn nll_curve(train: &Ensemble, test: &Ensemble, graphs: &[CIGraph]) -> Result<Vec<NllPoint>> {
    let Some(largest) = graphs.last() else {
        return Ok(Vec::new());
    };
    if graphs.windows(2).any(|w| !w[0].is_subgraph_of(&w[1])) {
        return Err(Error::InvalidInput("graph list must be nested".into()));
    }
    let opts = FitOptions {
        star: Some(largest.fill_reducing_order()?),
        ..Default::default()
    };
    graphs
        .iter()
        .map(|g| {
            let map = fit_affine_kr_with(train, g, &opts)?;
            let prec = map.precision();
            Ok(NllPoint {
                train_nll: gaussian_nll(train, &prec, &map.mean)?,
                test_nll: gaussian_nll(test, &prec, &map.mean)?,
            })
        })
        .collect()
}

/// Index of the smallest test NLL (first on ties).
pub fn argmin_test(curve: &[NllPoint]) -> Option<usize> {
    curve
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.test_nll.total_cmp(&b.1.test_nll))
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateSummary {
    /// `n⁻¹ Σᵢ (u_post⁽ⁱ⁾ - u_prior⁽ⁱ⁾)` per variable.
    pub mean_update: Vec<f64>,
    /// Posterior over prior sample variance per variable.
    pub variance_ratio: Vec<f64>,
}

pub fn update_summary(prior: &Ensemble, posterior: &Ensemble) -> Result<UpdateSummary> {
    if prior.n() != posterior.n() || prior.p() != posterior.p() {
        return Err(Error::DimensionMismatch {
            context: "prior vs posterior shape",
            expected: prior.n() * prior.p(),
            found: posterior.n() * posterior.p(),
        });
    }
    let mean_update = (posterior.mean() - prior.mean()).iter().copied().collect();
    let var = |e: &Ensemble| -> Vec<f64> {
        let a = e.anomalies();
        let denom = (e.n() as f64 - 1.0).max(1.0);
        a.column_iter().map(|c| c.norm_squared() / denom).collect()
    };
    let variance_ratio = var(prior)
        .into_iter()
        .zip(var(posterior))
        .map(|(a, b)| match (a == 0.0, b == 0.0) {
            (true, true) => 1.0,
            (true, false) => f64::INFINITY,
            _ => b / a,
        })
        .collect();
    Ok(UpdateSummary {
        mean_update,
        variance_ratio,
    })
}
