//! KLD of distance-localised ES across kernel widths, against EnIF.

use super::{log_spaced, OuProblem};
use crate::config::LocalisationConfig;
use crate::error::LabResult;
use enif::evaluate::{gaussian_kld, gaussian_kld_dense};
use enif::graph::chain_graph;
use enif::simulators::matern1_oracle;
use enif::transport::fit_affine_kr;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalisationResult {
    /// `(c, avg KLD)` for the tapered prior covariance `exp(-c δ²) ∘ Σ̂`.
    pub curve: Vec<(f64, f64)>,
    pub enif: f64,
    /// Untapered sample covariance; infinite when it is singular.
    pub vanilla_es: f64,
}

impl LocalisationResult {
    pub fn min_localised(&self) -> f64 {
        self.curve.iter().map(|c| c.1).fold(f64::INFINITY, f64::min)
    }

    /// Whether the smallest value lies strictly inside the grid and below
    /// both endpoints.
    pub fn has_interior_minimum(&self) -> bool {
        let k = self.curve.len();
        let (i, v) = self
            .curve
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .map(|(i, c)| (i, c.1))
            .unwrap_or((0, f64::NAN));
        k >= 3 && i > 0 && i < k - 1 && v < self.curve[0].1 && v < self.curve[k - 1].1
    }
}

fn dense_kld(prob: &OuProblem, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let truth = &prob.truth_post;
    prob.condition_dense(mean, cov)
        .ok()
        .and_then(|(m, c)| gaussian_kld_dense(&truth.mean, &truth.cov, &m, &c).ok())
        .map(|r| r.per_variable_average)
        .filter(|v| v.is_finite())
        .unwrap_or(f64::INFINITY)
}

pub fn run(cfg: &LocalisationConfig, seed: u64) -> LabResult<LocalisationResult> {
    let prob = OuProblem::new(cfg.kappa, cfg.length, cfg.p, cfg.obs_value, cfg.obs_sd)?;
    let prior = matern1_oracle(cfg.kappa, &prob.positions)?.sample(cfg.n, seed)?;

    let map = fit_affine_kr(&prior, &chain_graph(cfg.p))?;
    let (m, prec) = prob.condition_sparse(&map.mean, &map.precision())?;
    let enif = gaussian_kld(&prob.truth_post, &m, &prec)?.per_variable_average;

    let mean = prior.mean();
    let cov = prior.sample_cov()?;
    let vanilla_es = dense_kld(&prob, &mean, &cov);

    let x = &prob.positions;
    let curve = log_spaced(cfg.c_min, cfg.c_max, cfg.count)
        .into_par_iter()
        .map(|c| {
            let tapered = DMatrix::from_fn(cfg.p, cfg.p, |i, j| {
                cov[(i, j)] * (-c * (x[i] - x[j]).powi(2)).exp()
            });
            (c, dense_kld(&prob, &mean, &tapered))
        })
        .collect();
    Ok(LocalisationResult {
        curve,
        enif,
        vanilla_es,
    })
}
