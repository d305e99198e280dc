//! Average KLD to the analytical OU posterior as the grid is refined.

use super::OuProblem;
use crate::config::ResolutionConfig;
use crate::error::LabResult;
use enif::evaluate::{gaussian_kld, gaussian_kld_dense};
use enif::graph::chain_graph;
use enif::transport::fit_affine_kr;
use nalgebra::DVector;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionRow {
    pub p: usize,
    pub euler: f64,
    pub enif: f64,
    pub es: f64,
}

/// Runs one resolution. The same prior ensemble feeds the EnIF and ES fits.
pub fn run_one(cfg: &ResolutionConfig, p: usize, seed: u64) -> LabResult<ResolutionRow> {
    let prob = OuProblem::new(cfg.kappa, cfg.length, p, cfg.obs_value, cfg.obs_sd)?;
    let truth = &prob.truth_post;

    let (m, prec) = prob.condition_sparse(&DVector::zeros(p), &prob.euler.precision())?;
    let euler = gaussian_kld(truth, &m, &prec)?.per_variable_average;

    let prior =
        enif::simulators::matern1_oracle(cfg.kappa, &prob.positions)?.sample(cfg.n, seed)?;
    let map = fit_affine_kr(&prior, &chain_graph(p))?;
    let (m, prec) = prob.condition_sparse(&map.mean, &map.precision())?;
    let enif = gaussian_kld(truth, &m, &prec)?.per_variable_average;

    let (m, cov) = prob.condition_dense(&prior.mean(), &prior.sample_cov()?)?;
    let es = gaussian_kld_dense(&truth.mean, &truth.cov, &m, &cov)
        .map(|r| r.per_variable_average)
        .unwrap_or(f64::INFINITY);

    Ok(ResolutionRow { p, euler, enif, es })
}

pub fn run(cfg: &ResolutionConfig, seed: u64) -> LabResult<Vec<ResolutionRow>> {
    let mut rows: Vec<ResolutionRow> = cfg
        .resolutions
        .par_iter()
        .map(|&p| run_one(cfg, p, super::sub_seed(seed, p as u64, 0)))
        .collect::<LabResult<_>>()?;
    rows.sort_by_key(|r| r.p);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_resolution_gives_three_finite_values() {
        let cfg = ResolutionConfig {
            resolutions: vec![8],
            length: 7.0,
            ..Default::default()
        };
        let rows = run(&cfg, 1).unwrap();
        assert_eq!(rows.len(), 1);
        let r = rows[0];
        assert!(r.euler.is_finite() && r.enif.is_finite() && r.es.is_finite());
        assert!(r.euler >= 0.0 && r.enif >= 0.0 && r.es >= 0.0);
    }

    #[test]
    fn coarse_grid_on_long_domain_is_unstable() {
        let cfg = ResolutionConfig {
            resolutions: vec![8],
            ..Default::default()
        };
        assert!(matches!(
            run(&cfg, 1),
            Err(crate::LabError::Numerical(enif::Error::UnstableStep { .. }))
        ));
    }
}
