//! Endpoint conditioning of AR-1 ensembles at several dependence strengths.

use super::{median, sub_seed};
use crate::config::DependenceConfig;
use crate::error::LabResult;
use enif::assimilate::{enif_update, enkf_update, EnkfOptions, ObservationSpec};
use enif::graph::chain_graph;
use enif::simulators::Ar1;
use enif::sparse::{SparseMatrix, SparseSpd};
use enif::transport::fit_affine_kr;
use rayon::prelude::*;

/// First-member updates of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub exact: Vec<f64>,
    pub enif: Vec<f64>,
    pub es: Vec<f64>,
}

/// L2 deviation of the first member's update from the exact update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub enif: f64,
    pub es: f64,
    /// Same, excluding the observed endpoint.
    pub enif_interior: f64,
    pub es_interior: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiResult {
    pub phi: f64,
    pub deviations: Vec<Deviation>,
    pub trace: Trace,
}

impl PhiResult {
    pub fn median_enif(&self) -> f64 {
        median(&self.deviations.iter().map(|d| d.enif).collect::<Vec<_>>())
    }

    pub fn median_es(&self) -> f64 {
        median(&self.deviations.iter().map(|d| d.es).collect::<Vec<_>>())
    }
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn run_replicate(cfg: &DependenceConfig, phi: f64, seed: u64) -> LabResult<(Deviation, Trace)> {
    let p = cfg.p;
    let model = Ar1::new(p, phi, 1.0)?;
    let prior = model.sample(cfg.n, seed);
    let obs = ObservationSpec::linear(
        &prior,
        SparseMatrix::selection(p, &[p - 1])?,
        vec![cfg.obs_value],
        SparseSpd::diagonal(&[1.0 / (cfg.obs_sd * cfg.obs_sd)]),
        seed ^ 0xA5A5_A5A5,
    )?;
    let exact = enif_update(&prior, &model.precision(), &obs)?;
    let fitted = fit_affine_kr(&prior, &chain_graph(p))?.precision();
    let enif = enif_update(&prior, &fitted, &obs)?;
    let es = enkf_update(&prior, &obs, &EnkfOptions::default())?;

    let u0 = prior.member(0);
    let update = |post: &enif::Ensemble| -> Vec<f64> {
        post.member(0).iter().zip(&u0).map(|(a, b)| a - b).collect()
    };
    let trace = Trace {
        exact: update(&exact.posterior),
        enif: update(&enif.posterior),
        es: update(&es.posterior),
    };
    let dev = Deviation {
        enif: l2(&trace.enif, &trace.exact),
        es: l2(&trace.es, &trace.exact),
        enif_interior: l2(&trace.enif[..p - 1], &trace.exact[..p - 1]),
        es_interior: l2(&trace.es[..p - 1], &trace.exact[..p - 1]),
    };
    Ok((dev, trace))
}

pub fn run(cfg: &DependenceConfig, seed: u64) -> LabResult<Vec<PhiResult>> {
    cfg.phis
        .iter()
        .enumerate()
        .map(|(k, &phi)| {
            let reps: Vec<(Deviation, Trace)> = (0..cfg.replicates)
                .into_par_iter()
                .map(|r| run_replicate(cfg, phi, sub_seed(seed, k as u64, r as u64)))
                .collect::<LabResult<_>>()?;
            let trace = reps[0].1.clone();
            Ok(PhiResult {
                phi,
                deviations: reps.into_iter().map(|(d, _)| d).collect(),
                trace,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_prior_updates_only_the_endpoint() {
        let cfg = DependenceConfig {
            p: 10,
            ..Default::default()
        };
        let (_, trace) = run_replicate(&cfg, 0.0, 3).unwrap();
        assert!(trace.exact[..9].iter().all(|v| v.abs() < 1e-12));
        assert!(trace.exact[9].abs() > 0.0);
    }

    #[test]
    fn exact_update_decays_geometrically() {
        let cfg = DependenceConfig {
            p: 30,
            ..Default::default()
        };
        let (_, trace) = run_replicate(&cfg, 0.95, 4).unwrap();
        for k in 1..10 {
            let ratio = trace.exact[29 - k] / trace.exact[29 - k + 1];
            assert!((ratio - 0.95).abs() < 1e-8, "{ratio}");
        }
    }
}
