//! Markov-order selection for Lorenz-96 ensembles by held-out likelihood.

use super::sub_seed;
use crate::config::LorenzConfig;
use crate::error::LabResult;
use enif::evaluate::{argmin_test, nll_curve, NllPoint};
use enif::graph::{circular_markov_graph, CIGraph};
use enif::simulators::{lorenz96_ensemble, Lorenz96};
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct LorenzRun {
    pub replicate: usize,
    pub n: usize,
    /// Point `k` is Markov order `k + 1`.
    pub curve: Vec<NllPoint>,
}

impl LorenzRun {
    pub fn argmin_order(&self) -> usize {
        argmin_test(&self.curve).map_or(0, |i| i + 1)
    }

    pub fn train_monotone(&self) -> bool {
        self.curve
            .windows(2)
            .all(|w| w[1].train_nll <= w[0].train_nll + 1e-9)
    }
}

pub fn model(cfg: &LorenzConfig) -> Lorenz96 {
    Lorenz96 {
        m: cfg.m,
        forcing: cfg.forcing,
        dt: cfg.dt,
        t_end: cfg.t_end,
        scheme: cfg.scheme.into(),
    }
}

pub fn run_one(
    cfg: &LorenzConfig,
    graphs: &[CIGraph],
    replicate: usize,
    n: usize,
    seed: u64,
) -> LabResult<LorenzRun> {
    let l96 = model(cfg);
    let train = lorenz96_ensemble(&l96, n, sub_seed(seed, replicate as u64, 2 * n as u64))?;
    let test = lorenz96_ensemble(&l96, n, sub_seed(seed, replicate as u64, 2 * n as u64 + 1))?;
    Ok(LorenzRun {
        replicate,
        n,
        curve: nll_curve(&train, &test, graphs)?,
    })
}

pub fn run(cfg: &LorenzConfig, seed: u64) -> LabResult<Vec<LorenzRun>> {
    let graphs: Vec<CIGraph> = (1..=cfg.max_order)
        .map(|k| circular_markov_graph(cfg.m, k))
        .collect::<enif::Result<_>>()?;
    let tasks: Vec<(usize, usize)> = (0..cfg.replicates)
        .flat_map(|r| cfg.sizes.iter().map(move |&n| (r, n)))
        .collect();
    tasks
        .into_par_iter()
        .map(|(r, n)| run_one(cfg, &graphs, r, n, seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_have_one_point_per_order() {
        let cfg = LorenzConfig {
            sizes: vec![60],
            max_order: 3,
            replicates: 1,
            t_end: 0.5,
            ..Default::default()
        };
        let runs = run(&cfg, 0).unwrap();
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].curve.len(), 3);
        assert!(runs[0].train_monotone());
        assert!((1..=3).contains(&runs[0].argmin_order()));
    }
}
