//! Parameter update of an anisotropic exponential field observed along its
//! diagonal, with `H` estimated from the ensemble.

use super::sub_seed;
use crate::config::{GrfConfig, NoiseMode};
use crate::error::LabResult;
use enif::assimilate::{enif_update, enkf_update, EnkfOptions, Localisation, ObservationSpec};
use enif::ensemble::normal_matrix;
use enif::evaluate::update_summary;
use enif::graph::lattice_graph;
use enif::regress::{estimate_h, HMethod, LassoOptions};
use enif::simulators::{GaussianOracle, Grf2d};
use enif::sparse::{SparseMatrix, SparseSpd};
use enif::transport::fit_affine_kr;
use enif::Ensemble;
use nalgebra::{DMatrix, DVector};

pub const METHODS: [&str; 4] = ["exact", "es", "es_adaptive", "enif"];

/// One synthetic assimilation problem on a `g x g` grid.
pub struct GrfProblem {
    pub g: usize,
    pub prior: Ensemble,
    pub oracle: GaussianOracle,
    /// Cells `r * g + r`.
    pub observed: Vec<usize>,
    pub d: Vec<f64>,
    pub responses: DMatrix<f64>,
    pub noise_prec: SparseSpd,
    pub noise_draws: DMatrix<f64>,
}

fn noise_var(cfg: &GrfConfig) -> f64 {
    match cfg.noise_mode {
        NoiseMode::Total => cfg.extra_obs_var + cfg.response_sd * cfg.response_sd,
        NoiseMode::Replace => cfg.extra_obs_var,
    }
}

/// Builds `replicates` problems from one joint draw of `(n + 1) * replicates`
/// fields; the last field of each block plays the truth.
pub fn problems(
    cfg: &GrfConfig,
    g: usize,
    replicates: usize,
    seed: u64,
) -> LabResult<Vec<GrfProblem>> {
    let field = Grf2d::new(g, g, cfg.range_x, cfg.range_y, cfg.angle)?;
    let oracle = field.oracle()?;
    let block = cfg.n + 1;
    let all = oracle.sample(block * replicates, sub_seed(seed, g as u64, 0))?;
    let observed: Vec<usize> = (0..g).map(|r| r * g + r).collect();
    let var = noise_var(cfg);
    (0..replicates)
        .map(|b| {
            let rows: Vec<usize> = (b * block..(b + 1) * block).collect();
            let fields = all.select_rows(&rows);
            let prior = fields.select_rows(&(0..cfg.n).collect::<Vec<_>>());
            let truth = fields.member(cfg.n);
            let z = normal_matrix(sub_seed(seed, g as u64, 1 + 3 * b as u64), block, g)
                * cfg.response_sd;
            let responses =
                DMatrix::from_fn(cfg.n, g, |i, k| prior.data()[(i, observed[k])] + z[(i, k)]);
            let eps =
                normal_matrix(sub_seed(seed, g as u64, 2 + 3 * b as u64), block, g) * var.sqrt();
            let d = (0..g)
                .map(|k| truth[observed[k]] + z[(cfg.n, k)] + eps[(cfg.n, k)])
                .collect();
            Ok(GrfProblem {
                g,
                prior,
                oracle: oracle.clone(),
                observed: observed.clone(),
                d,
                responses,
                noise_prec: SparseSpd::identity(g).scale(1.0 / var),
                noise_draws: eps.rows(0, cfg.n).into_owned(),
            })
        })
        .collect()
}

impl GrfProblem {
    pub fn observation(&self, h: HMethod) -> LabResult<ObservationSpec> {
        Ok(ObservationSpec::new(
            self.d.clone(),
            self.responses.clone(),
            h,
            self.noise_prec.clone(),
            self.noise_draws.clone(),
        )?)
    }

    fn true_h(&self) -> LabResult<SparseMatrix> {
        Ok(SparseMatrix::selection(self.g * self.g, &self.observed)?)
    }

    /// Members moved with the gain of the exact prior covariance.
    pub fn exact_posterior(&self) -> LabResult<Ensemble> {
        let cov = &self.oracle.cov;
        let sel =
            |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), self.g, |i, k| m[(i, self.observed[k])]);
        let sigma_ud = sel(cov);
        let noise_cov = self
            .noise_prec
            .to_dense()
            .try_inverse()
            .expect("diagonal noise precision");
        let s =
            DMatrix::from_fn(self.g, self.g, |a, b| sigma_ud[(self.observed[a], b)]) + noise_cov;
        let gain_t = s
            .cholesky()
            .ok_or(enif::Error::SingularInnovationCovariance {
                observations: self.g,
                members: self.prior.n(),
            })?
            .solve(&sigma_ud.transpose());
        let innov = DMatrix::from_fn(self.prior.n(), self.g, |i, k| {
            self.d[k] - self.responses[(i, k)] - self.noise_draws[(i, k)]
        });
        Ok(Ensemble::new(self.prior.data() + innov * gain_t)?)
    }
}

/// Mean updates and `H` diagnostics of one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GrfOutcome {
    /// Per method (see [`METHODS`]), row-major `g x g`.
    pub mean_updates: Vec<Vec<f64>>,
    pub h_support: usize,
    pub h_true_positives: usize,
}

/// Share of squared mean update on cells with `|row - col| > band`.
pub fn off_diagonal_energy(map: &[f64], g: usize, band: usize) -> f64 {
    let (mut off, mut total) = (0.0, 0.0);
    for r in 0..g {
        for c in 0..g {
            let e = map[r * g + c].powi(2);
            total += e;
            if r.abs_diff(c) > band {
                off += e;
            }
        }
    }
    if total > 0.0 {
        off / total
    } else {
        0.0
    }
}

/// Support size and true positives of a fitted `H` against the diagonal
/// selection.
pub fn support_stats(h: &SparseMatrix, observed: &[usize]) -> (usize, usize) {
    let tp = h
        .triplets()
        .filter(|&(k, j, v)| v != 0.0 && observed[k] == j)
        .count();
    (h.triplets().filter(|t| t.2 != 0.0).count(), tp)
}

pub fn run_problem(cfg: &GrfConfig, prob: &GrfProblem) -> LabResult<GrfOutcome> {
    let g = prob.g;
    let mean_update = |post: &Ensemble| -> LabResult<Vec<f64>> {
        Ok(update_summary(&prob.prior, post)?.mean_update)
    };

    let exact = prob.exact_posterior()?;
    let lasso = HMethod::MonotoneLasso(LassoOptions::default());
    let es = enkf_update(
        &prob.prior,
        &prob.observation(lasso.clone())?,
        &EnkfOptions::default(),
    )?;
    let es_adaptive = enkf_update(
        &prob.prior,
        &prob.observation(lasso.clone())?,
        &EnkfOptions {
            localisation: Localisation::Adaptive(None),
            ..Default::default()
        },
    )?;
    let prec =
        fit_affine_kr(&prob.prior, &lattice_graph(g, g, cfg.neighborhood.into()))?.precision();
    let enif = enif_update(&prob.prior, &prec, &prob.observation(lasso)?)?;
    let h = enif
        .h
        .clone()
        .unwrap_or_else(|| prob.true_h().expect("selection is valid"));
    let (h_support, h_true_positives) = support_stats(&h, &prob.observed);

    Ok(GrfOutcome {
        mean_updates: vec![
            mean_update(&exact)?,
            mean_update(&es.posterior)?,
            mean_update(&es_adaptive.posterior)?,
            mean_update(&enif.posterior)?,
        ],
        h_support,
        h_true_positives,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub g: usize,
    pub outcomes: Vec<GrfOutcome>,
}

impl GridResult {
    /// Median over replicates of each method's off-diagonal energy fraction.
    pub fn median_energy(&self, band: usize) -> Vec<f64> {
        (0..METHODS.len())
            .map(|k| {
                let e: Vec<f64> = self
                    .outcomes
                    .iter()
                    .map(|o| off_diagonal_energy(&o.mean_updates[k], self.g, band))
                    .collect();
                super::median(&e)
            })
            .collect()
    }
}

pub fn run(cfg: &GrfConfig, seed: u64) -> LabResult<Vec<GridResult>> {
    cfg.grids
        .iter()
        .map(|&g| {
            let outcomes = problems(cfg, g, cfg.replicates, seed)?
                .iter()
                .map(|p| run_problem(cfg, p))
                .collect::<LabResult<_>>()?;
            Ok(GridResult { g, outcomes })
        })
        .collect()
}

/// Monotone-LASSO support on one problem: `(support, true positives)`.
pub fn lasso_support(prob: &GrfProblem) -> LabResult<(usize, usize)> {
    let est = estimate_h(
        &prob.prior,
        &prob.responses,
        &HMethod::MonotoneLasso(LassoOptions::default()),
    )?;
    Ok(support_stats(&est.h, &prob.observed))
}

/// Mean of the responses, used to build zero-innovation problems.
pub fn response_mean(prob: &GrfProblem) -> DVector<f64> {
    DVector::from_iterator(prob.g, prob.responses.column_iter().map(|c| c.mean()))
}
