//! Ensemble updates: the information-form update (EnIF), its multiple data
//! assimilation variant, and sample-covariance (EnKF/ES) baselines.

mod enkf;
mod gaussian;

pub use enkf::{enkf_update, EnkfOptions, InnovationCovariance, Localisation};
pub use gaussian::{condition_covariance, condition_precision};

use crate::ensemble::{member_rng, standard_normals, Ensemble};
use crate::error::{Error, Result};
use crate::evaluate::{update_summary, UpdateSummary};
use crate::regress::{estimate_h, HMethod};
use crate::sparse::{cholesky, fill_reducing_order, SparseMatrix, SparseSpd};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Observations and the simulated responses of the prior members.
#[derive(Debug, Clone)]
pub struct ObservationSpec {
    /// Observed values, length `m`.
    pub d: Vec<f64>,
    /// `n x m` responses `y⁽ⁱ⁾ = h(u⁽ⁱ⁾)`.
    pub responses: DMatrix<f64>,
    /// Known `H`, or how to estimate it from the ensemble.
    pub h: HMethod,
    /// Observation-noise precision `Λ_ε`.
    pub noise_prec: SparseSpd,
    /// `n x m` noise realisations `ε⁽ⁱ⁾`.
    pub noise_draws: DMatrix<f64>,
}

impl ObservationSpec {
    pub fn new(
        d: Vec<f64>,
        responses: DMatrix<f64>,
        h: HMethod,
        noise_prec: SparseSpd,
        noise_draws: DMatrix<f64>,
    ) -> Result<Self> {
        let m = d.len();
        let n = responses.nrows();
        if responses.ncols() != m {
            return Err(Error::DimensionMismatch {
                context: "responses columns vs observations",
                expected: m,
                found: responses.ncols(),
            });
        }
        if noise_prec.dim() != m {
            return Err(Error::DimensionMismatch {
                context: "noise precision vs observations",
                expected: m,
                found: noise_prec.dim(),
            });
        }
        if noise_draws.nrows() != n || noise_draws.ncols() != m {
            return Err(Error::DimensionMismatch {
                context: "noise draws shape",
                expected: n * m,
                found: noise_draws.nrows() * noise_draws.ncols(),
            });
        }
        if let HMethod::Known(h) = &h {
            if h.nrows() != m {
                return Err(Error::DimensionMismatch {
                    context: "known H rows vs observations",
                    expected: m,
                    found: h.nrows(),
                });
            }
        }
        Ok(Self {
            d,
            responses,
            h,
            noise_prec,
            noise_draws,
        })
    }

    /// Linear observation `y = H u` of every member with known `H`, and
    /// noise drawn from `noise_prec` under `seed`.
    pub fn linear(
        prior: &Ensemble,
        h: SparseMatrix,
        d: Vec<f64>,
        noise_prec: SparseSpd,
        seed: u64,
    ) -> Result<Self> {
        let responses = apply_rows(prior, &h)?;
        let noise = draw_noise(&noise_prec, prior.n(), seed)?;
        Self::new(d, responses, HMethod::Known(h), noise_prec, noise)
    }

    pub fn m(&self) -> usize {
        self.d.len()
    }

    pub fn n(&self) -> usize {
        self.responses.nrows()
    }
}

/// `n x m` matrix with rows `H u⁽ⁱ⁾`.
pub fn apply_rows(ens: &Ensemble, h: &SparseMatrix) -> Result<DMatrix<f64>> {
    if h.ncols() != ens.p() {
        return Err(Error::DimensionMismatch {
            context: "H columns vs state dimension",
            expected: ens.p(),
            found: h.ncols(),
        });
    }
    let mut out = DMatrix::zeros(ens.n(), h.nrows());
    for i in 0..ens.n() {
        let y = h.mul_vec(&ens.member(i))?;
        for (k, v) in y.into_iter().enumerate() {
            out[(i, k)] = v;
        }
    }
    Ok(out)
}

/// `n` draws from `N(0, prec⁻¹)`, member `i` from stream `i` of `seed`.
pub fn draw_noise(prec: &SparseSpd, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let m = prec.dim();
    if m == 0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    let f = cholesky(prec, &fill_reducing_order(prec)?)?;
    let mut out = DMatrix::zeros(n, m);
    for i in 0..n {
        let z = standard_normals(&mut member_rng(seed, i as u64), m);
        let e = f.whiten_inverse(&z)?;
        for (k, v) in e.into_iter().enumerate() {
            out[(i, k)] = v;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct UpdateResult {
    pub posterior: Ensemble,
    /// Posterior precision (information-form updates only).
    pub posterior_prec: Option<SparseSpd>,
    /// The `H` that was used, known or estimated.
    pub h: Option<SparseMatrix>,
    pub diagnostics: UpdateSummary,
    /// For multi-step updates: `max |Λ_K - (Λ + HᵀΛ_εH)|`.
    pub precision_identity_residual: Option<f64>,
}

fn diag_of_inverse(prec: &SparseSpd) -> Result<Vec<f64>> {
    let m = prec.dim();
    let diagonal = prec.triplets().all(|(i, j, _)| i == j);
    if diagonal {
        return Ok(prec.diagonal_values().iter().map(|v| 1.0 / v).collect());
    }
    let f = cholesky(prec, &fill_reducing_order(prec)?)?;
    (0..m)
        .map(|k| {
            let mut e = vec![0.0; m];
            e[k] = 1.0;
            Ok(f.solve(&e)?[k])
        })
        .collect()
}

/// Resolves `H` and the residual precision `Λ_r` for one update.
fn resolve_h(prior: &Ensemble, obs: &ObservationSpec) -> Result<(SparseMatrix, SparseSpd)> {
    match &obs.h {
        HMethod::Known(h) => {
            if h.ncols() != prior.p() {
                return Err(Error::DimensionMismatch {
                    context: "known H columns vs state dimension",
                    expected: prior.p(),
                    found: h.ncols(),
                });
            }
            Ok((h.clone(), obs.noise_prec.clone()))
        }
        method => {
            let est = estimate_h(prior, &obs.responses, method)?;
            let noise_var = diag_of_inverse(&obs.noise_prec)?;
            let lr: Vec<f64> = est
                .residual_var
                .iter()
                .zip(&noise_var)
                .map(|(r, e)| 1.0 / (r + e))
                .collect();
            Ok((est.h, SparseSpd::diagonal(&lr)))
        }
    }
}

/// Information-form ensemble update.
///
/// Each member is mapped to canonical coordinates `η = Λu`, shifted by
/// `HᵀΛ_r (d - r)` with the noisy residual `r = y - Hu + ε`, and mapped back
/// through the updated precision `Λ + HᵀΛ_rH`. With known linear `H` the
/// residual precision is `Λ_ε`; with estimated `H` it is the diagonal
/// `1 / (residual variance + noise variance)`.
pub fn enif_update(
    prior: &Ensemble,
    prior_prec: &SparseSpd,
    obs: &ObservationSpec,
) -> Result<UpdateResult> {
    let (n, p) = (prior.n(), prior.p());
    if prior_prec.dim() != p {
        return Err(Error::DimensionMismatch {
            context: "prior precision vs state dimension",
            expected: p,
            found: prior_prec.dim(),
        });
    }
    if obs.n() != n {
        return Err(Error::DimensionMismatch {
            context: "responses vs members",
            expected: n,
            found: obs.n(),
        });
    }
    if obs.m() == 0 {
        return Ok(UpdateResult {
            posterior: prior.clone(),
            posterior_prec: Some(prior_prec.clone()),
            h: Some(SparseMatrix::zeros(0, p)),
            diagnostics: update_summary(prior, prior)?,
            precision_identity_residual: None,
        });
    }
    let (h, lr) = resolve_h(prior, obs)?;
    let post_prec = prior_prec.add(&h.gram_weighted(&lr)?)?;
    let perm = fill_reducing_order(&post_prec)?;
    let factor = cholesky(&post_prec, &perm)?;

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let u = prior.member(i);
            let mut eta = prior_prec.mul_vec(&u)?;
            let hu = h.mul_vec(&u)?;
            let dt: Vec<f64> = (0..obs.m())
                .map(|k| obs.d[k] - (obs.responses[(i, k)] - hu[k] + obs.noise_draws[(i, k)]))
                .collect();
            let shift = h.tr_mul_vec(&lr.mul_vec(&dt)?)?;
            eta.iter_mut().zip(shift).for_each(|(a, b)| *a += b);
            factor.solve(&eta)
        })
        .collect::<Result<_>>()?;
    let posterior = Ensemble::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))?;
    Ok(UpdateResult {
        diagnostics: update_summary(prior, &posterior)?,
        posterior,
        posterior_prec: Some(post_prec),
        h: Some(h),
        precision_identity_residual: None,
    })
}

/// Update of a time-stacked state whose precision carries the temporal
/// block structure. Same algebra as [`enif_update`].
pub fn smoother_update(
    prior: &Ensemble,
    prior_prec: &SparseSpd,
    obs: &ObservationSpec,
) -> Result<UpdateResult> {
    enif_update(prior, prior_prec, obs)
}

fn step_seed(seed: u64, step: usize) -> u64 {
    seed.wrapping_add((step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Forward model recomputing responses from an updated ensemble.
pub type ForwardModel<'a> = &'a (dyn Fn(&Ensemble) -> Result<DMatrix<f64>> + Sync);

/// Multiple data assimilation in information form.
///
/// Step `k` assimilates the same data with noise precision `α_k Λ_ε`. The
/// first step rescales the supplied noise draws by `1/√α_1`; later steps
/// draw fresh noise from streams derived from `seed`. Responses are
/// recomputed with `forward` (or `H u` when `H` is known and no model is
/// given). For the precision update the weights must sum to one, which
/// makes the final precision equal to the single-step one in the linear
/// case; the residual of that identity is reported.
pub fn enif_mda(
    prior: &Ensemble,
    prior_prec: &SparseSpd,
    obs: &ObservationSpec,
    alphas: &[f64],
    forward: Option<ForwardModel<'_>>,
    seed: u64,
) -> Result<UpdateResult> {
    let sum: f64 = alphas.iter().sum();
    if alphas.is_empty() || alphas.iter().any(|&a| !(a > 0.0)) || (sum - 1.0).abs() > 1e-12 {
        return Err(Error::WeightsNotNormalised { sum });
    }
    let known = match &obs.h {
        HMethod::Known(h) => Some(h.clone()),
        _ => None,
    };
    let mut ens = prior.clone();
    let mut prec = prior_prec.clone();
    let mut last_h = None;
    for (k, &alpha) in alphas.iter().enumerate() {
        let responses = if k == 0 {
            obs.responses.clone()
        } else if let Some(f) = forward {
            f(&ens)?
        } else if let Some(h) = &known {
            apply_rows(&ens, h)?
        } else {
            return Err(Error::InvalidInput(
                "multi-step update with estimated H needs a forward model".into(),
            ));
        };
        let noise_prec = obs.noise_prec.scale(alpha);
        let noise_draws = if k == 0 {
            &obs.noise_draws / alpha.sqrt()
        } else {
            draw_noise(&noise_prec, ens.n(), step_seed(seed, k))?
        };
        let step_obs = ObservationSpec::new(
            obs.d.clone(),
            responses,
            obs.h.clone(),
            noise_prec,
            noise_draws,
        )?;
        let res = enif_update(&ens, &prec, &step_obs)?;
        ens = res.posterior;
        prec = res
            .posterior_prec
            .expect("information update returns a precision");
        last_h = res.h;
    }
    let residual = match &known {
        Some(h) => {
            let single = prior_prec.add(&h.gram_weighted(&obs.noise_prec)?)?;
            Some((prec.to_dense() - single.to_dense()).amax())
        }
        None => None,
    };
    Ok(UpdateResult {
        diagnostics: update_summary(prior, &ens)?,
        posterior: ens,
        posterior_prec: Some(prec),
        h: last_h,
        precision_identity_residual: residual,
    })
}
