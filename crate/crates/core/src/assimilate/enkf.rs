use super::{ObservationSpec, UpdateResult};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::evaluate::update_summary;
use crate::regress::HMethod;
use nalgebra::DMatrix;

/// How `Σ̂_{u,d}` or `K̂` is tapered.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Localisation {
    #[default]
    None,
    /// Schur product of `Σ̂_{u,d}` with `exp(-c δ²)`; `distances` is `p x m`.
    Distance { c: f64, distances: DMatrix<f64> },
    /// Zero gain entries whose `|corr(u_j, d_k)|` is below the threshold.
    /// `None` means `3/√n`.
    Adaptive(Option<f64>),
}

/// Source of the innovation covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnovationCovariance {
    /// Sample covariance of the perturbed responses `D = Y + E`.
    #[default]
    Sampled,
    /// Sample covariance of `Y` plus the exact noise covariance `Λ_ε⁻¹`,
    /// with cross-covariance taken against `Y`.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnkfOptions {
    pub localisation: Localisation,
    pub innovation: InnovationCovariance,
}

fn centred(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    out
}

/// Stochastic ensemble Kalman (smoother) update with perturbed observations:
/// `u' = u + K̂ (d - y - ε)`, `K̂ = Σ̂_{u,d} Σ̂_d⁻¹`.
pub fn enkf_update(
    prior: &Ensemble,
    obs: &ObservationSpec,
    opts: &EnkfOptions,
) -> Result<UpdateResult> {
    let (n, p, m) = (prior.n(), prior.p(), obs.m());
    if n < 2 {
        return Err(Error::InvalidInput(
            "EnKF needs at least two members".into(),
        ));
    }
    if obs.n() != n {
        return Err(Error::DimensionMismatch {
            context: "responses vs members",
            expected: n,
            found: obs.n(),
        });
    }
    if m == 0 {
        return Ok(UpdateResult {
            posterior: prior.clone(),
            posterior_prec: None,
            h: None,
            diagnostics: update_summary(prior, prior)?,
            precision_identity_residual: None,
        });
    }
    if opts.innovation == InnovationCovariance::Sampled && m > n - 1 {
        return Err(Error::SingularInnovationCovariance {
            observations: m,
            members: n,
        });
    }
    let dmat = &obs.responses + &obs.noise_draws;
    let a = prior.anomalies();
    let scale = 1.0 / (n as f64 - 1.0);
    let (mut cross, innov) = match opts.innovation {
        InnovationCovariance::Sampled => {
            let b = centred(&dmat);
            (a.transpose() * &b * scale, b.transpose() * &b * scale)
        }
        InnovationCovariance::Analytic => {
            let b = centred(&obs.responses);
            let mut s = b.transpose() * &b * scale;
            s += super::gaussian::dense_inverse(&obs.noise_prec)?;
            (a.transpose() * &b * scale, s)
        }
    };
    if let Localisation::Distance { c, distances } = &opts.localisation {
        if distances.nrows() != p || distances.ncols() != m {
            return Err(Error::DimensionMismatch {
                context: "localisation distances shape",
                expected: p * m,
                found: distances.nrows() * distances.ncols(),
            });
        }
        cross.zip_apply(distances, |s, dist| *s *= (-c * dist * dist).exp());
    }
    let chol = innov
        .clone()
        .cholesky()
        .ok_or(Error::SingularInnovationCovariance {
            observations: m,
            members: n,
        })?;
    // K = Σ_ud Σ_d⁻¹, solved as Σ_d Kᵀ = Σ_udᵀ.
    let mut gain = chol.solve(&cross.transpose()).transpose();
    if let Localisation::Adaptive(tau) = &opts.localisation {
        let tau = tau.unwrap_or(3.0 / (n as f64).sqrt());
        let b = centred(&dmat);
        let su: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
        let sd: Vec<f64> = b.column_iter().map(|c| c.norm()).collect();
        let raw = a.transpose() * &b;
        for j in 0..p {
            for k in 0..m {
                let denom = su[j] * sd[k];
                let corr = if denom > 0.0 {
                    raw[(j, k)] / denom
                } else {
                    0.0
                };
                if corr.abs() < tau {
                    gain[(j, k)] = 0.0;
                }
            }
        }
    }
    let d = nalgebra::RowDVector::from_row_slice(&obs.d);
    let mut innovations = -dmat;
    for mut row in innovations.row_iter_mut() {
        row += &d;
    }
    let post = prior.data() + innovations * gain.transpose();
    let posterior = Ensemble::new(post)?;
    let h = match &obs.h {
        HMethod::Known(h) => Some(h.clone()),
        _ => None,
    };
    Ok(UpdateResult {
        diagnostics: update_summary(prior, &posterior)?,
        posterior,
        posterior_prec: None,
        h,
        precision_identity_residual: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assimilate::{enif_update, ObservationSpec};
    use crate::graph::CIGraph;
    use crate::simulators::ar1_oracle;
    use crate::sparse::{SparseMatrix, SparseSpd};
    use crate::transport::fit_affine_kr;

    fn setup() -> (Ensemble, ObservationSpec) {
        let prior = ar1_oracle(8, 0.7).unwrap().sample(40, 2).unwrap();
        let h = SparseMatrix::selection(8, &[2, 7]).unwrap();
        let obs = ObservationSpec::linear(
            &prior,
            h,
            vec![1.0, -1.0],
            SparseSpd::diagonal(&[2.0, 2.0]),
            3,
        )
        .unwrap();
        (prior, obs)
    }

    #[test]
    fn adaptive_zero_threshold_is_unlocalised() {
        let (prior, obs) = setup();
        let a = enkf_update(&prior, &obs, &EnkfOptions::default()).unwrap();
        let b = enkf_update(
            &prior,
            &obs,
            &EnkfOptions {
                localisation: Localisation::Adaptive(Some(0.0)),
                ..Default::default()
            },
        )
        .unwrap();
        assert!((a.posterior.data() - b.posterior.data()).amax() < 1e-14);
    }

    #[test]
    fn infinite_distance_penalty_freezes_unobserved() {
        let (prior, obs) = setup();
        let dist = DMatrix::from_fn(8, 2, |j, k| {
            let site = [2.0, 7.0][k];
            (j as f64 - site).abs()
        });
        let res = enkf_update(
            &prior,
            &obs,
            &EnkfOptions {
                localisation: Localisation::Distance {
                    c: 1e6,
                    distances: dist,
                },
                ..Default::default()
            },
        )
        .unwrap();
        for j in [0, 1, 3, 4, 5, 6] {
            assert_eq!(res.posterior.variable(j), prior.variable(j));
        }
        assert_ne!(res.posterior.variable(2), prior.variable(2));
    }

    #[test]
    fn analytic_form_matches_dense_enif() {
        let (prior, obs) = setup();
        let map = fit_affine_kr(&prior, &CIGraph::complete(8)).unwrap();
        let a = enif_update(&prior, &map.precision(), &obs).unwrap();
        let b = enkf_update(
            &prior,
            &obs,
            &EnkfOptions {
                innovation: InnovationCovariance::Analytic,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((a.posterior.data() - b.posterior.data()).amax() < 1e-8);
    }

    #[test]
    fn too_many_observations_is_singular() {
        let prior = ar1_oracle(8, 0.7).unwrap().sample(4, 2).unwrap();
        let h = SparseMatrix::selection(8, &[0, 1, 2, 3, 4]).unwrap();
        let obs =
            ObservationSpec::linear(&prior, h, vec![0.0; 5], SparseSpd::identity(5), 1).unwrap();
        assert!(matches!(
            enkf_update(&prior, &obs, &EnkfOptions::default()),
            Err(Error::SingularInnovationCovariance { .. })
        ));
    }
}
