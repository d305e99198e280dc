use super::GaussianOracle;
use crate::ensemble::{member_rng, standard_normals, Ensemble};
use crate::error::{Error, Result};
use crate::sparse::SparseSpd;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Stationary AR-1 process `u_t = φ u_{t-1} + ε_t`, `ε_t ~ N(0, q)`,
/// observed over `p` consecutive steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1 {
    pub p: usize,
    pub phi: f64,
    pub innovation_var: f64,
}

impl Ar1 {
    pub fn new(p: usize, phi: f64, innovation_var: f64) -> Result<Self> {
        if !(phi.abs() < 1.0) {
            return Err(Error::NonStationary(phi));
        }
        if !(innovation_var > 0.0) {
            return Err(Error::InvalidInput(format!(
                "innovation variance must be positive, got {innovation_var}"
            )));
        }
        Ok(Self {
            p,
            phi,
            innovation_var,
        })
    }

    pub fn stationary_var(&self) -> f64 {
        self.innovation_var / (1.0 - self.phi * self.phi)
    }

    /// Tridiagonal precision: `1, 1+φ², …, 1+φ², 1` on the diagonal and `-φ`
    /// beside it, divided by the innovation variance.
    pub fn precision(&self) -> SparseSpd {
        let (p, phi, q) = (self.p, self.phi, self.innovation_var);
        let mut t = Vec::with_capacity(2 * p);
        for i in 0..p {
            let d = if p == 1 {
                1.0 - phi * phi
            } else if i == 0 || i == p - 1 {
                1.0
            } else {
                1.0 + phi * phi
            };
            t.push((i, i, d / q));
            if i > 0 {
                t.push((i, i - 1, -phi / q));
            }
        }
        SparseSpd::from_triplets(p, t).expect("indices are in range")
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let v = self.stationary_var();
        DMatrix::from_fn(self.p, self.p, |i, j| {
            v * self.phi.powi(i.abs_diff(j) as i32)
        })
    }

    pub fn oracle(&self) -> GaussianOracle {
        GaussianOracle {
            mean: DVector::zeros(self.p),
            cov: self.covariance(),
            prec: Some(self.precision()),
        }
    }

    /// Runs the recursion from the stationary distribution, one member per
    /// random stream.
    pub fn sample(&self, n: usize, seed: u64) -> Ensemble {
        let sd0 = self.stationary_var().sqrt();
        let sq = self.innovation_var.sqrt();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let z = standard_normals(&mut member_rng(seed, i as u64), self.p);
                let mut u = Vec::with_capacity(self.p);
                let mut prev = 0.0;
                for (t, zt) in z.into_iter().enumerate() {
                    prev = if t == 0 {
                        sd0 * zt
                    } else {
                        self.phi * prev + sq * zt
                    };
                    u.push(prev);
                }
                u
            })
            .collect();
        if n == 0 {
            return Ensemble::new(DMatrix::zeros(0, self.p)).expect("empty is finite");
        }
        Ensemble::from_rows(&rows).expect("AR-1 draws are finite")
    }
}

/// AR-1 with unit innovation variance.
pub fn ar1_oracle(p: usize, phi: f64) -> Result<GaussianOracle> {
    Ok(Ar1::new(p, phi, 1.0)?.oracle())
}

pub fn ar1_sample(p: usize, phi: f64, n: usize, seed: u64) -> Result<Ensemble> {
    Ok(Ar1::new(p, phi, 1.0)?.sample(n, seed))
}

/// Euler-Maruyama discretisation of `dX = -X/κ dt + dW` over `steps` points:
/// an AR-1 with `φ = 1 - dt/κ` and innovation variance `dt`, started in its
/// stationary distribution.
pub fn ou_euler(kappa: f64, dt: f64, steps: usize) -> Result<Ar1> {
    if !(dt > 0.0 && dt <= kappa) {
        return Err(Error::UnstableStep { dt, kappa });
    }
    Ar1::new(steps, 1.0 - dt / kappa, dt)
}

pub fn ou_euler_sample(
    kappa: f64,
    dt: f64,
    steps: usize,
    n: usize,
    seed: u64,
) -> Result<(Ensemble, Ar1)> {
    let model = ou_euler(kappa, dt, steps)?;
    Ok((model.sample(n, seed), model))
}

/// Exponential (Matérn ν=1/2) covariance `κ/2 · exp(-|h|/κ)`.
pub fn matern1_cov(kappa: f64, h: f64) -> f64 {
    0.5 * kappa * (-h.abs() / kappa).exp()
}

/// Exact Matérn-1 (Ornstein-Uhlenbeck) law at sorted positions.
///
/// The process is Markov, so the precision is tridiagonal and follows from
/// the conditionals `u_i | u_{i-1} ~ N(φ_i u_{i-1}, v(1-φ_i²))` with
/// `φ_i = exp(-(x_i - x_{i-1})/κ)` and `v = κ/2`.
pub fn matern1_oracle(kappa: f64, positions: &[f64]) -> Result<GaussianOracle> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidInput(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    if positions.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(
            "positions must be strictly increasing".into(),
        ));
    }
    let p = positions.len();
    let v = 0.5 * kappa;
    let phi: Vec<f64> = (0..p)
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                (-(positions[i] - positions[i - 1]) / kappa).exp()
            }
        })
        .collect();
    let cond_var = |i: usize| v * (1.0 - phi[i] * phi[i]);
    let mut t = Vec::with_capacity(2 * p);
    for i in 0..p {
        let mut d = 1.0 / cond_var(i);
        if i + 1 < p {
            d += phi[i + 1] * phi[i + 1] / cond_var(i + 1);
        }
        t.push((i, i, d));
        if i > 0 {
            t.push((i, i - 1, -phi[i] / cond_var(i)));
        }
    }
    let prec = SparseSpd::from_triplets(p, t)?;
    let cov = DMatrix::from_fn(p, p, |i, j| matern1_cov(kappa, positions[i] - positions[j]));
    Ok(GaussianOracle {
        mean: DVector::zeros(p),
        cov,
        prec: Some(prec),
    })
}

/// Closed-form Kalman gain for a noisy point observation of a Matérn-1
/// process at `obs`: `κ e^{-|obs-x|/κ} / (κ + 2σ²)` for every `x`.
pub fn matern1_exact_gain(kappa: f64, sigma_eps: f64, positions: &[f64], obs: f64) -> Vec<f64> {
    positions
        .iter()
        .map(|&x| kappa * (-(obs - x).abs() / kappa).exp() / (kappa + 2.0 * sigma_eps * sigma_eps))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ar1_golden_precision() {
        let o = ar1_oracle(3, 0.5).unwrap();
        let expect =
            DMatrix::from_row_slice(3, 3, &[1.0, -0.5, 0.0, -0.5, 1.25, -0.5, 0.0, -0.5, 1.0]);
        assert_relative_eq!(o.prec.as_ref().unwrap().to_dense(), expect, epsilon = 1e-15);
    }

    #[test]
    fn ar1_white_noise_and_far_covariance() {
        let o = ar1_oracle(4, 0.0).unwrap();
        assert_relative_eq!(o.cov, DMatrix::identity(4, 4));
        assert_relative_eq!(o.prec.unwrap().to_dense(), DMatrix::identity(4, 4));
        let o = ar1_oracle(10, 0.9).unwrap();
        assert_relative_eq!(
            o.cov[(0, 9)],
            0.9f64.powi(9) / (1.0 - 0.81),
            epsilon = 1e-12
        );
        assert!(ar1_oracle(3, 1.0).is_err());
    }

    #[test]
    fn oracle_cov_times_prec_is_identity() {
        for phi in [0.0, 0.3, -0.7, 0.99] {
            let o = Ar1::new(200, phi, 0.37).unwrap().oracle();
            o.check_consistency(1e-8).unwrap();
        }
        let pos: Vec<f64> = (0..50).map(|i| (i as f64).powf(1.3) * 0.1).collect();
        matern1_oracle(0.7, &pos)
            .unwrap()
            .check_consistency(1e-8)
            .unwrap();
    }

    #[test]
    fn ou_euler_phi() {
        assert_relative_eq!(ou_euler(1.0, 0.1, 5).unwrap().phi, 0.9, epsilon = 1e-15);
        assert_eq!(ou_euler(2.0, 2.0, 5).unwrap().phi, 0.0);
        assert!(matches!(
            ou_euler(1.0, 1.5, 5),
            Err(Error::UnstableStep { .. })
        ));
    }

    #[test]
    fn ou_sample_variance() {
        let (e, m) = ou_euler_sample(1.0, 0.01, 100, 5000, 3).unwrap();
        let c = e.sample_cov().unwrap();
        let v = m.stationary_var();
        for j in [0, 50, 99] {
            assert!(
                (c[(j, j)] / v - 1.0).abs() < 0.05,
                "var {} vs {v}",
                c[(j, j)]
            );
        }
    }

    #[test]
    fn ar1_sample_lag_correlation() {
        let e = ar1_sample(10, 0.5, 10_000, 11).unwrap();
        let c = e.sample_cov().unwrap();
        for j in 0..9 {
            let r = c[(j, j + 1)] / (c[(j, j)] * c[(j + 1, j + 1)]).sqrt();
            assert!((r - 0.5).abs() < 0.02, "lag-1 correlation {r}");
        }
        let e = ar1_sample(5, 0.0, 10_000, 12).unwrap();
        let c = e.sample_cov().unwrap();
        for i in 0..5 {
            for j in 0..i {
                let r = c[(i, j)] / (c[(i, i)] * c[(j, j)]).sqrt();
                assert!(r.abs() < 0.03);
            }
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        assert_eq!(
            ar1_sample(7, 0.4, 5, 1).unwrap(),
            ar1_sample(7, 0.4, 5, 1).unwrap()
        );
        let e = ar1_sample(7, 0.4, 2, 1).unwrap();
        assert_ne!(e.member(0), e.member(1));
    }

    #[test]
    fn exact_gain_values() {
        let g = matern1_exact_gain(1.0, 0.0, &[3.0], 3.0);
        assert_relative_eq!(g[0], 1.0);
        let g = matern1_exact_gain(0.1, 1.0, &[0.9], 1.0);
        assert_relative_eq!(g[0], 0.1 * (-1.0f64).exp() / 2.1, epsilon = 1e-15);
        let g = matern1_exact_gain(0.1, 1.0, &[1e4], 0.0);
        assert!(g[0] < 1e-300);
    }

    #[test]
    fn matern_oracle_on_unit_grid_matches_ou_half_exp() {
        let pos: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
        let o = matern1_oracle(1.0, &pos).unwrap();
        assert_relative_eq!(o.cov[(0, 3)], 0.5 * (-0.15f64).exp(), epsilon = 1e-15);
    }
}
