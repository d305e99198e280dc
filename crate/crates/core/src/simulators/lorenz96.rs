use crate::ensemble::{normal_matrix, Ensemble};
use crate::error::{Error, Result};
use crate::graph::Scheme;
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Lorenz-96 configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lorenz96 {
    pub m: usize,
    pub forcing: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
}

impl Default for Lorenz96 {
    fn default() -> Self {
        Self {
            m: 40,
            forcing: 8.0,
            dt: 0.01,
            t_end: 4.0,
            scheme: Scheme::Rk4,
        }
    }
}

/// `dx_j/dt = (x_{j+1} - x_{j-2}) x_{j-1} - x_j + F` with cyclic indices.
pub fn lorenz96_rhs(x: &[f64], forcing: f64, out: &mut [f64]) {
    let m = x.len();
    for j in 0..m {
        let xp1 = x[(j + 1) % m];
        let xm1 = x[(j + m - 1) % m];
        let xm2 = x[(j + m - 2) % m];
        out[j] = (xp1 - xm2) * xm1 - x[j] + forcing;
    }
}

fn integrate_member(x: &mut [f64], forcing: f64, dt: f64, steps: usize, scheme: Scheme) {
    let m = x.len();
    let mut k1 = vec![0.0; m];
    match scheme {
        Scheme::Euler => {
            for _ in 0..steps {
                lorenz96_rhs(x, forcing, &mut k1);
                x.iter_mut().zip(&k1).for_each(|(xi, ki)| *xi += dt * ki);
            }
        }
        Scheme::Rk4 => {
            let (mut k2, mut k3, mut k4) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
            let mut tmp = vec![0.0; m];
            for _ in 0..steps {
                lorenz96_rhs(x, forcing, &mut k1);
                for j in 0..m {
                    tmp[j] = x[j] + 0.5 * dt * k1[j];
                }
                lorenz96_rhs(&tmp, forcing, &mut k2);
                for j in 0..m {
                    tmp[j] = x[j] + 0.5 * dt * k2[j];
                }
                lorenz96_rhs(&tmp, forcing, &mut k3);
                for j in 0..m {
                    tmp[j] = x[j] + dt * k3[j];
                }
                lorenz96_rhs(&tmp, forcing, &mut k4);
                for j in 0..m {
                    x[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                }
            }
        }
    }
}

/// Integrates every member of `init` independently up to `t_end`.
pub fn lorenz96_integrate(
    init: &Ensemble,
    forcing: f64,
    dt: f64,
    t_end: f64,
    scheme: Scheme,
) -> Result<Ensemble> {
    if init.p() < 4 {
        return Err(Error::TooFewStates {
            m: init.p(),
            min: 4,
            scheme: "lorenz96",
        });
    }
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "need dt > 0 and t_end >= 0 (dt={dt}, t_end={t_end})"
        )));
    }
    let steps = (t_end / dt).round() as usize;
    let rows: Vec<Vec<f64>> = (0..init.n())
        .into_par_iter()
        .map(|i| {
            let mut x = init.member(i);
            integrate_member(&mut x, forcing, dt, steps, scheme);
            x
        })
        .collect();
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lorenz96 integration"));
    }
    let p = init.p();
    Ensemble::new(DMatrix::from_fn(init.n(), p, |i, j| rows[i][j]))
}

/// `n` i.i.d. members: start each at `0.01 z` and keep the state at `t_end`.
pub fn lorenz96_ensemble(cfg: &Lorenz96, n: usize, seed: u64) -> Result<Ensemble> {
    let init = Ensemble::new(normal_matrix(seed, n, cfg.m) * 0.01)?;
    lorenz96_integrate(&init, cfg.forcing, cfg.dt, cfg.t_end, cfg.scheme)
}
