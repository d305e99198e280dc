//! Stochastic heat equation on a triangle mesh: assembly, the stacked-time
//! precision and a smoothing update from an observation at the final time.

use super::sub_seed;
use crate::config::FemConfig;
use crate::error::{LabError, LabResult};
use enif::assimilate::{draw_noise, smoother_update, ObservationSpec, UpdateResult};
use enif::simulators::{heat_model, HeatModel, Mesh, Mesh2d};
use enif::sparse::{cholesky, fill_reducing_order, SparseMatrix, SparseSpd};
use enif::Ensemble;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FemChecks {
    /// `max_i |Σ_j A_ij|`.
    pub stiffness_row_sum: f64,
    /// `max_i |Σ_j M_ij - M̃_ii|`.
    pub lumping_gap: f64,
    /// Every stored entry links a slice with itself or a neighbouring slice,
    /// and each pair of neighbouring slices is linked.
    pub block_tridiagonal: bool,
    pub precision_spd: bool,
}

pub struct FemResult {
    pub model: HeatModel,
    pub precision: SparseSpd,
    pub prior: Ensemble,
    pub update: UpdateResult,
    pub observed: Vec<usize>,
    pub checks: FemChecks,
}

pub fn mesh(cfg: &FemConfig) -> LabResult<Mesh> {
    match &cfg.mesh_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
            Ok(Mesh::D2(Mesh2d::parse(&text)?))
        }
        None => Ok(Mesh::D2(Mesh2d::rectangle(cfg.nx, cfg.ny, cfg.lx, cfg.ly))),
    }
}

/// Whether `prec` over `steps` slices of size `p` has temporal-block
/// tridiagonal structure.
pub fn is_block_tridiagonal(prec: &SparseSpd, p: usize, steps: usize) -> bool {
    let mut linked = vec![false; steps.saturating_sub(1)];
    for (i, j, v) in prec.triplets() {
        if v == 0.0 {
            continue;
        }
        let (a, b) = (i / p, j / p);
        match a.abs_diff(b) {
            0 => {}
            1 => linked[a.min(b)] = true,
            _ => return false,
        }
    }
    linked.iter().all(|&l| l)
}

pub fn checks(model: &HeatModel, prec: &SparseSpd, steps: usize) -> FemChecks {
    let a = model.fem.stiffness.to_general();
    let m = model.fem.mass.to_general();
    let row_sum = |s: &SparseMatrix, i: usize| s.row(i).map(|(_, v)| v).sum::<f64>();
    let p = model.p();
    let stiffness_row_sum = (0..p).map(|i| row_sum(&a, i).abs()).fold(0.0, f64::max);
    let lumping_gap = (0..p)
        .map(|i| (row_sum(&m, i) - model.fem.lumped[i]).abs())
        .fold(0.0, f64::max);
    let precision_spd = fill_reducing_order(prec)
        .and_then(|perm| cholesky(prec, &perm))
        .is_ok();
    FemChecks {
        stiffness_row_sum,
        lumping_gap,
        block_tridiagonal: is_block_tridiagonal(prec, p, steps),
        precision_spd,
    }
}

pub fn run(cfg: &FemConfig, seed: u64) -> LabResult<FemResult> {
    let model = heat_model(&mesh(cfg)?, cfg.alpha, cfg.sigma, cfg.dt, cfg.decay)?;
    let precision = model.smoothing_precision(cfg.steps)?;
    let checks = checks(&model, &precision, cfg.steps);
    let total = precision.dim();
    let prior = Ensemble::new(draw_noise(&precision, cfg.n, sub_seed(seed, 0, 0))?)?;
    let last = (cfg.steps - 1) * model.p();
    let observed: Vec<usize> = (last..total).step_by(2).collect();
    let m = observed.len();
    let obs = ObservationSpec::linear(
        &prior,
        SparseMatrix::selection(total, &observed)?,
        vec![cfg.obs_value; m],
        SparseSpd::identity(m).scale(1.0 / (cfg.obs_sd * cfg.obs_sd)),
        sub_seed(seed, 0, 1),
    )?;
    let update = smoother_update(&prior, &precision, &obs)?;
    Ok(FemResult {
        model,
        precision,
        prior,
        update,
        observed,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_demo_passes_its_checks() {
        let cfg = FemConfig {
            nx: 4,
            ny: 3,
            steps: 3,
            ..Default::default()
        };
        let r = run(&cfg, 0).unwrap();
        assert!(r.checks.stiffness_row_sum < 1e-12);
        assert!(r.checks.lumping_gap < 1e-14);
        assert!(r.checks.block_tridiagonal && r.checks.precision_spd);
        assert_eq!(r.update.posterior.p(), 36);
    }

    #[test]
    fn block_structure_detection() {
        let chain = SparseSpd::from_triplets(
            4,
            vec![
                (0, 0, 2.0),
                (1, 1, 2.0),
                (2, 2, 2.0),
                (3, 3, 2.0),
                (2, 0, -1.0),
            ],
        )
        .unwrap();
        assert!(!is_block_tridiagonal(&chain, 1, 4));
        assert!(is_block_tridiagonal(&chain, 2, 2));
        let banded = SparseSpd::from_triplets(
            4,
            vec![
                (0, 0, 2.0),
                (1, 1, 2.0),
                (2, 2, 2.0),
                (3, 3, 2.0),
                (2, 1, -1.0),
            ],
        )
        .unwrap();
        assert!(is_block_tridiagonal(&banded, 2, 2));
        assert!(!is_block_tridiagonal(&banded, 1, 4));
    }
}
