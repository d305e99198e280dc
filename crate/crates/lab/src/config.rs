//! Experiment configuration files (TOML).
//!
//! Every file names its experiment with `experiment = "<tag>"`, may set
//! `seed` and `output_dir`, and overrides any of the experiment's fields.
//! Unset fields take the defaults below.

use crate::error::{LabError, LabResult};
use enif::graph::{Neighborhood, Scheme};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(flatten)]
    pub spec: ExperimentSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentSpec {
    ResolutionSweep(ResolutionConfig),
    DependenceStrength(DependenceConfig),
    LocalisationSweep(LocalisationConfig),
    Lorenz96MarkovOrder(LorenzConfig),
    Grf2dUpdate(GrfConfig),
    FemHeatDemo(FemConfig),
}

impl ExperimentSpec {
    pub fn tag(&self) -> &'static str {
        match self {
            ExperimentSpec::ResolutionSweep(_) => "resolution_sweep",
            ExperimentSpec::DependenceStrength(_) => "dependence_strength",
            ExperimentSpec::LocalisationSweep(_) => "localisation_sweep",
            ExperimentSpec::Lorenz96MarkovOrder(_) => "lorenz96_markov_order",
            ExperimentSpec::Grf2dUpdate(_) => "grf2d_update",
            ExperimentSpec::FemHeatDemo(_) => "fem_heat_demo",
        }
    }
}

/// OU/Matérn-1 conditioning at increasing resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolutionConfig {
    pub kappa: f64,
    /// Domain `[0, length]`; ten correlation lengths by default.
    pub length: f64,
    pub resolutions: Vec<usize>,
    pub n: usize,
    /// Observation of the right endpoint.
    pub obs_value: f64,
    pub obs_sd: f64,
}

impl Default for ResolutionConfig {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            length: 10.0,
            resolutions: vec![16, 32, 64, 128, 256],
            n: 1000,
            obs_value: 1.0,
            obs_sd: 0.5,
        }
    }
}

/// AR-1 endpoint conditioning at several dependence strengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DependenceConfig {
    pub phis: Vec<f64>,
    pub p: usize,
    pub n: usize,
    pub obs_value: f64,
    pub obs_sd: f64,
    pub replicates: usize,
}

impl Default for DependenceConfig {
    fn default() -> Self {
        Self {
            phis: vec![0.0, 0.5, 0.9, 0.95],
            p: 100,
            n: 50,
            obs_value: 20.0,
            obs_sd: 1.0,
            replicates: 20,
        }
    }
}

/// Distance-localised ES against EnIF on the OU/Matérn-1 model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalisationConfig {
    pub kappa: f64,
    pub length: f64,
    pub p: usize,
    pub n: usize,
    pub obs_value: f64,
    pub obs_sd: f64,
    /// Kernel `exp(-c δ²)`: `count` values of `c` log-spaced in `[c_min, c_max]`.
    pub c_min: f64,
    pub c_max: f64,
    pub count: usize,
}

impl Default for LocalisationConfig {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            length: 10.0,
            p: 200,
            n: 200,
            obs_value: 1.0,
            obs_sd: 0.5,
            c_min: 1e-4,
            c_max: 1e4,
            count: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Euler,
    Rk4,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::Euler => Scheme::Euler,
            SchemeName::Rk4 => Scheme::Rk4,
        }
    }
}

/// Markov-order selection for Lorenz-96 filtering ensembles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LorenzConfig {
    pub m: usize,
    pub forcing: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: SchemeName,
    pub sizes: Vec<usize>,
    pub max_order: usize,
    pub replicates: usize,
}

impl Default for LorenzConfig {
    fn default() -> Self {
        Self {
            m: 40,
            forcing: 8.0,
            dt: 0.01,
            t_end: 4.0,
            scheme: SchemeName::Rk4,
            sizes: vec![100, 200, 500],
            max_order: 10,
            replicates: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborhoodName {
    Four,
    Eight,
}

impl From<NeighborhoodName> for Neighborhood {
    fn from(n: NeighborhoodName) -> Self {
        match n {
            NeighborhoodName::Four => Neighborhood::Four,
            NeighborhoodName::Eight => Neighborhood::Eight,
        }
    }
}

/// How the extra observation variance combines with the response noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Observation-noise variance is `extra_obs_var + response_sd²`.
    Total,
    /// Observation-noise variance is `extra_obs_var` alone.
    Replace,
}

/// Parameter update of an anisotropic exponential field observed on its
/// diagonal, with unknown `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrfConfig {
    /// Square grid sizes (cells per side).
    pub grids: Vec<usize>,
    pub n: usize,
    pub range_x: f64,
    pub range_y: f64,
    pub angle: f64,
    pub response_sd: f64,
    pub extra_obs_var: f64,
    pub noise_mode: NoiseMode,
    pub neighborhood: NeighborhoodName,
    /// Half-width (in cells) of the diagonal band for the energy statistic.
    pub band: usize,
    pub replicates: usize,
}

impl Default for GrfConfig {
    fn default() -> Self {
        Self {
            grids: vec![10, 32, 64],
            n: 100,
            range_x: 0.4,
            range_y: 0.1,
            angle: std::f64::consts::FRAC_PI_6,
            response_sd: 0.1,
            extra_obs_var: 1.0,
            noise_mode: NoiseMode::Total,
            neighborhood: NeighborhoodName::Eight,
            band: 2,
            replicates: 1,
        }
    }
}

/// Stochastic heat equation on a triangulated rectangle, smoothed over
/// several time steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FemConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    /// Optional external mesh in the vertex/triangle text format.
    pub mesh_file: Option<PathBuf>,
    pub alpha: f64,
    pub sigma: f64,
    pub dt: f64,
    pub decay: f64,
    pub steps: usize,
    pub n: usize,
    pub obs_value: f64,
    pub obs_sd: f64,
}

impl Default for FemConfig {
    fn default() -> Self {
        Self {
            nx: 6,
            ny: 6,
            lx: 1.0,
            ly: 1.0,
            mesh_file: None,
            alpha: 0.05,
            sigma: 1.0,
            dt: 0.01,
            decay: 0.5,
            steps: 5,
            n: 50,
            obs_value: 0.05,
            obs_sd: 0.01,
        }
    }
}

fn check(cond: bool, msg: &str) -> LabResult<()> {
    if cond {
        Ok(())
    } else {
        Err(LabError::Config(msg.to_owned()))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> LabResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks sizes against the desk-scale bounds and referenced files.
    pub fn validate(&self) -> LabResult<()> {
        match &self.spec {
            ExperimentSpec::ResolutionSweep(c) => {
                check(
                    c.kappa > 0.0 && c.length > 0.0,
                    "kappa and length must be positive",
                )?;
                check(!c.resolutions.is_empty(), "resolutions must not be empty")?;
                check(
                    c.resolutions.iter().all(|&p| (2..=2048).contains(&p)),
                    "resolutions must lie in 2..=2048",
                )?;
                check(c.n >= 3, "n must be at least 3")?;
                check(c.obs_sd > 0.0, "obs_sd must be positive")?;
            }
            ExperimentSpec::DependenceStrength(c) => {
                check(
                    c.phis.iter().all(|f| f.abs() < 1.0),
                    "phis must satisfy |phi| < 1",
                )?;
                check((2..=5000).contains(&c.p), "p must lie in 2..=5000")?;
                check(c.n >= 3, "n must be at least 3")?;
                check(
                    c.obs_sd > 0.0 && c.replicates > 0,
                    "obs_sd and replicates must be positive",
                )?;
            }
            ExperimentSpec::LocalisationSweep(c) => {
                check(
                    c.kappa > 0.0 && c.length > 0.0,
                    "kappa and length must be positive",
                )?;
                check((2..=2048).contains(&c.p), "p must lie in 2..=2048")?;
                check(c.n >= 3, "n must be at least 3")?;
                check(
                    c.c_min > 0.0 && c.c_max > c.c_min && c.count >= 3,
                    "need 0 < c_min < c_max and count >= 3",
                )?;
            }
            ExperimentSpec::Lorenz96MarkovOrder(c) => {
                check(
                    c.m >= 4 && c.dt > 0.0 && c.t_end > 0.0,
                    "need m >= 4, dt > 0, t_end > 0",
                )?;
                check(
                    c.max_order >= 1 && 2 * c.max_order < c.m,
                    "need 1 <= max_order < m/2",
                )?;
                check(
                    !c.sizes.is_empty() && c.sizes.iter().all(|&n| n >= 3),
                    "sizes must be >= 3",
                )?;
                check(c.replicates > 0, "replicates must be positive")?;
            }
            ExperimentSpec::Grf2dUpdate(c) => {
                check(!c.grids.is_empty(), "grids must not be empty")?;
                check(
                    c.grids
                        .iter()
                        .all(|&g| g >= 2 && g * g <= enif::simulators::GRF_ORACLE_LIMIT),
                    "grid cells must lie in 4..=4096",
                )?;
                check(
                    c.range_x > 0.0 && c.range_y > 0.0,
                    "ranges must be positive",
                )?;
                check(
                    c.n >= 3 && c.replicates > 0,
                    "need n >= 3 and replicates > 0",
                )?;
            }
            ExperimentSpec::FemHeatDemo(c) => {
                if let Some(f) = &c.mesh_file {
                    check(
                        f.exists(),
                        &format!("mesh file {} does not exist", f.display()),
                    )?;
                }
                check(
                    c.nx >= 1 && c.ny >= 1 && c.steps >= 2,
                    "need nx, ny >= 1 and steps >= 2",
                )?;
                check(
                    c.alpha > 0.0 && c.sigma > 0.0 && c.dt > 0.0,
                    "alpha, sigma and dt must be positive",
                )?;
                check(c.n >= 3 && c.obs_sd > 0.0, "need n >= 3 and obs_sd > 0")?;
            }
        }
        Ok(())
    }
}
