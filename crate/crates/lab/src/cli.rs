//! `enif-lab` subcommands.

use crate::config::{ExperimentConfig, SchemeName};
use crate::error::{LabError, LabResult};
use crate::runner::{run_config, OUTPUT_ENV};
use clap::{Args, Parser, Subcommand, ValueEnum};
use enif::assimilate::{
    apply_rows, draw_noise, enif_mda, enif_update, enkf_update, EnkfOptions, Localisation,
    ObservationSpec, UpdateResult,
};
use enif::io;
use enif::regress::{HMethod, LassoOptions};
use enif::simulators::{lorenz96_ensemble, matern1_oracle, Ar1, Grf2d, Lorenz96};
use enif::sparse::SparseSpd;
use enif::transport::fit_affine_kr;
use enif::Ensemble;
use nalgebra::DMatrix;
use serde_json::json;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "enif-lab",
    version,
    about = "Ensemble information filter experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config and the environment).
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Root for outputs when neither the flag nor the config sets one.
        #[arg(long, env = OUTPUT_ENV, hide_env_values = true)]
        output_root: Option<PathBuf>,
    },
    /// Sample an ensemble from a simulator.
    Simulate(SimulateArgs),
    /// Update a prior ensemble with observations.
    Assimilate(AssimilateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Ar1,
    Ou,
    Lorenz96,
    Grf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub model: Model,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; `.bin` selects the binary format, anything else CSV.
    #[arg(long, short)]
    pub out: PathBuf,
    /// State dimension (ar1, ou).
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    #[arg(long, default_value_t = 0.9)]
    pub phi: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    /// Domain length (ou).
    #[arg(long, default_value_t = 10.0)]
    pub length: f64,
    #[arg(long, default_value_t = 40)]
    pub m: usize,
    #[arg(long, default_value_t = 8.0)]
    pub forcing: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 4.0)]
    pub t_end: f64,
    #[arg(long, value_enum, default_value_t = SchemeArg::Rk4)]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 32)]
    pub rows: usize,
    #[arg(long, default_value_t = 32)]
    pub cols: usize,
    #[arg(long, default_value_t = 0.4)]
    pub range_x: f64,
    #[arg(long, default_value_t = 0.1)]
    pub range_y: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_6)]
    pub angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Euler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Enif,
    EnifMda,
    Es,
    EsDist,
    EsAdaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HMethodArg {
    Known,
    Lasso,
    Lls,
}

#[derive(Debug, Args)]
pub struct AssimilateArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Prior ensemble (CSV or binary).
    #[arg(long)]
    pub prior: PathBuf,
    /// Observed values, whitespace separated.
    #[arg(long)]
    pub obs: PathBuf,
    /// Observation matrix `H` in the sparse text format.
    #[arg(long)]
    pub h: Option<PathBuf>,
    /// `n x m` responses (CSV); defaults to `H u` of each member.
    #[arg(long)]
    pub responses: Option<PathBuf>,
    /// How to obtain `H` when responses are supplied.
    #[arg(long, value_enum, default_value_t = HMethodArg::Known)]
    pub h_method: HMethodArg,
    /// Observation-noise precision in the sparse text format.
    #[arg(long, conflicts_with = "noise_sd")]
    pub noise: Option<PathBuf>,
    /// Independent observation noise with this standard deviation.
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Prior precision (sparse text format) for the information update.
    #[arg(long, conflicts_with = "graph")]
    pub prec: Option<PathBuf>,
    /// Graph to fit the prior precision on.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// MDA weights, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    /// `p x m` distances (CSV) for distance localisation.
    #[arg(long)]
    pub distances: Option<PathBuf>,
    /// Kernel parameter of `exp(-c δ²)`.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Adaptive-localisation threshold; defaults to `3/√n`.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Posterior ensemble output.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Diagnostics JSON output.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

pub fn execute(cli: Cli) -> LabResult<()> {
    match cli.command {
        Command::Run {
            config,
            output,
            output_root,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let explicit = match (output, &cfg.output_dir, output_root) {
                (Some(o), _, _) => Some(o),
                (None, None, Some(root)) => Some(root.join(cfg.spec.tag())),
                _ => None,
            };
            let dir = run_config(&cfg, explicit.as_deref())?;
            println!("{}", dir.display());
            Ok(())
        }
        Command::Simulate(a) => simulate(&a),
        Command::Assimilate(a) => assimilate(&a),
    }
}

fn simulate(a: &SimulateArgs) -> LabResult<()> {
    let ens = match a.model {
        Model::Ar1 => Ar1::new(a.p, a.phi, 1.0)?.sample(a.n, a.seed),
        Model::Ou => {
            let dt = a.length / (a.p.max(2) - 1) as f64;
            let positions: Vec<f64> = (0..a.p).map(|k| k as f64 * dt).collect();
            matern1_oracle(a.kappa, &positions)?.sample(a.n, a.seed)?
        }
        Model::Lorenz96 => {
            let scheme = match a.scheme {
                SchemeArg::Euler => SchemeName::Euler,
                SchemeArg::Rk4 => SchemeName::Rk4,
            };
            let cfg = Lorenz96 {
                m: a.m,
                forcing: a.forcing,
                dt: a.dt,
                t_end: a.t_end,
                scheme: scheme.into(),
            };
            lorenz96_ensemble(&cfg, a.n, a.seed)?
        }
        Model::Grf => {
            Grf2d::new(a.rows, a.cols, a.range_x, a.range_y, a.angle)?
                .sample(a.n, a.seed)?
                .0
        }
    };
    io::write_ensemble_file(&ens, &a.out)?;
    Ok(())
}

fn open(path: &Path) -> LabResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| LabError::Config(format!("cannot open {}: {e}", path.display())))
}

fn read_values(path: &Path) -> LabResult<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
    text.split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| LabError::Config(format!("{}: not a number: {t}", path.display())))
        })
        .collect()
}

fn read_matrix_csv(path: &Path) -> LabResult<DMatrix<f64>> {
    Ok(io::read_ensemble_csv(open(path)?)?.into_data())
}

fn observation(a: &AssimilateArgs, prior: &Ensemble) -> LabResult<ObservationSpec> {
    let d = read_values(&a.obs)?;
    let m = d.len();
    let noise_prec = match (&a.noise, a.noise_sd) {
        (Some(p), _) => io::read_spd(open(p)?)?,
        (None, Some(sd)) if sd > 0.0 => SparseSpd::identity(m).scale(1.0 / (sd * sd)),
        _ => {
            return Err(LabError::Config(
                "give --noise or a positive --noise-sd".into(),
            ))
        }
    };
    let h = match &a.h {
        Some(p) => Some(io::read_h(open(p)?)?),
        None => None,
    };
    let responses = match (&a.responses, &h) {
        (Some(p), _) => read_matrix_csv(p)?,
        (None, Some(h)) => apply_rows(prior, h)?,
        (None, None) => return Err(LabError::Config("give --h or --responses".into())),
    };
    let method = match (a.h_method, h) {
        (HMethodArg::Known, Some(h)) => HMethod::Known(h),
        (HMethodArg::Known, None) => {
            return Err(LabError::Config("--h-method known needs --h".into()));
        }
        (HMethodArg::Lasso, _) => HMethod::MonotoneLasso(LassoOptions::default()),
        (HMethodArg::Lls, _) => HMethod::Lls,
    };
    let noise = draw_noise(&noise_prec, prior.n(), a.seed)?;
    Ok(ObservationSpec::new(
        d, responses, method, noise_prec, noise,
    )?)
}

fn prior_precision(a: &AssimilateArgs, prior: &Ensemble) -> LabResult<SparseSpd> {
    match (&a.prec, &a.graph) {
        (Some(p), _) => Ok(io::read_spd(open(p)?)?),
        (None, Some(g)) => Ok(fit_affine_kr(prior, &io::read_graph(open(g)?)?)?.precision()),
        (None, None) => Err(LabError::Config(
            "information updates need --prec or --graph".into(),
        )),
    }
}

fn assimilate(a: &AssimilateArgs) -> LabResult<()> {
    let prior = io::read_ensemble_file(&a.prior)?;
    let obs = observation(a, &prior)?;
    let res: UpdateResult = match a.method {
        Method::Enif => enif_update(&prior, &prior_precision(a, &prior)?, &obs)?,
        Method::EnifMda => {
            let alphas = if a.alphas.is_empty() {
                vec![1.0]
            } else {
                a.alphas.clone()
            };
            enif_mda(
                &prior,
                &prior_precision(a, &prior)?,
                &obs,
                &alphas,
                None,
                a.seed.wrapping_add(1),
            )?
        }
        Method::Es => enkf_update(&prior, &obs, &EnkfOptions::default())?,
        Method::EsDist => {
            let path = a
                .distances
                .as_deref()
                .ok_or_else(|| LabError::Config("es-dist needs --distances".into()))?;
            let opts = EnkfOptions {
                localisation: Localisation::Distance {
                    c: a.c,
                    distances: read_matrix_csv(path)?,
                },
                ..Default::default()
            };
            enkf_update(&prior, &obs, &opts)?
        }
        Method::EsAdaptive => {
            let opts = EnkfOptions {
                localisation: Localisation::Adaptive(a.threshold),
                ..Default::default()
            };
            enkf_update(&prior, &obs, &opts)?
        }
    };
    io::write_ensemble_file(&res.posterior, &a.out)?;
    if let Some(path) = &a.diagnostics {
        let value = json!({
            "method": format!("{:?}", a.method).to_lowercase(),
            "n": prior.n(),
            "p": prior.p(),
            "m": obs.m(),
            "mean_update": res.diagnostics.mean_update,
            "variance_ratio": res.diagnostics.variance_ratio.iter().map(|v| if v.is_finite() { json!(v) } else { json!(null) }).collect::<Vec<_>>(),
            "h_nnz": res.h.as_ref().map(|h| h.nnz()),
            "precision_identity_residual": res.precision_identity_residual,
        });
        serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), &value)?;
    }
    Ok(())
}
