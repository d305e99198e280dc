//! Runs a configured experiment and writes its tables and manifest.

use crate::config::{ExperimentConfig, ExperimentSpec};
use crate::error::LabResult;
use crate::experiments::{self, write_table};
use crate::manifest::Manifest;
use enif::io;
use serde_json::json;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

/// Environment variable naming the root under which runs are written.
pub const OUTPUT_ENV: &str = "ENIF_LAB_OUTPUT";

/// Output directory: an explicit override, else the config's `output_dir`,
/// else `$ENIF_LAB_OUTPUT/<experiment>`, else `enif-lab-output/<experiment>`.
pub fn output_dir(cfg: &ExperimentConfig, explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.output_dir {
        return p.clone();
    }
    let root = std::env::var_os(OUTPUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("enif-lab-output"));
    root.join(cfg.spec.tag())
}

struct Out<'a> {
    dir: &'a Path,
    manifest: Manifest,
}

impl Out<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_owned());
        self.dir.join(name)
    }

    fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> LabResult<()> {
        let p = self.path(name);
        write_table(&p, header, rows)
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> LabResult<()> {
        let p = self.path(name);
        serde_json::to_writer_pretty(File::create(p)?, value)?;
        Ok(())
    }

    fn writer(&mut self, name: &str) -> LabResult<BufWriter<File>> {
        let p = self.path(name);
        Ok(BufWriter::new(File::create(p)?))
    }
}

/// Runs `cfg` and returns the directory the results were written to.
pub fn run_config(cfg: &ExperimentConfig, explicit_dir: Option<&Path>) -> LabResult<PathBuf> {
    cfg.validate()?;
    let dir = output_dir(cfg, explicit_dir);
    std::fs::create_dir_all(&dir)?;
    let mut out = Out {
        dir: &dir,
        manifest: Manifest::new(cfg.spec.tag(), serde_json::to_value(cfg)?),
    };
    out.manifest.seeds.push(cfg.seed);
    let seed = cfg.seed;

    match &cfg.spec {
        ExperimentSpec::ResolutionSweep(c) => {
            let rows = out
                .manifest
                .time("sweep", || experiments::resolution::run(c, seed))?;
            let table: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| vec![r.p as f64, r.euler, r.enif, r.es])
                .collect();
            out.table(
                "resolution.csv",
                &["p", "euler_kld", "enif_kld", "es_kld"],
                &table,
            )?;
        }
        ExperimentSpec::DependenceStrength(c) => {
            let res = out
                .manifest
                .time("replicates", || experiments::dependence::run(c, seed))?;
            let mut devs = Vec::new();
            let mut summary = Vec::new();
            let mut traces = Vec::new();
            for r in &res {
                for (k, d) in r.deviations.iter().enumerate() {
                    devs.push(vec![
                        r.phi,
                        k as f64,
                        d.enif,
                        d.es,
                        d.enif_interior,
                        d.es_interior,
                    ]);
                }
                summary.push(vec![r.phi, r.median_enif(), r.median_es()]);
                for j in 0..r.trace.exact.len() {
                    traces.push(vec![
                        r.phi,
                        j as f64,
                        r.trace.exact[j],
                        r.trace.enif[j],
                        r.trace.es[j],
                    ]);
                }
            }
            out.table(
                "deviations.csv",
                &[
                    "phi",
                    "replicate",
                    "enif",
                    "es",
                    "enif_interior",
                    "es_interior",
                ],
                &devs,
            )?;
            out.table(
                "summary.csv",
                &["phi", "median_enif", "median_es"],
                &summary,
            )?;
            out.table(
                "traces.csv",
                &["phi", "index", "exact", "enif", "es"],
                &traces,
            )?;
        }
        ExperimentSpec::LocalisationSweep(c) => {
            if c.p != 1000 || c.n != 1000 {
                out.manifest
                    .substitute("state dimension p", "1000", &c.p.to_string());
                out.manifest
                    .substitute("ensemble size n", "1000", &c.n.to_string());
            }
            let res = out
                .manifest
                .time("sweep", || experiments::localisation::run(c, seed))?;
            let table: Vec<Vec<f64>> = res.curve.iter().map(|&(c, k)| vec![c, k]).collect();
            out.table("localisation.csv", &["c", "es_kld"], &table)?;
            out.json(
                "summary.json",
                &json!({
                    "enif_kld": res.enif,
                    "vanilla_es_kld": finite_or_null(res.vanilla_es),
                    "min_localised_kld": finite_or_null(res.min_localised()),
                    "interior_minimum": res.has_interior_minimum(),
                }),
            )?;
        }
        ExperimentSpec::Lorenz96MarkovOrder(c) => {
            let runs = out
                .manifest
                .time("curves", || experiments::lorenz::run(c, seed))?;
            let mut nll = Vec::new();
            let mut argmin = Vec::new();
            for r in &runs {
                for (k, pt) in r.curve.iter().enumerate() {
                    nll.push(vec![
                        r.replicate as f64,
                        r.n as f64,
                        (k + 1) as f64,
                        pt.train_nll,
                        pt.test_nll,
                    ]);
                }
                argmin.push(vec![
                    r.replicate as f64,
                    r.n as f64,
                    r.argmin_order() as f64,
                    f64::from(u8::from(r.train_monotone())),
                ]);
            }
            out.table(
                "nll.csv",
                &["replicate", "n", "order", "train_nll", "test_nll"],
                &nll,
            )?;
            out.table(
                "argmin.csv",
                &["replicate", "n", "argmin_order", "train_monotone"],
                &argmin,
            )?;
        }
        ExperimentSpec::Grf2dUpdate(c) => {
            let largest = c.grids.iter().copied().max().unwrap_or(0);
            if largest < 200 {
                out.manifest
                    .substitute("grid", "200x200", &format!("{largest}x{largest}"));
            }
            let res = out
                .manifest
                .time("updates", || experiments::grf2d::run(c, seed))?;
            let mut energy = Vec::new();
            let mut support = Vec::new();
            for grid in &res {
                for (r, o) in grid.outcomes.iter().enumerate() {
                    let mut row = vec![grid.g as f64, r as f64];
                    row.extend(
                        o.mean_updates
                            .iter()
                            .map(|m| experiments::grf2d::off_diagonal_energy(m, grid.g, c.band)),
                    );
                    energy.push(row);
                    support.push(vec![
                        grid.g as f64,
                        r as f64,
                        o.h_support as f64,
                        o.h_true_positives as f64,
                    ]);
                }
                let first = &grid.outcomes[0];
                for (k, name) in experiments::grf2d::METHODS.iter().enumerate() {
                    let raster: Vec<Vec<f64>> = first.mean_updates[k]
                        .chunks(grid.g)
                        .map(<[f64]>::to_vec)
                        .collect();
                    let header: Vec<String> = (0..grid.g).map(|j| format!("c{j}")).collect();
                    let header: Vec<&str> = header.iter().map(String::as_str).collect();
                    out.table(
                        &format!("mean_update_{name}_{}.csv", grid.g),
                        &header,
                        &raster,
                    )?;
                }
            }
            let mut header = vec!["g", "replicate"];
            header.extend(experiments::grf2d::METHODS);
            out.table("energy.csv", &header, &energy)?;
            out.table(
                "h_support.csv",
                &["g", "replicate", "support", "true_positives"],
                &support,
            )?;
        }
        ExperimentSpec::FemHeatDemo(c) => {
            let r = out.manifest.time("assemble_and_update", || {
                experiments::fem_heat::run(c, seed)
            })?;
            io::write_spd(&r.model.fem.mass, out.writer("mass.txt")?)?;
            io::write_spd(&r.model.fem.lumped_matrix(), out.writer("lumped_mass.txt")?)?;
            io::write_spd(&r.model.fem.stiffness, out.writer("stiffness.txt")?)?;
            io::write_h(&r.model.b, out.writer("transition.txt")?)?;
            io::write_spd(&r.precision, out.writer("precision.txt")?)?;
            io::write_ensemble_csv(&r.prior, out.writer("prior.csv")?)?;
            io::write_ensemble_csv(&r.update.posterior, out.writer("posterior.csv")?)?;
            out.json(
                "checks.json",
                &json!({
                    "stiffness_row_sum": r.checks.stiffness_row_sum,
                    "lumping_gap": r.checks.lumping_gap,
                    "block_tridiagonal": r.checks.block_tridiagonal,
                    "precision_spd": r.checks.precision_spd,
                    "observed": r.observed,
                }),
            )?;
        }
    }
    out.manifest.write(&dir)?;
    Ok(dir)
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fem_run_writes_outputs_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_toml(
            "experiment = \"fem_heat_demo\"\nnx = 3\nny = 3\nsteps = 2\n",
        )
        .unwrap();
        let out = run_config(&cfg, Some(dir.path())).unwrap();
        for f in [
            "manifest.json",
            "mass.txt",
            "precision.txt",
            "posterior.csv",
            "checks.json",
        ] {
            assert!(out.join(f).exists(), "{f}");
        }
        let m: serde_json::Value =
            serde_json::from_reader(File::open(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["experiment"], "fem_heat_demo");
        assert_eq!(m["seeds"][0], 0);
    }

    #[test]
    fn identical_runs_are_identical() {
        let cfg = ExperimentConfig::from_toml(
            "experiment = \"dependence_strength\"\np = 12\nreplicates = 3\nseed = 9\n",
        )
        .unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_config(&cfg, Some(a.path())).unwrap();
        run_config(&cfg, Some(b.path())).unwrap();
        for f in ["deviations.csv", "traces.csv"] {
            assert_eq!(
                std::fs::read(a.path().join(f)).unwrap(),
                std::fs::read(b.path().join(f)).unwrap()
            );
        }
    }
}
