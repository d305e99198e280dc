use crate::error::LabResult;
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub phase: String,
    pub seconds: f64,
}

/// A quantity run at a smaller size than the original study used.
#[derive(Debug, Clone, Serialize)]
pub struct Substitution {
    pub quantity: String,
    pub original: String,
    pub used: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub config: serde_json::Value,
    pub versions: Versions,
    pub seeds: Vec<u64>,
    pub timings: Vec<Timing>,
    pub substitutions: Vec<Substitution>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub enif_lab: &'static str,
    pub rustc_target: &'static str,
}

impl Manifest {
    pub fn new(experiment: &str, config: serde_json::Value) -> Self {
        Self {
            experiment: experiment.to_owned(),
            config,
            versions: Versions {
                enif_lab: env!("CARGO_PKG_VERSION"),
                rustc_target: std::env::consts::ARCH,
            },
            seeds: Vec::new(),
            timings: Vec::new(),
            substitutions: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn substitute(&mut self, quantity: &str, original: &str, used: &str) {
        self.substitutions.push(Substitution {
            quantity: quantity.to_owned(),
            original: original.to_owned(),
            used: used.to_owned(),
        });
    }

    /// Runs `f`, recording its wall time under `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(Timing {
            phase: phase.to_owned(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn write(&self, dir: &Path) -> LabResult<()> {
        let f = std::fs::File::create(dir.join("manifest.json"))?;
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }
}
