//! Reproduction record written next to every output file.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;

use asyscd::solver::SolverConfig;
use asyscd::theory::StepPlan;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: &'static str,
    pub started_unix_secs: f64,
    pub finished_unix_secs: f64,
    pub seed: u64,
    pub problem_source: Option<String>,
    /// Every parsed argument of the invocation.
    pub parameters: Value,
    pub plan: Option<Value>,
    pub solver: Option<Value>,
    pub outputs: Vec<String>,
    pub results: Value,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: u64, parameters: Value, started: f64) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            started_unix_secs: started,
            finished_unix_secs: started,
            seed,
            problem_source: None,
            parameters,
            plan: None,
            solver: None,
            outputs: Vec::new(),
            results: Value::Null,
        }
    }

    /// Writes `<primary stem>.manifest.json` beside `primary` and returns its path.
    pub fn write_beside(mut self, primary: &Path) -> anyhow::Result<PathBuf> {
        self.finished_unix_secs = unix_now();
        let path = primary.with_extension("manifest.json");
        let text = serde_json::to_string_pretty(&self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn plan_json(plan: &StepPlan) -> Value {
    serde_json::json!({
        "gamma": plan.gamma,
        "rho": plan.rho,
        "psi": plan.psi,
        "tau": plan.tau,
        "regime": format!("{:?}", plan.regime),
        "n": plan.n,
        "l_max": plan.l_max,
        "ratio": plan.ratio,
        "source": format!("{:?}", plan.source),
        "active_bound": plan.active_bound.map(|b| format!("{b:?}")),
    })
}

pub fn solver_json(cfg: &SolverConfig) -> Value {
    serde_json::json!({
        "threads": cfg.threads,
        "gamma": cfg.gamma,
        "shuffle_period": cfg.shuffle_period,
        "tolerance": cfg.tolerance,
        "max_epochs": cfg.max_epochs,
        "seed": cfg.seed,
        "check_interval": cfg.check_interval,
    })
}
