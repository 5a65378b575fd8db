use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use asyscd::problem::load_problem;
use asyscd::solver::{measure_speedup, Engine, SolverConfig, SPEEDUP_HEADER};

use crate::manifest::{solver_json, unix_now, RunManifest};
use crate::{Ctx, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchEngine {
    Async,
    Locked,
    Syngd,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    /// Problem files; one CSV is written per problem.
    #[arg(long, required = true, num_args = 1..)]
    pub problem: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    pub threads: Vec<usize>,
    /// Runs per thread count; medians are reported.
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[arg(long, value_enum, default_value_t = BenchEngine::Async)]
    pub engine: BenchEngine,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_epochs: u64,
    /// Steplength multiplier, the same at every thread count.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1)]
    pub shuffle_period: u64,
}

pub fn run(ctx: &Ctx, args: &BenchArgs, parameters: Value) -> anyhow::Result<Outcome> {
    if args.threads.iter().any(|&t| t == 0) {
        bail!("thread counts must be at least 1");
    }
    if args.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let engine = match args.engine {
        BenchEngine::Async => Engine::Async,
        BenchEngine::Locked => Engine::Locked,
        BenchEngine::Syngd => Engine::Syngd,
    };
    let cores = std::thread::available_parallelism().map_or(1, |c| c.get());
    if let Some(&max) = args.threads.iter().max() {
        if max > cores {
            log::warn!("{max} threads requested on {cores} core(s); timings are oversubscribed");
        }
    }
    for problem in &args.problem {
        let started = unix_now();
        let p = load_problem(problem).with_context(|| format!("reading {}", problem.display()))?;
        let cfg = SolverConfig {
            gamma: args.gamma,
            tolerance: args.tol,
            max_epochs: args.max_epochs,
            shuffle_period: args.shuffle_period,
            seed: ctx.seed,
            ..SolverConfig::default()
        };
        cfg.validate(p.dim())?;
        let rows = measure_speedup(&p, &cfg, &args.threads, args.reps, engine)?;
        let mut csv = String::from(SPEEDUP_HEADER);
        csv.push('\n');
        for r in &rows {
            csv.push_str(&r.csv());
            csv.push('\n');
        }
        let stem = problem.file_stem().map_or("problem".into(), |s| s.to_string_lossy().into_owned());
        let path = ctx.out(format!("bench_{stem}.csv"));
        std::fs::write(&path, &csv).with_context(|| format!("writing {}", path.display()))?;
        ctx.say(format!("{} ({} engine, {} core(s)):", problem.display(), engine.name(), cores));
        ctx.say(csv.trim_end());
        for r in rows.iter().filter(|r| !r.reached) {
            log::warn!("P = {}: tolerance not reached in every run; speedup left empty", r.threads);
        }
        let mut m = RunManifest::new("bench", ctx.seed, parameters.clone(), started);
        m.problem_source = Some(problem.display().to_string());
        m.solver = Some(solver_json(&cfg));
        m.outputs = vec![path.display().to_string()];
        m.results = json!({
            "cores": cores,
            "engine": engine.name(),
            "rows": rows.iter().map(|r| json!({
                "threads": r.threads,
                "median_sec": r.median_sec,
                "speedup": r.speedup,
                "median_epochs": r.median_epochs,
                "reached": r.reached,
            })).collect::<Vec<_>>(),
        });
        m.write_beside(&path)?;
    }
    Ok(Outcome::Success)
}
