use std::f64::consts::E;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use asyscd::io::fmt_real;
use asyscd::problem::{compute_lipschitz, estimate_modulus, load_problem, OptimumHint, QuadraticProblem};
use asyscd::simulator::{self, DelaySchedule, RunOptions};
use asyscd::solver::{self, Engine, SolverConfig};
use asyscd::theory::{
    linear_envelope, plan_constrained_corollary, plan_constrained_general, plan_unconstrained_corollary,
    plan_unconstrained_general, unconstrained_delay_admissible, Regime, StepPlan,
};
use asyscd::trace::Trace;

use crate::manifest::{plan_json, solver_json, unix_now, RunManifest};
use crate::{Ctx, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineArg {
    Async,
    Locked,
    Syngd,
    Serial,
    Simulator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleArg {
    Zero,
    Fixed,
    Random,
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StartArg {
    Zero,
    One,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    /// Problem file written by `generate`.
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, value_enum, default_value_t = EngineArg::Async)]
    pub engine: EngineArg,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Delay bound for the plan; defaults to threads − 1 for the multicore
    /// engines and 0 otherwise.
    #[arg(long)]
    pub tau: Option<u64>,
    /// Force this steplength multiplier instead of the plan's.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_epochs: u64,
    /// Epochs between reshuffles (async and locked).
    #[arg(long, default_value_t = 1)]
    pub shuffle_period: u64,
    /// Epochs between residual checks (async and locked).
    #[arg(long, default_value_t = 1)]
    pub check_interval: u64,
    /// Delay schedule for the simulator; defaults to `fixed` when τ > 0.
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleArg>,
    /// Iteration budget K for serial and simulator runs (K + 1 updates);
    /// defaults to max_epochs · n − 1.
    #[arg(long)]
    pub iterations: Option<u64>,
    /// Updates between checkpoints for serial and simulator runs; defaults to n.
    #[arg(long)]
    pub stride: Option<u64>,
    #[arg(long, value_enum, default_value_t = StartArg::Zero)]
    pub x0: StartArg,
    /// Optimal value, for gap and envelope columns.
    #[arg(long)]
    pub f_star: Option<f64>,
    /// Trace CSV; defaults to `trace_<engine>.csv`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Also write the final iterate, one value per line.
    #[arg(long)]
    pub save_x: Option<PathBuf>,
}

/// Plan for the problem's regime at delay `tau`, or a forced plan.
pub fn select_plan(p: &QuadraticProblem, tau: u64, gamma: Option<f64>) -> anyhow::Result<StepPlan> {
    let lip = compute_lipschitz(p);
    let n = p.dim();
    let regime = if p.region().is_box() {
        Regime::Constrained
    } else {
        Regime::Unconstrained
    };
    if let Some(g) = gamma {
        log::warn!("steplength forced to γ = {g}; no admissibility is claimed");
        return Ok(StepPlan::forced(regime, n, lip.l_max, lip.l_res, tau, g)?);
    }
    let plan = match regime {
        Regime::Unconstrained if tau == 0 && !unconstrained_delay_admissible(n, lip.l_res / lip.l_max, 0) => {
            // Too small for the corollary even without delay: keep its ρ and
            // take the general γ bound.
            let rho = 1.0 + 2.0 * E * (lip.l_res / lip.l_max) / (n as f64).sqrt();
            log::info!("n = {n} is below the corollary's range at τ = 0; using the general bound with ρ = {rho}");
            plan_unconstrained_general(n, lip.l_max, lip.l_res, 0, rho)
        }
        Regime::Unconstrained => plan_unconstrained_corollary(n, lip.l_max, lip.l_res, tau),
        Regime::Constrained if tau >= 1 => plan_constrained_corollary(n, lip.l_max, lip.l_res, tau),
        Regime::Constrained if n >= 5 => {
            let rho = 1.01 / (1.0 - 2.0 / (n as f64).sqrt());
            plan_constrained_general(n, lip.l_max, lip.l_res, 0, rho)
        }
        Regime::Constrained => {
            log::info!("n = {n} < 5 with τ = 0: serial projected steps with γ = 1");
            StepPlan::forced(regime, n, lip.l_max, lip.l_res, 0, 1.0)
        }
    };
    plan.map_err(|e| anyhow::anyhow!("{e}; pass --gamma to force a steplength"))
}

fn schedule_for(arg: Option<ScheduleArg>, tau: u64, seed: u64) -> DelaySchedule {
    let arg = arg.unwrap_or(if tau == 0 { ScheduleArg::Zero } else { ScheduleArg::Fixed });
    match arg {
        ScheduleArg::Zero => DelaySchedule::zero(),
        ScheduleArg::Fixed => DelaySchedule::fixed(tau),
        ScheduleArg::Random => DelaySchedule::random_uniform(tau, seed),
        ScheduleArg::Adversarial => DelaySchedule::adversarial(tau),
    }
}

struct Summary {
    x: Vec<f64>,
    trace: Trace,
    residual: f64,
    epochs: f64,
    updates: u64,
    seconds: f64,
    reached: bool,
}

pub fn run(ctx: &Ctx, args: &SolveArgs, parameters: Value) -> anyhow::Result<Outcome> {
    let started = unix_now();
    let mut p = load_problem(&args.problem).with_context(|| format!("reading {}", args.problem.display()))?;
    let n = p.dim();
    if args.threads == 0 {
        bail!("--threads must be at least 1");
    }
    if let Some(f) = args.f_star {
        p.set_optimum(Some(OptimumHint { value: f, point: None }));
    }
    let multicore = matches!(args.engine, EngineArg::Async | EngineArg::Locked);
    let tau = args
        .tau
        .unwrap_or(if multicore { solver::default_tau(args.threads) } else { 0 });
    if args.engine == EngineArg::Serial && tau > 0 {
        bail!("the serial engine has no delay; drop --tau or use --engine simulator");
    }
    let x0 = vec![
        match args.x0 {
            StartArg::Zero => 0.0,
            StartArg::One => 1.0,
        };
        n
    ];
    let plan = if args.engine == EngineArg::Syngd {
        None
    } else {
        Some(select_plan(&p, tau, args.gamma)?)
    };
    let gamma = plan.as_ref().map_or(args.gamma.unwrap_or(1.0), |pl| pl.gamma);
    let cfg = SolverConfig {
        threads: args.threads,
        gamma,
        shuffle_period: args.shuffle_period,
        tolerance: args.tol,
        max_epochs: args.max_epochs,
        seed: ctx.seed,
        check_interval: args.check_interval,
        audit: false,
        x0: Some(x0.clone()),
    };
    cfg.validate(n)?;
    let iterations = args
        .iterations
        .unwrap_or((args.max_epochs.max(1) * n as u64).saturating_sub(1));
    let stride = args.stride.unwrap_or(0);

    let summary = match args.engine {
        EngineArg::Async | EngineArg::Locked | EngineArg::Syngd => {
            let engine = match args.engine {
                EngineArg::Async => Engine::Async,
                EngineArg::Locked => Engine::Locked,
                _ => Engine::Syngd,
            };
            let r = solver::solve(&p, &cfg, engine)?;
            Summary {
                residual: r.stats.final_residual,
                epochs: r.stats.epochs,
                updates: r.stats.updates,
                seconds: r.stats.wall_clock.as_secs_f64(),
                reached: r.stats.tolerance_reached,
                x: r.x,
                trace: r.trace,
            }
        }
        EngineArg::Serial => {
            let start = Instant::now();
            let (x, trace) =
                simulator::serial_reference_until(&p, gamma, &x0, iterations, ctx.seed, stride, Some(args.tol))?;
            let seconds = start.elapsed().as_secs_f64();
            finish_sequential(x, trace, seconds, n, args.tol)
        }
        EngineArg::Simulator => {
            let schedule = schedule_for(args.schedule, tau, ctx.seed);
            let opts = RunOptions::new(iterations, ctx.seed).stride(stride).stop_at(args.tol);
            let start = Instant::now();
            let r = simulator::run(&p, plan.as_ref().expect("simulator runs have a plan"), &schedule, &x0, &opts)?;
            let seconds = start.elapsed().as_secs_f64();
            finish_sequential(r.x, r.trace, seconds, n, args.tol)
        }
    };

    let envelope = match (&plan, p.optimum(), args.engine) {
        (Some(plan), Some(hint), e) if e != EngineArg::Syngd && plan.regime == Regime::Unconstrained => {
            let modulus = estimate_modulus(&p).value;
            let gap = p.objective(&p.project(&x0))? - hint.value;
            (modulus > 0.0).then(|| linear_envelope(plan, modulus, gap.max(0.0), 0.0).ok()).flatten()
        }
        _ => None,
    };

    let name = engine_name(args.engine);
    let trace_path = ctx.out(args.trace.clone().unwrap_or_else(|| PathBuf::from(format!("trace_{name}.csv"))));
    std::fs::write(&trace_path, summary.trace.to_csv(envelope.as_ref(), None))
        .with_context(|| format!("writing {}", trace_path.display()))?;
    let mut outputs = vec![trace_path.display().to_string()];
    if let Some(xp) = &args.save_x {
        let xp = ctx.out(xp);
        let text: String = summary.x.iter().map(|v| fmt_real(*v) + "\n").collect();
        std::fs::write(&xp, text).with_context(|| format!("writing {}", xp.display()))?;
        outputs.push(xp.display().to_string());
    }

    ctx.say(format!(
        "{name}: final residual {:e}, epochs {:.2}, updates {}, wall-clock {:.3} s, tolerance {} ({:e})",
        summary.residual,
        summary.epochs,
        summary.updates,
        summary.seconds,
        if summary.reached { "reached" } else { "not reached" },
        args.tol
    ));
    if let Some(pl) = &plan {
        ctx.say(format!("plan: τ = {}, γ = {}, ρ = {}, ψ = {} ({:?})", pl.tau, pl.gamma, pl.rho, pl.psi, pl.source));
    }
    ctx.say(format!("trace: {}", trace_path.display()));

    let mut m = RunManifest::new("solve", ctx.seed, parameters, started);
    m.problem_source = Some(args.problem.display().to_string());
    m.plan = plan.as_ref().map(plan_json);
    m.solver = Some(solver_json(&cfg));
    m.outputs = outputs;
    m.results = json!({
        "engine": name,
        "final_residual": summary.residual,
        "epochs": summary.epochs,
        "updates": summary.updates,
        "wall_clock_secs": summary.seconds,
        "tolerance_reached": summary.reached,
    });
    m.write_beside(&trace_path)?;
    Ok(Outcome::Success)
}

fn finish_sequential(x: Vec<f64>, trace: Trace, seconds: f64, n: usize, tol: f64) -> Summary {
    let last = *trace.last().expect("runs record the start");
    Summary {
        x,
        residual: last.residual,
        epochs: last.iteration as f64 / n as f64,
        updates: last.iteration,
        seconds,
        reached: last.residual <= tol,
        trace,
    }
}

fn engine_name(e: EngineArg) -> &'static str {
    match e {
        EngineArg::Async => "async",
        EngineArg::Locked => "locked",
        EngineArg::Syngd => "syngd",
        EngineArg::Serial => "serial",
        EngineArg::Simulator => "simulator",
    }
}
