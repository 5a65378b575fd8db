use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use serde::Serialize;
use serde_json::{json, Value};

use asyscd::io::fmt_real;
use asyscd::problem::{compute_lipschitz, estimate_modulus, load_problem};
use asyscd::theory::{
    iterations_for_confidence, linear_envelope, max_tau_constrained, max_tau_unconstrained, plan_constrained_corollary,
    plan_constrained_general, plan_unconstrained_corollary, plan_unconstrained_general, sublinear_envelope,
    ConfidenceQuery, Regime, StepPlan,
};

use crate::manifest::{plan_json, unix_now, RunManifest};
use crate::{Ctx, Outcome};

#[derive(Debug, Args, Serialize)]
pub struct TheoryArgs {
    /// Take n, L_max, L_res, region and modulus from a problem file.
    #[arg(long, conflicts_with_all = ["n", "ratio", "l_max"])]
    pub problem: Option<PathBuf>,
    #[arg(long, required_unless_present = "problem")]
    pub n: Option<usize>,
    /// L_res / L_max.
    #[arg(long, default_value_t = 1.0)]
    pub ratio: f64,
    #[arg(long, default_value_t = 1.0)]
    pub l_max: f64,
    /// Box-constrained regime (implied by a box problem file).
    #[arg(long)]
    pub constrained: bool,
    /// Delay bound; defaults to the largest admissible one.
    #[arg(long)]
    pub tau: Option<u64>,
    /// Plan for this ρ instead of the corollary choice.
    #[arg(long, conflicts_with = "gamma")]
    pub rho: Option<f64>,
    /// Forced steplength multiplier.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Strong-convexity modulus l.
    #[arg(long)]
    pub modulus: Option<f64>,
    /// f(x₀) − f*.
    #[arg(long)]
    pub f0_gap: Option<f64>,
    /// R (unconstrained) or R₀ (constrained).
    #[arg(long, default_value_t = 0.0)]
    pub radius: f64,
    /// Write envelope values for j = 0 ..= horizon.
    #[arg(long)]
    pub horizon: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub stride: u64,
    /// Envelope CSV file.
    #[arg(long, default_value = "envelope.csv")]
    pub envelope: PathBuf,
    /// Tolerance ε for the high-probability iteration count.
    #[arg(long, requires = "eta")]
    pub epsilon: Option<f64>,
    /// Failure probability η.
    #[arg(long, requires = "epsilon")]
    pub eta: Option<f64>,
}

pub fn run(ctx: &Ctx, args: &TheoryArgs, parameters: Value) -> anyhow::Result<Outcome> {
    let started = unix_now();
    let (n, l_max, l_res, regime, modulus) = match &args.problem {
        Some(path) => {
            let p = load_problem(path).with_context(|| format!("reading {}", path.display()))?;
            let lip = compute_lipschitz(&p);
            let boxed = p.region().is_box() || args.constrained;
            let modulus = args.modulus.or_else(|| Some(estimate_modulus(&p).value).filter(|l| *l > 0.0));
            (p.dim(), lip.l_max, lip.l_res, boxed, modulus)
        }
        None => {
            let n = args.n.expect("clap requires --n without --problem");
            (n, args.l_max, args.ratio * args.l_max, args.constrained, args.modulus)
        }
    };
    let regime = if regime { Regime::Constrained } else { Regime::Unconstrained };
    let ratio = l_res / l_max;
    let unc_max = max_tau_unconstrained(n, ratio.max(1.0));
    let con_max = max_tau_constrained(n, ratio.max(1.0));
    let show = |t: Option<u64>| t.map_or("none".to_string(), |t| t.to_string());
    ctx.say(format!("n = {n}, L_max = {l_max}, L_res = {l_res}, L_res/L_max = {ratio}"));
    ctx.say(format!(
        "largest admissible τ: unconstrained {}, constrained {}",
        show(unc_max),
        show(con_max)
    ));

    let default_tau = match regime {
        Regime::Unconstrained => unc_max,
        Regime::Constrained => con_max,
    };
    let tau = match (args.tau, default_tau) {
        (Some(t), _) => t,
        (None, Some(t)) => t,
        (None, None) if args.rho.is_some() || args.gamma.is_some() => 0,
        (None, None) => bail!("no delay is admissible for the {regime:?} corollary at this n and ratio; pass --tau with --rho or --gamma"),
    };
    let plan: StepPlan = match (args.gamma, args.rho, regime) {
        (Some(g), _, _) => StepPlan::forced(regime, n, l_max, l_res, tau, g)?,
        (None, Some(rho), Regime::Unconstrained) => plan_unconstrained_general(n, l_max, l_res, tau, rho)?,
        (None, Some(rho), Regime::Constrained) => plan_constrained_general(n, l_max, l_res, tau, rho)?,
        (None, None, Regime::Unconstrained) => plan_unconstrained_corollary(n, l_max, l_res, tau)?,
        (None, None, Regime::Constrained) => plan_constrained_corollary(n, l_max, l_res, tau)?,
    };
    ctx.say(format!(
        "{:?} plan ({:?}): τ = {}, γ = {}, ρ = {}, ψ = {}, step γ/L_max = {}{}",
        plan.regime,
        plan.source,
        plan.tau,
        plan.gamma,
        plan.rho,
        plan.psi,
        plan.step(),
        plan.active_bound.map(|b| format!(", binding bound {b:?}")).unwrap_or_default()
    ));

    let mut results = json!({ "max_tau_unconstrained": unc_max, "max_tau_constrained": con_max });
    if let (Some(eps), Some(eta), Some(gap)) = (args.epsilon, args.eta, args.f0_gap) {
        let q = ConfidenceQuery {
            regime,
            strong: modulus.is_some(),
            n,
            l_max,
            modulus: modulus.unwrap_or(0.0),
            f0_gap: gap,
            radius: args.radius,
            epsilon: eps,
            eta,
        };
        let j = iterations_for_confidence(&q)?;
        ctx.say(format!("iterations for P(f(x_j) − f* ≤ {eps}) ≥ {}: {j}", 1.0 - eta));
        results["iterations_for_confidence"] = json!(j);
    } else if args.epsilon.is_some() {
        bail!("--epsilon and --eta need --f0-gap");
    }

    if let Some(horizon) = args.horizon {
        let gap = args.f0_gap.context("--horizon needs --f0-gap")?;
        let linear = modulus.map(|l| linear_envelope(&plan, l, gap, args.radius)).transpose()?;
        let sublinear = if gap > 0.0 && (regime == Regime::Constrained || args.radius > 0.0) {
            Some(sublinear_envelope(&plan, gap, args.radius)?)
        } else {
            None
        };
        if linear.is_none() && sublinear.is_none() {
            bail!("no envelope applies: give --modulus for the linear one or --radius > 0 for the sublinear one");
        }
        let mut csv = String::from("j,linear,sublinear\n");
        let stride = args.stride.max(1);
        for k in 0..=horizon / stride {
            let j = k * stride;
            let cell = |e: &Option<asyscd::theory::RateEnvelope>| e.map(|e| fmt_real(e.evaluate(j))).unwrap_or_default();
            let _ = writeln!(csv, "{j},{},{}", cell(&linear), cell(&sublinear));
        }
        let path = ctx.out(&args.envelope);
        std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
        ctx.say(format!("envelope: {}", path.display()));
        let mut m = RunManifest::new("theory", ctx.seed, parameters, started);
        m.problem_source = args.problem.as_ref().map(|p| p.display().to_string());
        m.plan = Some(plan_json(&plan));
        m.outputs = vec![path.display().to_string()];
        m.results = results;
        m.write_beside(&path)?;
    }
    Ok(Outcome::Success)
}
