use std::fmt::Write as _;

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use asyscd::generators::{gen_synthetic_qp, SyntheticSpec};
use asyscd::verification::{self as v, Check};

use crate::manifest::{unix_now, RunManifest};
use crate::{Ctx, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Zero-delay simulator against the serial reference.
    Equivalence,
    /// Gradients against central differences.
    Gradcheck,
    /// L_res against L_max on random matrices.
    Lipschitz,
    /// Fuzzed steplength plans of both corollaries.
    Plans,
    /// Monte-Carlo mean traces against the rate envelopes.
    Envelopes,
    /// Mean objective is nonincreasing.
    Monotonicity,
    /// High-probability iteration counts.
    Confidence,
    /// Successive-norm ratios within the ρ band.
    Ratios,
    /// SynGD, async and simulator agree.
    Baselines,
    /// Vertex-cover solve to residual 1e-3.
    VertexCover,
    /// Epochs and wall-clock at 1 and 4 threads.
    Multicore,
    /// Every suite but multicore.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Strongly convex synthetic QP, linear envelope.
    Qp,
    /// Nonnegative synthetic QP, constrained linear envelope.
    Qpc,
    /// α = 0 synthetic QP, sublinear envelope.
    Weak,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    /// Envelope families; all three by default.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub family: Vec<Family>,
    /// Monte-Carlo seeds per estimate.
    #[arg(long, default_value_t = 100)]
    pub seeds: usize,
    /// Fuzz samples for the plan checks.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Random instances for the equivalence, gradient and baseline checks.
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    /// Rows of A for the envelope problems.
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    /// Dimension of the envelope problems.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Report file; defaults to `verify_<suite>.txt`.
    #[arg(long)]
    pub report: Option<std::path::PathBuf>,
}

fn setup_failure(name: &str, e: String) -> Check {
    Check {
        name: name.into(),
        passed: false,
        detail: e,
        seconds: 0.0,
    }
}

fn run_suite(suite: Suite, args: &VerifyArgs, seed: u64, out: &mut Vec<Check>, report: &mut dyn FnMut(&Check)) {
    let mut push = |c: Check| {
        report(&c);
        out.push(c);
    };
    let (m, n, alpha) = (args.m, args.n, args.alpha);
    match suite {
        Suite::Equivalence => push(v::check_zero_delay_equivalence(args.instances, 100_000, seed)),
        Suite::Gradcheck => push(v::check_gradients(args.instances.max(100), seed)),
        Suite::Lipschitz => push(v::check_lipschitz(1000, 200, seed)),
        Suite::Plans => {
            push(v::check_corollary_one(args.samples, seed));
            push(v::check_corollary_two(args.samples, seed));
        }
        Suite::Envelopes => {
            let families = if args.family.is_empty() {
                vec![Family::Qp, Family::Qpc, Family::Weak]
            } else {
                args.family.clone()
            };
            for f in families {
                let c = match f {
                    Family::Qp => v::unconstrained_setup(m, n, alpha, seed)
                        .map(|s| v::check_linear_unconstrained(&s, args.seeds, seed * 1000)),
                    Family::Qpc => v::constrained_setup(m, n, alpha, seed)
                        .map(|s| v::check_linear_constrained(&s, args.seeds, seed * 1000)),
                    Family::Weak => v::unconstrained_setup(m, n, 0.0, seed)
                        .map(|s| v::check_sublinear(&s, args.seeds, seed * 1000)),
                };
                push(c.unwrap_or_else(|e| setup_failure("envelope setup", e)));
            }
        }
        Suite::Monotonicity => {
            let c = v::unconstrained_setup(m, n, alpha, seed).and_then(|u| {
                v::constrained_setup(m, n, alpha, seed + 1).map(|c| v::check_monotonicity(&[&u, &c], args.seeds, seed * 1000))
            });
            push(c.unwrap_or_else(|e| setup_failure("monotonicity setup", e)));
        }
        Suite::Confidence => {
            for constrained in [false, true] {
                let c = v::tiny_setup(constrained, seed).map(|s| v::check_confidence(&s, 500, seed * 1000));
                push(c.unwrap_or_else(|e| setup_failure("confidence setup", e)));
            }
        }
        Suite::Ratios => {
            let c = v::unconstrained_setup(600, 2000, alpha, seed).map(|s| v::check_ratio_band(&s, args.seeds, 2, seed * 1000));
            push(c.unwrap_or_else(|e| setup_failure("ratio setup", e)));
        }
        Suite::Baselines => push(v::check_baselines(args.instances, seed)),
        Suite::VertexCover => {
            let threads = std::thread::available_parallelism().map_or(1, |c| c.get()).min(4);
            push(v::check_vertex_cover_solve(100, 0.05, seed, threads));
        }
        Suite::Multicore => {
            let start = std::time::Instant::now();
            let c = match gen_synthetic_qp(&SyntheticSpec::new(1500, 4000, alpha, seed)) {
                Ok(p) => {
                    let r = v::multicore_comparison(&p, 1e-5, 5, seed);
                    let applicable = r.cores >= 4;
                    Check {
                        name: "multicore".into(),
                        passed: r.epochs_ok() && (!applicable || r.speedup() >= 2.0),
                        detail: format!(
                            "{} core(s); median epochs P=1 {:.1}, P=4 {:.1}; speedup {:.2}{}; locked speedup {:.2}",
                            r.cores,
                            r.epochs_p1,
                            r.epochs_p4,
                            r.speedup(),
                            if applicable { "" } else { " (not required below 4 cores)" },
                            r.locked_speedup()
                        ),
                        seconds: start.elapsed().as_secs_f64(),
                    }
                }
                Err(e) => setup_failure("multicore setup", e.to_string()),
            };
            push(c);
        }
        Suite::All => {
            for s in [
                Suite::Equivalence,
                Suite::Gradcheck,
                Suite::Lipschitz,
                Suite::Plans,
                Suite::Envelopes,
                Suite::Monotonicity,
                Suite::Confidence,
                Suite::Ratios,
                Suite::Baselines,
                Suite::VertexCover,
            ] {
                run_suite(s, args, seed, out, report);
            }
        }
    }
}

pub fn run(ctx: &Ctx, args: &VerifyArgs, parameters: Value) -> anyhow::Result<Outcome> {
    let started = unix_now();
    let name = args.suite.to_possible_value().expect("no skipped variants").get_name().to_string();
    let mut checks = Vec::new();
    // Report lines go out as soon as each check finishes.
    run_suite(args.suite, args, ctx.seed, &mut checks, &mut |c| ctx.say(c.line()));
    let failed = checks.iter().filter(|c| !c.passed).count();
    ctx.say(format!("verify {name}: {} of {} checks passed", checks.len() - failed, checks.len()));

    let mut text = String::new();
    for c in &checks {
        let _ = writeln!(text, "{}", c.line());
    }
    let path = ctx.out(args.report.clone().unwrap_or_else(|| format!("verify_{name}.txt").into()));
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    let mut m = RunManifest::new("verify", ctx.seed, parameters, started);
    m.outputs = vec![path.display().to_string()];
    m.results = json!(checks
        .iter()
        .map(|c| json!({ "name": c.name, "passed": c.passed, "detail": c.detail, "seconds": c.seconds }))
        .collect::<Vec<_>>());
    m.write_beside(&path)?;
    Ok(if failed == 0 { Outcome::Success } else { Outcome::ChecksFailed })
}
