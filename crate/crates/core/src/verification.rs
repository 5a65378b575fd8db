//! Checks that exercise the engines against the rate theory, finite
//! differences and each other. Each returns a [`Check`] rather than
//! panicking, so a caller can run them all and report.

use std::time::Instant;

use crate::generators::{gen_random_graph, gen_synthetic_qp, gen_vertex_cover, SyntheticSpec};
use crate::problem::{compute_lipschitz, distance, FeasibleRegion, Hessian, QuadraticProblem};
use crate::rng::{streams, CounterRng};
use crate::simulator::{
    ratio_diagnostic, run_seeds, run_with_gamma, serial_reference, DelaySchedule, Diagnostics, RatioKind,
    RunOptions, SimulationRun,
};
use crate::solver::{solve_async, solve_locked, solve_syngd, SolverConfig};
use crate::theory::{
    constrained_gamma_bounds, iterations_for_confidence, linear_envelope, max_tau_constrained,
    max_tau_unconstrained, plan_constrained_corollary, plan_unconstrained_corollary, sublinear_envelope,
    unconstrained_gamma_bounds, ConfidenceQuery, RateEnvelope, Regime, StepPlan,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String, start: Instant) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    fn failed(name: &str, detail: String, start: Instant) -> Self {
        Check::new(name, false, detail, start)
    }

    /// `PASS name (1.23 s): detail`.
    pub fn line(&self) -> String {
        format!(
            "{} {} ({:.2} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }
}

/// Random strictly convex quadratic of dimension `n`. Odd seeds give a
/// sparse banded, diagonally dominant Hessian; even seeds a dense
/// `BᵀB/k + μI`. `boxed` adds random bounds around the origin.
pub fn random_convex_qp(n: usize, seed: u64, boxed: bool) -> QuadraticProblem {
    let rng = CounterRng::new(seed);
    let mut s = rng.stream(streams::MATRIX);
    let hessian = if seed % 2 == 1 {
        let mut t = Vec::new();
        let mut row_sum = vec![0.0; n];
        for i in 0..n {
            for j in i + 1..(i + 4).min(n) {
                let v = 2.0 * s.next_uniform() - 1.0;
                t.push((i, j, v));
                t.push((j, i, v));
                row_sum[i] += v.abs();
                row_sum[j] += v.abs();
            }
        }
        for (i, r) in row_sum.iter().enumerate() {
            t.push((i, i, r + 0.1 + s.next_uniform()));
        }
        Hessian::from_triplets(n, t).expect("valid triplets")
    } else {
        let k = n / 2 + 1;
        let b: Vec<f64> = (0..k * n).map(|_| s.next_normal()).collect();
        let mu = 0.1 + 0.9 * s.next_uniform();
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = (0..k).map(|r| b[r * n + i] * b[r * n + j]).sum::<f64>() / k as f64;
                q[i * n + j] = v;
                q[j * n + i] = v;
            }
            q[i * n + i] += mu;
        }
        Hessian::from_dense(n, q).expect("valid matrix")
    };
    let c: Vec<f64> = (0..n).map(|_| s.next_normal()).collect();
    let region = if boxed {
        let lower: Vec<f64> = (0..n).map(|_| -s.next_uniform()).collect();
        let upper: Vec<f64> = (0..n).map(|_| s.next_uniform()).collect();
        FeasibleRegion::boxed(lower, upper).expect("valid bounds")
    } else {
        FeasibleRegion::Unconstrained
    };
    QuadraticProblem::new(hessian, c, region).expect("valid problem").mark_psd()
}

fn random_point(n: usize, seed: u64) -> Vec<f64> {
    let mut s = CounterRng::new(seed).stream(streams::START);
    (0..n).map(|_| s.next_normal()).collect()
}

/// Zero-delay simulator and the serial reference agree bit for bit.
pub fn check_zero_delay_equivalence(problems: usize, steps: u64, seed: u64) -> Check {
    let start = Instant::now();
    let name = "zero-delay equivalence";
    let rng = CounterRng::new(seed);
    for k in 0..problems as u64 {
        let n = 1 + rng.index(streams::MATRIX, k, 100);
        let p = random_convex_qp(n, seed.wrapping_mul(1000) + k, k % 2 == 0);
        let x0 = random_point(n, seed + k);
        let stride = (steps / 100).max(1);
        let opts = RunOptions::new(steps - 1, seed + k).stride(stride);
        let a = match run_with_gamma(&p, 1.0, &DelaySchedule::zero(), &x0, &opts) {
            Ok(r) => r,
            Err(e) => return Check::failed(name, format!("problem {k}: {e}"), start),
        };
        let (x, trace) = match serial_reference(&p, 1.0, &x0, steps - 1, seed + k, stride) {
            Ok(r) => r,
            Err(e) => return Check::failed(name, format!("problem {k}: {e}"), start),
        };
        let same_x = a.x.iter().zip(&x).all(|(u, v)| u.to_bits() == v.to_bits());
        if !same_x || a.trace != trace {
            return Check::failed(name, format!("problem {k} (n = {n}) diverged"), start);
        }
    }
    Check::new(
        name,
        true,
        format!("{problems} problems, {steps} steps each, identical iterates and traces"),
        start,
    )
}

/// Coordinate and full gradients against central differences.
pub fn check_gradients(instances: usize, seed: u64) -> Check {
    let start = Instant::now();
    let name = "gradient oracle";
    let rng = CounterRng::new(seed);
    let mut worst: f64 = 0.0;
    for k in 0..instances as u64 {
        let n = 1 + rng.index(streams::MATRIX, k, 20);
        let p = random_convex_qp(n, seed.wrapping_mul(7919) + k, false);
        let x = random_point(n, seed + 31 * k);
        let g = p.gradient(&x).expect("dimension");
        let mut fd = vec![0.0; n];
        for i in 0..n {
            let h = 1e-4 * (1.0 + x[i].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let d = (p.objective(&xp).unwrap() - p.objective(&xm).unwrap()) / (2.0 * h);
            fd[i] = d;
            let gi = p.coordinate_gradient(&x, i).unwrap();
            worst = worst.max((gi - d).abs() / gi.abs().max(1.0));
        }
        let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(diff / norm.max(1.0));
    }
    Check::new(
        name,
        worst <= 1e-6,
        format!("{instances} instances, worst relative error {worst:.2e} (limit 1e-6)"),
        start,
    )
}

/// `L_max ≤ L_res ≤ √n L_max` on random PSD matrices and `L_res ≤ 2 L_max`
/// on diagonally dominant ones. `L_res` is the raw largest column norm.
pub fn check_lipschitz(psd: usize, dominant: usize, seed: u64) -> Check {
    let start = Instant::now();
    let name = "Lipschitz properties";
    let rng = CounterRng::new(seed);
    let raw_l_res = |p: &QuadraticProblem| (0..p.dim()).map(|i| p.hessian().row_norm(i)).fold(0.0, f64::max);
    let tol = 1e-12;
    let mut failures = Vec::new();
    for k in 0..psd as u64 {
        let n = 1 + rng.index(streams::MATRIX, k, 50);
        let mut s = CounterRng::new(seed ^ (k + 1)).stream(streams::MATRIX);
        let rows = 1 + s.next_index(n + 1);
        let b: Vec<f64> = (0..rows * n).map(|_| s.next_normal()).collect();
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = (0..rows).map(|r| b[r * n + i] * b[r * n + j]).sum();
                q[i * n + j] = v;
                q[j * n + i] = v;
            }
        }
        let Ok(h) = Hessian::from_dense(n, q) else { continue };
        let Ok(p) = QuadraticProblem::new(h, vec![0.0; n], FeasibleRegion::Unconstrained) else { continue };
        let (l_max, l_res) = (p.l_max(), raw_l_res(&p));
        if l_res < l_max * (1.0 - tol) || l_res > (n as f64).sqrt() * l_max * (1.0 + tol) {
            failures.push(format!("PSD #{k}: L_max = {l_max}, L_res = {l_res}, n = {n}"));
        }
    }
    let mut worst_ratio: f64 = 0.0;
    for k in 0..dominant as u64 {
        let n = 1 + rng.index(streams::GRAPH, k, 50);
        let mut s = CounterRng::new(seed ^ (k + 1) << 20).stream(streams::MATRIX);
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let v = if s.next_uniform() < 0.5 { 2.0 * s.next_uniform() - 1.0 } else { 0.0 };
                q[i * n + j] = v;
                q[j * n + i] = v;
            }
        }
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| q[i * n + j].abs()).sum();
            q[i * n + i] = off + 1e-3 + s.next_uniform() * 0.1;
        }
        let p = QuadraticProblem::new(
            Hessian::from_dense(n, q).expect("valid"),
            vec![0.0; n],
            FeasibleRegion::Unconstrained,
        )
        .expect("valid");
        let ratio = raw_l_res(&p) / p.l_max();
        worst_ratio = worst_ratio.max(ratio);
        if ratio > 2.0 * (1.0 + tol) {
            failures.push(format!("dominant #{k}: ratio {ratio}"));
        }
    }
    Check::new(
        name,
        failures.is_empty(),
        if failures.is_empty() {
            format!("{psd} PSD and {dominant} diagonally dominant instances; worst dominant ratio {worst_ratio:.4}")
        } else {
            format!("{} violations, first: {}", failures.len(), failures[0])
        },
        start,
    )
}

/// Log-uniform `n ∈ [5, 10⁸]` and uniform `ratio ∈ [1, √n]`.
fn sample_n_ratio(s: &mut crate::rng::Stream) -> (usize, f64) {
    let n = (5.0f64.ln() + s.next_uniform() * (1e8f64.ln() - 5.0f64.ln())).exp().round() as usize;
    let ratio = 1.0 + s.next_uniform() * ((n as f64).sqrt() - 1.0);
    (n, ratio)
}

/// With `τ(τ+1) ≤ √n/(4e·ratio)`, `γ = 1/2` meets both constrained bounds
/// and `ψ ≤ 2`.
pub fn check_corollary_two(samples: usize, seed: u64) -> Check {
    let start = Instant::now();
    let name = "constrained plan claim";
    let mut s = CounterRng::new(seed).stream(streams::MATRIX);
    let mut tested = 0;
    let mut counterexample = None;
    while tested < samples {
        let (n, ratio) = sample_n_ratio(&mut s);
        let Some(max) = max_tau_constrained(n, ratio) else { continue };
        let tau = 1 + s.next_index(max as usize) as u64;
        tested += 1;
        let plan = match plan_constrained_corollary(n, 1.0, ratio, tau) {
            Ok(p) => p,
            Err(e) => {
                counterexample.get_or_insert(format!("n={n} ratio={ratio} τ={tau}: {e}"));
                continue;
            }
        };
        let [b1, b2] = constrained_gamma_bounds(n, ratio, tau, plan.rho);
        if !(plan.gamma == 0.5 && b1 >= 0.5 && b2 >= 0.5 && plan.psi <= 2.0) {
            counterexample.get_or_insert(format!(
                "n={n} ratio={ratio} τ={tau}: bounds ({b1}, {b2}), ψ = {}",
                plan.psi
            ));
        }
    }
    Check::new(
        name,
        counterexample.is_none(),
        counterexample.unwrap_or_else(|| format!("{samples} admissible samples, no counterexample")),
        start,
    )
}

/// With `τ + 1 ≤ √n/(2e·ratio)`, `γ = 1/ψ` meets all three unconstrained
/// bounds and `ψ ≤ 2`.
pub fn check_corollary_one(samples: usize, seed: u64) -> Check {
    let start = Instant::now();
    let name = "unconstrained plan claim";
    let mut s = CounterRng::new(seed).stream(streams::MATRIX);
    let mut tested = 0;
    let mut counterexample = None;
    while tested < samples {
        let (n, ratio) = sample_n_ratio(&mut s);
        let Some(max) = max_tau_unconstrained(n, ratio) else { continue };
        let tau = s.next_index(max as usize + 1) as u64;
        tested += 1;
        let plan = match plan_unconstrained_corollary(n, 1.0, ratio, tau) {
            Ok(p) => p,
            Err(e) => {
                counterexample.get_or_insert(format!("n={n} ratio={ratio} τ={tau}: {e}"));
                continue;
            }
        };
        let bounds = unconstrained_gamma_bounds(n, ratio, tau, plan.rho);
        if !(bounds.iter().all(|&b| plan.gamma <= b) && plan.psi <= 2.0) {
            counterexample.get_or_insert(format!(
                "n={n} ratio={ratio} τ={tau}: γ = {}, bounds {bounds:?}, ψ = {}",
                plan.gamma, plan.psi
            ));
        }
    }
    Check::new(
        name,
        counterexample.is_none(),
        counterexample.unwrap_or_else(|| format!("{samples} admissible samples, no counterexample")),
        start,
    )
}

/// Instance and plan used by the Monte-Carlo envelope checks.
#[derive(Debug, Clone)]
pub struct EnvelopeSetup {
    pub problem: QuadraticProblem,
    pub plan: StepPlan,
    pub schedule: DelaySchedule,
    pub x0: Vec<f64>,
    pub x_star: Vec<f64>,
    pub f_star: f64,
    /// How the plan was obtained, for reports.
    pub note: String,
}

/// Unconstrained synthetic instance with the corollary plan at the largest
/// admissible delay, or `None` when even `τ = 0` is inadmissible.
pub fn unconstrained_setup(m: usize, n: usize, alpha: f64, seed: u64) -> Result<EnvelopeSetup, String> {
    let p = gen_synthetic_qp(&SyntheticSpec::new(m, n, alpha, seed)).map_err(|e| e.to_string())?;
    let lip = compute_lipschitz(&p);
    let tau = max_tau_unconstrained(n, lip.ratio())
        .ok_or_else(|| format!("no admissible delay at n = {n}, ratio = {:.3}", lip.ratio()))?;
    let plan = plan_unconstrained_corollary(n, lip.l_max, lip.l_res, tau).map_err(|e| e.to_string())?;
    let hint = p.optimum().cloned().ok_or("instance has no optimum hint")?;
    Ok(EnvelopeSetup {
        schedule: DelaySchedule::fixed(tau),
        x0: vec![0.0; n],
        x_star: hint.point.ok_or("optimum hint has no point")?,
        f_star: hint.value,
        note: format!("ratio {:.3}, τ = {tau} (largest admissible), γ = {:.4}", lip.ratio(), plan.gamma),
        plan,
        problem: p,
    })
}

/// Bound-constrained synthetic instance with `τ = 1`. Uses the corollary
/// plan when admissible and otherwise forces its `γ = 1/2`.
pub fn constrained_setup(m: usize, n: usize, alpha: f64, seed: u64) -> Result<EnvelopeSetup, String> {
    let p = gen_synthetic_qp(&SyntheticSpec::new(m, n, alpha, seed).constrained()).map_err(|e| e.to_string())?;
    let lip = compute_lipschitz(&p);
    let (plan, how) = match plan_constrained_corollary(n, lip.l_max, lip.l_res, 1) {
        Ok(plan) => (plan, "corollary plan"),
        Err(_) => (
            StepPlan::forced(Regime::Constrained, n, lip.l_max, lip.l_res, 1, 0.5).map_err(|e| e.to_string())?,
            "τ = 1 inadmissible for the corollary, γ = 1/2 forced",
        ),
    };
    let hint = p.optimum().cloned().ok_or("instance has no optimum hint")?;
    let x0 = p.project(&vec![0.0; n]);
    Ok(EnvelopeSetup {
        schedule: DelaySchedule::fixed(1),
        x0,
        x_star: hint.point.ok_or("optimum hint has no point")?,
        f_star: hint.value,
        note: format!("ratio {:.3}, {how}", lip.ratio()),
        plan,
        problem: p,
    })
}

/// Seed-averaged checkpoint series.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanTrace {
    pub iterations: Vec<u64>,
    pub gap: Vec<f64>,
    pub residual: Vec<f64>,
    pub objective: Vec<f64>,
    pub dist_sq: Vec<f64>,
}

/// Averages aligned checkpoints; `dist_sq` is NaN without an optimum point.
pub fn mean_trace(runs: &[SimulationRun], f_star: f64) -> MeanTrace {
    let len = runs.iter().map(|r| r.trace.checkpoints.len()).min().unwrap_or(0);
    let seeds = runs.len() as f64;
    let mut m = MeanTrace {
        iterations: runs[0].trace.checkpoints[..len].iter().map(|c| c.iteration).collect(),
        gap: vec![0.0; len],
        residual: vec![0.0; len],
        objective: vec![0.0; len],
        dist_sq: vec![0.0; len],
    };
    for r in runs {
        for (k, c) in r.trace.checkpoints[..len].iter().enumerate() {
            m.gap[k] += (c.objective - f_star) / seeds;
            m.residual[k] += c.residual / seeds;
            m.objective[k] += c.objective / seeds;
            let d = c.distance.unwrap_or(f64::NAN);
            m.dist_sq[k] += d * d / seeds;
        }
    }
    m
}

/// Runs `seeds` simulations of a setup for long enough that the mean
/// residual falls to `target`: a pilot run picks the horizon, which is then
/// doubled.
pub fn simulate_to_residual(
    setup: &EnvelopeSetup,
    seeds: usize,
    target: f64,
    base_seed: u64,
    max_epochs: u64,
) -> Result<(Vec<SimulationRun>, MeanTrace), String> {
    let p = &setup.problem;
    let n = p.dim() as u64;
    let pilot_opts = RunOptions::new(max_epochs * n - 1, base_seed).stop_at(target);
    let pilot = run_with_gamma(p, setup.plan.gamma, &setup.schedule, &setup.x0, &pilot_opts)
        .map_err(|e| e.to_string())?;
    let horizon = (2 * pilot.updates).div_ceil(n).clamp(1, max_epochs) * n;
    let opts = RunOptions::new(horizon - 1, 0).stride(n);
    let seeds: Vec<u64> = (0..seeds as u64).map(|s| base_seed + s).collect();
    let runs = run_seeds(p, setup.plan.gamma, &setup.schedule, &setup.x0, &opts, &seeds).map_err(|e| e.to_string())?;
    let mean = mean_trace(&runs, setup.f_star);
    Ok((runs, mean))
}

/// Checkpoints up to and including the first whose mean residual is at
/// most `target`; all of them when it is never reached.
fn window(mean: &MeanTrace, target: f64) -> (usize, bool) {
    match mean.residual.iter().position(|&r| r <= target) {
        Some(k) => (k + 1, true),
        None => (mean.residual.len(), false),
    }
}

/// Largest `value / envelope` over all checkpoints, and over those after
/// the start (where the two agree by construction) with its index.
fn dominance(values: &[f64], iterations: &[u64], env: &RateEnvelope, measure_bound: bool) -> (f64, f64, usize) {
    let ratios: Vec<f64> = values
        .iter()
        .zip(iterations)
        .map(|(&v, &j)| v / if measure_bound { env.evaluate(j) } else { env.objective_bound(j) })
        .collect();
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    let (at, after) = ratios
        .iter()
        .copied()
        .enumerate()
        .skip(1)
        .fold((0, 0.0), |best, (k, r)| if r > best.1 { (k, r) } else { best });
    (worst, after, at)
}

const ENVELOPE_SLACK: f64 = 1.1;
const TARGET_RESIDUAL: f64 = 1e-6;

/// Mean gap of the unconstrained corollary plan under the linear envelope.
pub fn check_linear_unconstrained(setup: &EnvelopeSetup, seeds: usize, base_seed: u64) -> Check {
    let start = Instant::now();
    let name = "linear envelope, unconstrained";
    let p = &setup.problem;
    let Some(l) = p.modulus_hint() else {
        return Check::failed(name, "instance has no modulus".into(), start);
    };
    let (_, mean) = match simulate_to_residual(setup, seeds, TARGET_RESIDUAL, base_seed, 5000) {
        Ok(r) => r,
        Err(e) => return Check::failed(name, e, start),
    };
    let f0_gap = p.objective(&setup.x0).unwrap() - setup.f_star;
    let env = match linear_envelope(&setup.plan, l, f0_gap, distance(&setup.x0, &setup.x_star)) {
        Ok(e) => e,
        Err(e) => return Check::failed(name, e.to_string(), start),
    };
    let (len, reached) = window(&mean, TARGET_RESIDUAL);
    let (worst, after, at) = dominance(&mean.gap[..len], &mean.iterations[..len], &env, false);
    Check::new(
        name,
        worst <= ENVELOPE_SLACK && reached,
        format!(
            "{}; {seeds} seeds, {len} epoch checkpoints to mean residual {TARGET_RESIDUAL:e}{}; max mean-gap/envelope after the start {after:.3e} (epoch {at})",
            setup.note,
            if reached { "" } else { " (not reached)" }
        ),
        start,
    )
}

/// Mean `‖x_j − x*‖² + (2γ/L_max)(f(x_j) − f*)` under the constrained
/// linear envelope.
pub fn check_linear_constrained(setup: &EnvelopeSetup, seeds: usize, base_seed: u64) -> Check {
    let start = Instant::now();
    let name = "linear envelope, constrained";
    let p = &setup.problem;
    let Some(l) = p.modulus_hint() else {
        return Check::failed(name, "instance has no modulus".into(), start);
    };
    let (_, mean) = match simulate_to_residual(setup, seeds, TARGET_RESIDUAL, base_seed, 5000) {
        Ok(r) => r,
        Err(e) => return Check::failed(name, e, start),
    };
    let f0_gap = p.objective(&setup.x0).unwrap() - setup.f_star;
    let r0 = distance(&setup.x0, &setup.x_star);
    let env = match linear_envelope(&setup.plan, l, f0_gap, r0) {
        Ok(e) => e,
        Err(e) => return Check::failed(name, e.to_string(), start),
    };
    let w = 2.0 * setup.plan.gamma / setup.plan.l_max;
    let measure: Vec<f64> = mean.dist_sq.iter().zip(&mean.gap).map(|(d, g)| d + w * g).collect();
    let (len, reached) = window(&mean, TARGET_RESIDUAL);
    let (worst, after, at) = dominance(&measure[..len], &mean.iterations[..len], &env, true);
    Check::new(
        name,
        worst <= ENVELOPE_SLACK && reached,
        format!(
            "{}; {seeds} seeds, {len} epoch checkpoints{}; max mean-measure/envelope after the start {after:.3e} (epoch {at})",
            setup.note,
            if reached { "" } else { " (residual target not reached)" }
        ),
        start,
    )
}

/// Mean gap for a weakly convex instance under the sublinear envelope,
/// with `R` replaced by `R₀ = ‖x₀ − P_S(x₀)‖`.
pub fn check_sublinear(setup: &EnvelopeSetup, seeds: usize, base_seed: u64) -> Check {
    let start = Instant::now();
    let name = "sublinear envelope";
    let p = &setup.problem;
    let (_, mean) = match simulate_to_residual(setup, seeds, TARGET_RESIDUAL, base_seed, 5000) {
        Ok(r) => r,
        Err(e) => return Check::failed(name, e, start),
    };
    let f0_gap = p.objective(&setup.x0).unwrap() - setup.f_star;
    let r0 = distance(&setup.x0, &setup.x_star);
    let env = match sublinear_envelope(&setup.plan, f0_gap, r0) {
        Ok(e) => e,
        Err(e) => return Check::failed(name, e.to_string(), start),
    };
    let (len, reached) = window(&mean, TARGET_RESIDUAL);
    let (worst, after, at) = dominance(&mean.gap[..len], &mean.iterations[..len], &env, false);
    Check::new(
        name,
        worst <= ENVELOPE_SLACK && reached,
        format!(
            "{}; R₀ = {r0:.4}; {seeds} seeds, {len} epoch checkpoints{}; max mean-gap/envelope after the start {after:.3e} (epoch {at})",
            setup.note,
            if reached { "" } else { " (residual target not reached)" }
        ),
        start,
    )
}

/// Fraction of adjacent checkpoint pairs where the mean objective rises,
/// over checkpoints before the mean gap falls below `1e-10` (beyond that
/// only rounding moves it).
pub fn monotonicity_violations(mean: &MeanTrace) -> (usize, usize) {
    let len = mean.gap.iter().position(|&g| g < 1e-10).map_or(mean.gap.len(), |k| k + 1);
    let pairs = len.saturating_sub(1);
    let bad = mean.objective[..len].windows(2).filter(|w| w[1] > w[0]).count();
    (bad, pairs)
}

pub fn check_monotonicity(setups: &[&EnvelopeSetup], seeds: usize, base_seed: u64) -> Check {
    let start = Instant::now();
    let name = "expectation monotonicity";
    let mut parts = Vec::new();
    let mut passed = true;
    for setup in setups {
        let (_, mean) = match simulate_to_residual(setup, seeds, TARGET_RESIDUAL, base_seed, 5000) {
            Ok(r) => r,
            Err(e) => return Check::failed(name, e, start),
        };
        let (bad, pairs) = monotonicity_violations(&mean);
        let ok = pairs > 0 && bad as f64 <= 0.02 * pairs as f64;
        passed &= ok;
        let regime = if setup.problem.region().is_box() { "constrained" } else { "unconstrained" };
        parts.push(format!("{regime}: {bad}/{pairs} rising pairs"));
    }
    Check::new(name, passed, format!("{seeds} seeds; {}", parts.join(", ")), start)
}

/// Empirical `P(f(x_j) − f* > ε)` at the high-probability iteration count,
/// against `η`.
pub fn check_confidence(setup: &EnvelopeSetup, runs: usize, base_seed: u64) -> Check {
    let start = Instant::now();
    let constrained = setup.problem.region().is_box();
    let name = if constrained { "confidence count, constrained" } else { "confidence count, unconstrained" };
    let p = &setup.problem;
    let Some(l) = p.modulus_hint() else {
        return Check::failed(name, "instance has no modulus".into(), start);
    };
    let f0_gap = p.objective(&setup.x0).unwrap() - setup.f_star;
    let (epsilon, eta) = (0.25 * f0_gap, 0.2);
    let q = ConfidenceQuery {
        regime: setup.plan.regime,
        strong: true,
        n: p.dim(),
        l_max: p.l_max(),
        modulus: l,
        f0_gap,
        radius: distance(&setup.x0, &setup.x_star),
        epsilon,
        eta,
    };
    let j = match iterations_for_confidence(&q) {
        Ok(j) => j.max(1),
        Err(e) => return Check::failed(name, e.to_string(), start),
    };
    let seeds: Vec<u64> = (0..runs as u64).map(|s| base_seed + s).collect();
    let opts = RunOptions::new(j - 1, 0).stride(j);
    let out = match run_seeds(p, setup.plan.gamma, &setup.schedule, &setup.x0, &opts, &seeds) {
        Ok(r) => r,
        Err(e) => return Check::failed(name, e.to_string(), start),
    };
    let above = out
        .iter()
        .filter(|r| p.objective(&r.x).unwrap() - setup.f_star > epsilon)
        .count();
    let frac = above as f64 / runs as f64;
    Check::new(
        name,
        frac <= eta,
        format!("{}; j = {j}, {above}/{runs} runs above ε = 0.25·gap (fraction {frac:.3}, η = {eta})", setup.note),
        start,
    )
}

/// Tiny strongly convex instance (n = 10) with a zero-delay `γ = 1` plan
/// (unconstrained) or `τ = 1`, `γ = 1/2` (constrained), forced since no
/// corollary admits a delay bound at this size.
pub fn tiny_setup(constrained: bool, seed: u64) -> Result<EnvelopeSetup, String> {
    let n = 10;
    let mut spec = SyntheticSpec::new(20, n, 0.5, seed);
    if constrained {
        spec = spec.constrained();
    }
    let p = gen_synthetic_qp(&spec).map_err(|e| e.to_string())?;
    let lip = compute_lipschitz(&p);
    let (regime, tau, gamma, schedule) = if constrained {
        (Regime::Constrained, 1, 0.5, DelaySchedule::fixed(1))
    } else {
        (Regime::Unconstrained, 0, 1.0, DelaySchedule::zero())
    };
    let plan = StepPlan::forced(regime, n, lip.l_max, lip.l_res, tau, gamma).map_err(|e| e.to_string())?;
    let hint = p.optimum().cloned().ok_or("instance has no optimum hint")?;
    Ok(EnvelopeSetup {
        schedule,
        x0: p.project(&vec![0.0; n]),
        x_star: hint.point.ok_or("optimum hint has no point")?,
        f_star: hint.value,
        note: format!("n = {n}, τ = {tau}, γ = {gamma} forced"),
        plan,
        problem: p,
    })
}

/// Successive gradient-norm ratios under the plan's `ρ` band.
pub fn check_ratio_band(setup: &EnvelopeSetup, seeds: usize, epochs: u64, base_seed: u64) -> Check {
    let start = Instant::now();
    let name = "ratio band";
    let p = &setup.problem;
    let n = p.dim() as u64;
    let opts = RunOptions::new(epochs * n - 1, 0)
        .stride(epochs * n)
        .diagnostics(Diagnostics::GradientNorms);
    let seed_list: Vec<u64> = (0..seeds as u64).map(|s| base_seed + s).collect();
    let runs = match run_seeds(p, setup.plan.gamma, &setup.schedule, &setup.x0, &opts, &seed_list) {
        Ok(r) => r,
        Err(e) => return Check::failed(name, e.to_string(), start),
    };
    let series: Vec<Vec<f64>> = runs.into_iter().map(|r| r.series).collect();
    let report = match ratio_diagnostic(&series, RatioKind::GradientNorm) {
        Ok(r) => r,
        Err(e) => return Check::failed(name, e.to_string(), start),
    };
    let rho = setup.plan.rho;
    let (lo, hi) = (0.8 / rho, 1.2 * rho);
    Check::new(
        name,
        report.within(lo, hi),
        format!(
            "{}; {seeds} seeds, {} steps; ratios in [{:.6}, {:.6}], band [{lo:.4}, {hi:.4}] for ρ = {rho:.4}",
            setup.note,
            report.ratios.len(),
            report.min,
            report.max
        ),
        start,
    )
}

/// SynGD descends strictly, and SynGD, single-thread async and the
/// simulator agree on the optimum.
pub fn check_baselines(instances: usize, seed: u64) -> Check {
    let start = Instant::now();
    let name = "baseline correctness";
    let rng = CounterRng::new(seed);
    let mut worst_gap: f64 = 0.0;
    for k in 0..instances as u64 {
        let n = 5 + rng.index(streams::MATRIX, k, 56);
        let p = random_convex_qp(n, seed.wrapping_mul(104_729) + k, false);
        let cfg = SolverConfig {
            tolerance: 1e-10,
            max_epochs: 100_000,
            seed: k,
            ..Default::default()
        };
        let gd = match solve_syngd(&p, &cfg) {
            Ok(r) => r,
            Err(e) => return Check::failed(name, e.to_string(), start),
        };
        if let Some(w) = gd.trace.checkpoints.windows(2).position(|w| w[1].residual >= w[0].residual) {
            return Check::failed(name, format!("instance {k}: SynGD residual rose at iteration {}", w + 1), start);
        }
        let asy = match solve_async(&p, &cfg) {
            Ok(r) => r,
            Err(e) => return Check::failed(name, e.to_string(), start),
        };
        let opts = RunOptions::new(200_000 * n as u64, k).stop_at(1e-10);
        let sim = match run_with_gamma(&p, 1.0, &DelaySchedule::zero(), &vec![0.0; n], &opts) {
            Ok(r) => r,
            Err(e) => return Check::failed(name, e.to_string(), start),
        };
        if !(gd.stats.tolerance_reached && asy.stats.tolerance_reached) {
            return Check::failed(name, format!("instance {k}: tolerance not reached"), start);
        }
        let d = distance(&gd.x, &asy.x).max(distance(&gd.x, &sim.x)).max(distance(&asy.x, &sim.x));
        worst_gap = worst_gap.max(d);
    }
    Check::new(
        name,
        worst_gap <= 1e-4,
        format!("{instances} instances, SynGD residual strictly decreasing; max pairwise ‖Δx‖ {worst_gap:.2e} (limit 1e-4)"),
        start,
    )
}

/// Vertex-cover instance from a random graph solved to residual `1e-3`,
/// starting from `x = 1` (the origin is already optimal when `b = 0`).
pub fn check_vertex_cover_solve(vertices: u64, prob: f64, seed: u64, threads: usize) -> Check {
    let start = Instant::now();
    let name = "vertex-cover solve";
    let graph = match gen_random_graph(vertices, prob, seed, 5.0) {
        Ok(g) => g,
        Err(e) => return Check::failed(name, e.to_string(), start),
    };
    let p = match gen_vertex_cover(&graph) {
        Ok(p) => p,
        Err(e) => return Check::failed(name, e.to_string(), start),
    };
    let cfg = SolverConfig {
        threads,
        tolerance: 1e-3,
        max_epochs: 2000,
        seed,
        x0: Some(vec![1.0; p.dim()]),
        ..Default::default()
    };
    match solve_async(&p, &cfg) {
        Ok(r) => Check::new(
            name,
            r.stats.tolerance_reached && p.region().contains(&r.x),
            format!(
                "{} variables ({} edges), {threads} threads: residual {:.2e} after {:.1} epochs",
                p.dim(),
                p.dim() - graph.vertices().len(),
                r.stats.final_residual,
                r.stats.epochs
            ),
            start,
        ),
        Err(e) => Check::failed(name, e.to_string(), start),
    }
}

/// Outcome of the multicore comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticoreReport {
    pub cores: usize,
    pub epochs_p1: f64,
    pub epochs_p4: f64,
    pub secs_p1: f64,
    pub secs_p4: f64,
    pub locked_secs_p1: f64,
    pub locked_secs_p4: f64,
    pub all_reached: bool,
}

impl MulticoreReport {
    pub fn epochs_ok(&self) -> bool {
        self.all_reached && self.epochs_p4 <= 2.0 * self.epochs_p1
    }

    pub fn speedup(&self) -> f64 {
        self.secs_p1 / self.secs_p4
    }

    pub fn locked_speedup(&self) -> f64 {
        self.locked_secs_p1 / self.locked_secs_p4
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Median epochs and wall-clock at 1 and 4 threads over `reps` seeds, for
/// the lock-free and global-lock engines.
pub fn multicore_comparison(p: &QuadraticProblem, tol: f64, reps: usize, seed: u64) -> MulticoreReport {
    let cores = std::thread::available_parallelism().map_or(1, |c| c.get());
    let mut all_reached = true;
    let mut measure = |threads: usize, locked: bool| {
        let mut secs = Vec::new();
        let mut epochs = Vec::new();
        for r in 0..reps as u64 {
            let cfg = SolverConfig {
                threads,
                tolerance: tol,
                max_epochs: 10_000,
                seed: seed + r,
                check_interval: 1,
                ..Default::default()
            };
            let out = if locked { solve_locked(p, &cfg) } else { solve_async(p, &cfg) }.expect("valid config");
            all_reached &= out.stats.tolerance_reached;
            secs.push(out.stats.wall_clock.as_secs_f64());
            epochs.push(out.stats.epochs);
        }
        (median(secs), median(epochs))
    };
    let (secs_p1, epochs_p1) = measure(1, false);
    let (secs_p4, epochs_p4) = measure(4, false);
    let (locked_secs_p1, _) = measure(1, true);
    let (locked_secs_p4, _) = measure(4, true);
    MulticoreReport {
        cores,
        epochs_p1,
        epochs_p4,
        secs_p1,
        secs_p4,
        locked_secs_p1,
        locked_secs_p4,
        all_reached,
    }
}
