//! Deterministic single-threaded execution of asynchronous stochastic
//! coordinate descent with an explicit delay schedule.
//!
//! Step `j` draws `i(j)` uniformly with replacement, reads the past iterate
//! `x_{k(j)}` with `j − τ ≤ k(j) ≤ j`, and updates coordinate `i(j)` of the
//! latest iterate:
//!
//! ```text
//! x_{j+1} = P(x_j − (γ/L_max) e_i ∇_i f(x_{k(j)}))
//! ```
//!
//! Reads are consistent by construction: the last `τ + 1` full iterates are
//! kept, so every evaluation sees a vector that actually existed.

use std::num::NonZeroUsize;

use thiserror::Error;

use crate::problem::{ProblemError, QuadraticProblem};
use crate::rng::{streams, CounterRng};
use crate::theory::StepPlan;
use crate::trace::{Checkpoint, Trace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulatorError {
    #[error("step {j}: read index k = {k} violates the delay bound τ = {tau}")]
    DelayViolation { j: u64, k: u64, tau: u64 },
    #[error("iterate {k} is no longer held at step {j} (history keeps τ + 1 = {depth})")]
    HistoryMiss { k: u64, j: u64, depth: usize },
    #[error("ratio diagnostics need at least {required} seeds, got {found}")]
    TooFewSeeds { found: usize, required: usize },
    #[error("ratio diagnostics need equal-length series of length ≥ 2")]
    RaggedSeries,
    #[error("steplength must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DelayKind {
    /// `k(j) = j`.
    Zero,
    /// Block-synchronous reads: `k(j) = ⌊j/(τ+1)⌋(τ+1)`, as if `τ + 1`
    /// workers read together and commit one after another. Every delay in
    /// `0..=τ` occurs.
    FixedTau,
    /// `k(j) = j − d` with `d` uniform on `0..=min(j, τ)`.
    RandomUniform,
    /// Maximal staleness: `k(j) = max(0, j − τ)`.
    Adversarial,
    /// Caller-supplied `k(j)` for `j < len`; `k(j) = j` afterwards. Not
    /// validated until the simulator reaches the offending step.
    Explicit(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelaySchedule {
    pub kind: DelayKind,
    pub tau: u64,
    pub seed: u64,
}

impl DelaySchedule {
    pub fn zero() -> Self {
        DelaySchedule {
            kind: DelayKind::Zero,
            tau: 0,
            seed: 0,
        }
    }

    pub fn fixed(tau: u64) -> Self {
        DelaySchedule {
            kind: DelayKind::FixedTau,
            tau,
            seed: 0,
        }
    }

    pub fn random_uniform(tau: u64, seed: u64) -> Self {
        DelaySchedule {
            kind: DelayKind::RandomUniform,
            tau,
            seed,
        }
    }

    pub fn adversarial(tau: u64) -> Self {
        DelaySchedule {
            kind: DelayKind::Adversarial,
            tau,
            seed: 0,
        }
    }

    pub fn explicit(tau: u64, reads: Vec<u64>) -> Self {
        DelaySchedule {
            kind: DelayKind::Explicit(reads),
            tau,
            seed: 0,
        }
    }

    /// Same schedule with a new seed (only affects `RandomUniform`).
    pub fn reseeded(&self, seed: u64) -> Self {
        DelaySchedule {
            seed,
            ..self.clone()
        }
    }

    /// `k(j)`.
    pub fn read_index(&self, j: u64) -> u64 {
        let tau = self.tau;
        match &self.kind {
            DelayKind::Zero => j,
            DelayKind::FixedTau => j / (tau + 1) * (tau + 1),
            DelayKind::RandomUniform => {
                let span = j.min(tau) + 1;
                let d = CounterRng::new(self.seed).index(streams::DELAY, j, span as usize) as u64;
                j - d
            }
            DelayKind::Adversarial => j.saturating_sub(tau),
            DelayKind::Explicit(reads) => reads.get(j as usize).copied().unwrap_or(j),
        }
    }

    /// Delay bound actually needed by the history buffer.
    fn depth(&self) -> u64 {
        match self.kind {
            DelayKind::Zero => 0,
            _ => self.tau,
        }
    }
}

/// The last `τ + 1` iterates.
#[derive(Debug, Clone)]
pub struct IterateHistory {
    slots: Vec<Vec<f64>>,
    j: u64,
}

impl IterateHistory {
    pub fn new(x0: Vec<f64>, tau: u64) -> Self {
        let depth = tau as usize + 1;
        IterateHistory {
            slots: vec![x0; depth],
            j: 0,
        }
    }

    /// Index `j` of the newest iterate.
    pub fn index(&self) -> u64 {
        self.j
    }

    fn slot(&self, k: u64) -> usize {
        (k % self.slots.len() as u64) as usize
    }

    pub fn current(&self) -> &[f64] {
        &self.slots[self.slot(self.j)]
    }

    /// `x_k`, available for `j − τ ≤ k ≤ j`.
    pub fn get(&self, k: u64) -> Result<&[f64], SimulatorError> {
        if k > self.j || self.j - k >= self.slots.len() as u64 {
            return Err(SimulatorError::HistoryMiss {
                k,
                j: self.j,
                depth: self.slots.len(),
            });
        }
        Ok(&self.slots[self.slot(k)])
    }

    /// Appends `x_{j+1}`, equal to `x_j` except at coordinate `i`.
    pub fn push_update(&mut self, i: usize, value: f64) {
        let cur = self.slot(self.j);
        let next = self.slot(self.j + 1);
        if cur != next {
            let (a, b) = if cur < next {
                let (lo, hi) = self.slots.split_at_mut(next);
                (&lo[cur], &mut hi[0])
            } else {
                let (lo, hi) = self.slots.split_at_mut(cur);
                (&hi[0], &mut lo[next])
            };
            b.copy_from_slice(a);
        }
        self.slots[next][i] = value;
        self.j += 1;
    }
}

/// Per-step series recorded for ratio diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diagnostics {
    #[default]
    None,
    /// `‖∇f(x_j)‖²` for `j = 0..=K+1`.
    GradientNorms,
    /// `‖x_j − x̄_{j+1}‖²` for `j = 0..=K`, with `x̄_{j+1}` the full
    /// projected step from `x_j` along `∇f(x_{k(j)})`.
    ProxGaps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Last step index `K`; the run applies `K + 1` updates.
    pub iterations: u64,
    pub seed: u64,
    /// Checkpoint every `stride` updates; `0` means one per `n` updates.
    pub stride: u64,
    pub diagnostics: Diagnostics,
    pub record_delays: bool,
    /// Stop at the first checkpoint whose residual is at most this.
    pub stop_residual: Option<f64>,
}

impl RunOptions {
    pub fn new(iterations: u64, seed: u64) -> Self {
        RunOptions {
            iterations,
            seed,
            stride: 0,
            diagnostics: Diagnostics::None,
            record_delays: false,
            stop_residual: None,
        }
    }

    pub fn stride(mut self, stride: u64) -> Self {
        self.stride = stride;
        self
    }

    pub fn diagnostics(mut self, d: Diagnostics) -> Self {
        self.diagnostics = d;
        self
    }

    pub fn record_delays(mut self) -> Self {
        self.record_delays = true;
        self
    }

    pub fn stop_at(mut self, residual: f64) -> Self {
        self.stop_residual = Some(residual);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub x: Vec<f64>,
    pub trace: Trace,
    /// `(j, k(j))` for every step, when requested.
    pub delays: Vec<(u64, u64)>,
    /// Diagnostic series, when requested.
    pub series: Vec<f64>,
    /// Updates actually applied.
    pub updates: u64,
}

fn effective_stride(stride: u64, n: usize) -> u64 {
    if stride == 0 {
        n as u64
    } else {
        stride
    }
}

/// Gradients of the iterates held in history, kept in step with it by
/// rank-one row updates and refreshed exactly once per `n` steps.
struct GradientRing {
    slots: Vec<Vec<f64>>,
}

impl GradientRing {
    fn new(p: &QuadraticProblem, x0: &[f64], depth: usize) -> Self {
        GradientRing {
            slots: vec![p.gradient_unchecked(x0); depth],
        }
    }

    fn slot(&self, k: u64) -> usize {
        (k % self.slots.len() as u64) as usize
    }

    fn get(&self, k: u64) -> &[f64] {
        &self.slots[self.slot(k)]
    }

    fn advance(&mut self, p: &QuadraticProblem, j: u64, i: usize, delta: f64, x_next: &[f64], refresh: bool) {
        let cur = self.slot(j);
        let next = self.slot(j + 1);
        if refresh {
            self.slots[next] = p.gradient_unchecked(x_next);
            return;
        }
        if cur != next {
            let src = self.slots[cur].clone();
            self.slots[next].copy_from_slice(&src);
        }
        let g = &mut self.slots[next];
        p.hessian().for_each_in_row(i, |col, v| g[col] += v * delta);
    }
}

fn squared_norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// Runs the analyzed algorithm with the plan's steplength `γ`.
pub fn run(
    p: &QuadraticProblem,
    plan: &StepPlan,
    schedule: &DelaySchedule,
    x0: &[f64],
    opts: &RunOptions,
) -> Result<SimulationRun, SimulatorError> {
    if schedule.tau > plan.tau {
        log::warn!(
            "schedule delay bound {} exceeds the plan's τ = {}",
            schedule.tau,
            plan.tau
        );
    }
    run_with_gamma(p, plan.gamma, schedule, x0, opts)
}

/// [`run`] with an explicit steplength multiplier `γ`.
pub fn run_with_gamma(
    p: &QuadraticProblem,
    gamma: f64,
    schedule: &DelaySchedule,
    x0: &[f64],
    opts: &RunOptions,
) -> Result<SimulationRun, SimulatorError> {
    let n = p.dim();
    if x0.len() != n {
        return Err(ProblemError::DimensionMismatch {
            expected: n,
            found: x0.len(),
        }
        .into());
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(SimulatorError::InvalidStep(gamma));
    }
    let step = gamma / p.l_max();
    let stride = effective_stride(opts.stride, n);
    let rng = CounterRng::new(opts.seed);
    let region = p.region();
    let tau = schedule.depth();

    let mut history = IterateHistory::new(p.project(x0), tau);
    let mut grads = match opts.diagnostics {
        Diagnostics::None => None,
        _ => Some(GradientRing::new(p, history.current(), tau as usize + 1)),
    };
    let mut trace = Trace::new(stride);
    let mut delays = Vec::new();
    let mut series = Vec::new();
    let mut scratch = vec![0.0; n];

    trace.push(Checkpoint::measure(p, history.current(), 0, 0.0));
    if let (Diagnostics::GradientNorms, Some(g)) = (opts.diagnostics, &grads) {
        series.push(squared_norm(g.get(0)));
    }
    let mut updates = 0;
    if opts.stop_residual.map_or(true, |t| trace.checkpoints[0].residual > t) {
        for j in 0..=opts.iterations {
            let k = schedule.read_index(j);
            if k > j || j - k > schedule.tau {
                return Err(SimulatorError::DelayViolation {
                    j,
                    k,
                    tau: schedule.tau,
                });
            }
            if opts.record_delays {
                delays.push((j, k));
            }
            let i = rng.index(streams::COORDINATE, j, n);
            let read = history.get(k)?;
            let g = p.coordinate_gradient_unchecked(read, i);

            if let (Diagnostics::ProxGaps, Some(ring)) = (opts.diagnostics, &grads) {
                let gk = ring.get(k);
                let cur = history.current();
                let mut s = 0.0;
                for c in 0..n {
                    let d = cur[c] - region.project_coordinate(c, cur[c] - step * gk[c]);
                    s += d * d;
                }
                series.push(s);
            }

            let old = history.current()[i];
            let new = region.project_coordinate(i, old - step * g);
            history.push_update(i, new);
            updates = j + 1;

            if let Some(ring) = grads.as_mut() {
                let refresh = (j + 1) % n as u64 == 0;
                ring.advance(p, j, i, new - old, history.current(), refresh);
                if opts.diagnostics == Diagnostics::GradientNorms {
                    series.push(squared_norm(ring.get(j + 1)));
                }
            }

            let done = j == opts.iterations;
            if (j + 1) % stride == 0 || done {
                scratch.copy_from_slice(history.current());
                let c = Checkpoint::measure(p, &scratch, j + 1, (j + 1) as f64 / n as f64);
                let stop = opts.stop_residual.is_some_and(|t| c.residual <= t);
                trace.push(c);
                if stop {
                    break;
                }
            }
        }
    }

    Ok(SimulationRun {
        x: history.current().to_vec(),
        trace,
        delays,
        series,
        updates,
    })
}

/// Serial stochastic coordinate descent (`τ = 0`), written independently of
/// [`run`]: a single in-place vector and no history.
pub fn serial_reference(
    p: &QuadraticProblem,
    gamma: f64,
    x0: &[f64],
    iterations: u64,
    seed: u64,
    stride: u64,
) -> Result<(Vec<f64>, Trace), SimulatorError> {
    serial_reference_until(p, gamma, x0, iterations, seed, stride, None)
}

/// [`serial_reference`] that stops at the first checkpoint whose residual is
/// at most `stop_residual`, the same rule [`RunOptions::stop_at`] applies.
pub fn serial_reference_until(
    p: &QuadraticProblem,
    gamma: f64,
    x0: &[f64],
    iterations: u64,
    seed: u64,
    stride: u64,
    stop_residual: Option<f64>,
) -> Result<(Vec<f64>, Trace), SimulatorError> {
    let n = p.dim();
    if x0.len() != n {
        return Err(ProblemError::DimensionMismatch {
            expected: n,
            found: x0.len(),
        }
        .into());
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(SimulatorError::InvalidStep(gamma));
    }
    let stride = effective_stride(stride, n);
    let step = gamma / p.l_max();
    let rng = CounterRng::new(seed);
    let mut x = p.project(x0);
    let mut trace = Trace::new(stride);
    let first = Checkpoint::measure(p, &x, 0, 0.0);
    let reached = |c: &Checkpoint| stop_residual.is_some_and(|t| c.residual <= t);
    let mut done = reached(&first);
    trace.push(first);
    let mut j = 0;
    while !done && j <= iterations {
        let i = rng.index(streams::COORDINATE, j, n);
        let g = p.hessian().row_dot(i, &x) + p.linear()[i];
        x[i] = p.region().project_coordinate(i, x[i] - step * g);
        if (j + 1) % stride == 0 || j == iterations {
            let c = Checkpoint::measure(p, &x, j + 1, (j + 1) as f64 / n as f64);
            done = reached(&c);
            trace.push(c);
        }
        j += 1;
    }
    Ok((x, trace))
}

/// Runs seeds `seeds` concurrently (one scoped thread per available core).
/// `RandomUniform` schedules are reseeded with each run's seed.
pub fn run_seeds(
    p: &QuadraticProblem,
    gamma: f64,
    schedule: &DelaySchedule,
    x0: &[f64],
    opts: &RunOptions,
    seeds: &[u64],
) -> Result<Vec<SimulationRun>, SimulatorError> {
    let workers = std::thread::available_parallelism()
        .map(NonZeroUsize::get)
        .unwrap_or(1)
        .min(seeds.len().max(1));
    let chunk = seeds.len().div_ceil(workers).max(1);
    let results: Vec<Result<Vec<SimulationRun>, SimulatorError>> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|&seed| {
                            let o = RunOptions {
                                seed,
                                ..opts.clone()
                            };
                            run_with_gamma(p, gamma, &schedule.reseeded(seed), x0, &o)
                        })
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(seeds.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Which successive-ratio the diagnostic estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioKind {
    /// `E‖∇f(x_{j+1})‖² / E‖∇f(x_j)‖²` from [`Diagnostics::GradientNorms`].
    GradientNorm,
    /// `E‖x_{j−1} − x̄_j‖² / E‖x_j − x̄_{j+1}‖²` from [`Diagnostics::ProxGaps`].
    ProxGap,
}

pub const MIN_RATIO_SEEDS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    pub ratios: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

impl RatioReport {
    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.min >= lo && self.max <= hi
    }
}

/// Successive ratios of seed-averaged squared norms. A `0/0` ratio counts
/// as `1`.
pub fn ratio_diagnostic(series: &[Vec<f64>], kind: RatioKind) -> Result<RatioReport, SimulatorError> {
    if series.len() < MIN_RATIO_SEEDS {
        return Err(SimulatorError::TooFewSeeds {
            found: series.len(),
            required: MIN_RATIO_SEEDS,
        });
    }
    let len = series[0].len();
    if len < 2 || series.iter().any(|s| s.len() != len) {
        return Err(SimulatorError::RaggedSeries);
    }
    let seeds = series.len() as f64;
    let mean: Vec<f64> = (0..len)
        .map(|j| series.iter().map(|s| s[j]).sum::<f64>() / seeds)
        .collect();
    let ratio = |num: f64, den: f64| {
        if num == 0.0 && den == 0.0 {
            1.0
        } else {
            num / den
        }
    };
    let ratios: Vec<f64> = mean
        .windows(2)
        .map(|w| match kind {
            RatioKind::GradientNorm => ratio(w[1], w[0]),
            RatioKind::ProxGap => ratio(w[0], w[1]),
        })
        .collect();
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(RatioReport { ratios, min, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{DenseMatrix, FeasibleRegion, Hessian, OptimumHint};
    use crate::theory::{plan_unconstrained_corollary, Regime};

    fn dense(n: usize, q: Vec<f64>, c: Vec<f64>, region: FeasibleRegion) -> QuadraticProblem {
        QuadraticProblem::new(Hessian::Dense(DenseMatrix::from_row_major(n, q).unwrap()), c, region).unwrap()
    }

    fn two_by_two() -> QuadraticProblem {
        dense(2, vec![2.0, 1.0, 1.0, 2.0], vec![-1.0, -1.0], FeasibleRegion::Unconstrained)
    }

    #[test]
    fn schedules_respect_the_delay_bound() {
        for s in [
            DelaySchedule::zero(),
            DelaySchedule::fixed(3),
            DelaySchedule::random_uniform(4, 11),
            DelaySchedule::adversarial(5),
        ] {
            for j in 0..1000 {
                let k = s.read_index(j);
                assert!(k <= j && j - k <= s.tau, "{s:?} j={j} k={k}");
            }
        }
        assert_eq!(DelaySchedule::zero().read_index(17), 17);
        assert_eq!(DelaySchedule::adversarial(3).read_index(2), 0);
        assert_eq!(DelaySchedule::adversarial(3).read_index(10), 7);
        let fixed: Vec<u64> = (0..6).map(|j| DelaySchedule::fixed(1).read_index(j)).collect();
        assert_eq!(fixed, vec![0, 0, 2, 2, 4, 4]);
    }

    #[test]
    fn history_lookup_window() {
        let mut h = IterateHistory::new(vec![0.0; 3], 2);
        for j in 0..5 {
            h.push_update(j % 3, (j + 1) as f64);
        }
        assert_eq!(h.index(), 5);
        assert_eq!(h.current(), &[4.0, 5.0, 3.0]);
        assert_eq!(h.get(4).unwrap(), &[4.0, 2.0, 3.0]);
        assert_eq!(h.get(3).unwrap(), &[1.0, 2.0, 3.0]);
        assert!(matches!(h.get(2), Err(SimulatorError::HistoryMiss { .. })));
        assert!(h.get(6).is_err());
        let mut single = IterateHistory::new(vec![1.0], 0);
        single.push_update(0, 2.0);
        assert_eq!(single.get(1).unwrap(), &[2.0]);
        assert!(single.get(0).is_err());
    }

    #[test]
    fn one_dimensional_exact_step() {
        let p = dense(1, vec![1.0], vec![-1.0], FeasibleRegion::Unconstrained);
        let r = run_with_gamma(&p, 1.0, &DelaySchedule::zero(), &[0.0], &RunOptions::new(0, 1)).unwrap();
        assert_eq!(r.x, vec![1.0]);
        assert_eq!(r.updates, 1);
        assert!(r.trace.last().unwrap().residual <= 1e-10);
    }

    #[test]
    fn explicit_schedule_violation_is_reported() {
        let p = two_by_two();
        let s = DelaySchedule::explicit(1, vec![0, 0, 0]);
        let err = run_with_gamma(&p, 0.5, &s, &[0.0, 0.0], &RunOptions::new(5, 1)).unwrap_err();
        assert_eq!(err, SimulatorError::DelayViolation { j: 2, k: 0, tau: 1 });
    }

    #[test]
    fn zero_schedule_matches_serial_reference() {
        let p = two_by_two();
        let opts = RunOptions::new(500, 9).stride(7);
        let a = run_with_gamma(&p, 1.0, &DelaySchedule::zero(), &[3.0, -2.0], &opts).unwrap();
        let (x, trace) = serial_reference(&p, 1.0, &[3.0, -2.0], 500, 9, 7).unwrap();
        assert_eq!(a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(a.trace, trace);
    }

    #[test]
    fn serial_stop_rule_matches_the_simulator() {
        let p = two_by_two();
        let opts = RunOptions::new(10_000, 3).stride(5).stop_at(1e-6);
        let a = run_with_gamma(&p, 1.0, &DelaySchedule::zero(), &[2.0, 2.0], &opts).unwrap();
        let (x, trace) = serial_reference_until(&p, 1.0, &[2.0, 2.0], 10_000, 3, 5, Some(1e-6)).unwrap();
        assert!(a.updates < 10_000);
        assert_eq!(a.x, x);
        assert_eq!(a.trace, trace);
    }

    #[test]
    fn serial_reference_converges_on_two_by_two() {
        let (x, trace) = serial_reference(&two_by_two(), 1.0, &[0.0, 0.0], 10_000, 5, 0).unwrap();
        assert!(trace.last().unwrap().residual <= 1e-8);
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-9 && (x[1] - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn trace_indices_increase_and_stride_does_not_change_iterates() {
        let p = two_by_two();
        let s = DelaySchedule::random_uniform(2, 4);
        let a = run_with_gamma(&p, 0.5, &s, &[1.0, 1.0], &RunOptions::new(99, 3).stride(1)).unwrap();
        let b = run_with_gamma(&p, 0.5, &s, &[1.0, 1.0], &RunOptions::new(99, 3).stride(13)).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.trace.checkpoints.len(), 101);
        assert!(b.trace.checkpoints.windows(2).all(|w| w[0].iteration < w[1].iteration));
        assert_eq!(b.trace.last().unwrap().iteration, 100);
    }

    #[test]
    fn box_runs_stay_feasible_and_update_one_coordinate() {
        let region = FeasibleRegion::uniform_box(2, 0.0, 0.2).unwrap();
        let p = dense(2, vec![2.0, 1.0, 1.0, 2.0], vec![-1.0, -1.0], region.clone());
        let opts = RunOptions::new(200, 2).stride(1).record_delays();
        let r = run_with_gamma(&p, 0.5, &DelaySchedule::adversarial(3), &[5.0, -5.0], &opts).unwrap();
        assert_eq!(r.delays.len(), 201);
        assert!(r.delays.iter().all(|&(j, k)| j - k <= 3));
        assert!(region.contains(&r.x));
    }

    #[test]
    fn incremental_gradients_match_recomputation() {
        let p = two_by_two();
        let opts = RunOptions::new(50, 8).diagnostics(Diagnostics::GradientNorms);
        let r = run_with_gamma(&p, 0.7, &DelaySchedule::fixed(2), &[2.0, -1.0], &opts).unwrap();
        assert_eq!(r.series.len(), 52);
        // Replay the iterates to recompute ‖∇f(x_j)‖² directly.
        let mut x = vec![2.0, -1.0];
        let mut hist = vec![x.clone()];
        let rng = CounterRng::new(8);
        let s = DelaySchedule::fixed(2);
        let step = 0.7 / p.l_max();
        for j in 0..=50u64 {
            let g2: f64 = p.gradient(&x).unwrap().iter().map(|v| v * v).sum();
            assert!((g2 - r.series[j as usize]).abs() <= 1e-12 * (1.0 + g2));
            let i = rng.index(streams::COORDINATE, j, 2);
            let k = s.read_index(j) as usize;
            x[i] -= step * p.coordinate_gradient(&hist[k], i).unwrap();
            hist.push(x.clone());
        }
        assert_eq!(x, r.x);
    }

    #[test]
    fn ratio_diagnostic_rules() {
        let short = vec![vec![1.0, 1.0]; 29];
        assert!(matches!(ratio_diagnostic(&short, RatioKind::GradientNorm), Err(SimulatorError::TooFewSeeds { .. })));
        let zeros = vec![vec![0.0; 5]; 30];
        let r = ratio_diagnostic(&zeros, RatioKind::ProxGap).unwrap();
        assert_eq!((r.min, r.max), (1.0, 1.0));
        let halving: Vec<Vec<f64>> = (0..30).map(|_| vec![8.0, 4.0, 2.0]).collect();
        let r = ratio_diagnostic(&halving, RatioKind::GradientNorm).unwrap();
        assert_eq!(r.ratios, vec![0.5, 0.5]);
        let r = ratio_diagnostic(&halving, RatioKind::ProxGap).unwrap();
        assert_eq!(r.ratios, vec![2.0, 2.0]);
        let mut ragged = halving.clone();
        ragged[3].pop();
        assert_eq!(ratio_diagnostic(&ragged, RatioKind::ProxGap), Err(SimulatorError::RaggedSeries));
    }

    #[test]
    fn fixed_point_gives_unit_ratios() {
        let p = dense(2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], FeasibleRegion::Unconstrained);
        let plan = plan_unconstrained_corollary(2, 1.0, 1.0, 0);
        assert!(plan.is_err()); // n = 2 is too small for the corollary; use a forced plan
        let plan = StepPlan::forced(Regime::Unconstrained, 2, 1.0, 1.0, 0, 1.0).unwrap();
        let seeds: Vec<u64> = (0..30).collect();
        let opts = RunOptions::new(20, 0).diagnostics(Diagnostics::GradientNorms);
        let runs = run_seeds(&p, plan.gamma, &DelaySchedule::zero(), &[0.0, 0.0], &opts, &seeds).unwrap();
        assert!(runs.iter().all(|r| r.x == vec![0.0, 0.0]));
        let series: Vec<Vec<f64>> = runs.into_iter().map(|r| r.series).collect();
        let report = ratio_diagnostic(&series, RatioKind::GradientNorm).unwrap();
        assert!(report.ratios.iter().all(|&r| r == 1.0));
    }

    #[test]
    fn gap_and_distance_use_the_optimum_hint() {
        let p = two_by_two().with_optimum(OptimumHint {
            value: -1.0 / 3.0,
            point: Some(vec![1.0 / 3.0, 1.0 / 3.0]),
        });
        let r = run_with_gamma(&p, 1.0, &DelaySchedule::zero(), &[0.0, 0.0], &RunOptions::new(3, 1)).unwrap();
        let c0 = r.trace.checkpoints[0];
        assert!((c0.gap.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((c0.distance.unwrap() - (2.0f64 / 9.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn stop_residual_ends_the_run_early() {
        let p = two_by_two();
        let opts = RunOptions::new(1_000_000, 4).stop_at(1e-6);
        let r = run_with_gamma(&p, 1.0, &DelaySchedule::zero(), &[0.0, 0.0], &opts).unwrap();
        assert!(r.updates < 1000);
        assert!(r.trace.last().unwrap().residual <= 1e-6);
    }
}
