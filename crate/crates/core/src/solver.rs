//! Multicore engines: lock-free asynchronous coordinate descent with
//! epochs and a shuffle period, plus global-lock and synchronous
//! full-gradient baselines.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Barrier, Condvar, Mutex};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::problem::{ProblemError, QuadraticProblem};
use crate::rng::{streams, CounterRng, Stream};
use crate::trace::{Checkpoint, Trace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub threads: usize,
    /// Steplength multiplier; coordinate steps are `γ / L_max`.
    pub gamma: f64,
    /// Epochs between global reshuffles.
    pub shuffle_period: u64,
    pub tolerance: f64,
    pub max_epochs: u64,
    pub seed: u64,
    /// Epochs between residual evaluations.
    pub check_interval: u64,
    /// Count updates per coordinate.
    pub audit: bool,
    pub x0: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            threads: 1,
            gamma: 1.0,
            shuffle_period: 1,
            tolerance: 1e-5,
            max_epochs: 1000,
            seed: 0,
            check_interval: 1,
            audit: false,
            x0: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, n: usize) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        if !(self.tolerance > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if self.shuffle_period == 0 {
            return bad("shuffle period must be at least 1".into());
        }
        if self.check_interval == 0 {
            return bad("check interval must be at least 1".into());
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return bad(format!("gamma must be positive and finite, got {}", self.gamma));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != n {
                return Err(ProblemError::DimensionMismatch {
                    expected: n,
                    found: x0.len(),
                }
                .into());
            }
        }
        Ok(())
    }
}

/// Delay bound used for plan selection when running on `threads` workers.
pub fn default_tau(threads: usize) -> u64 {
    threads.saturating_sub(1) as u64
}

/// Iterate shared by all workers: one atomic cell per coordinate, no lock.
#[derive(Debug)]
pub struct SharedIterate {
    cells: Vec<AtomicU64>,
}

impl SharedIterate {
    pub fn new(x: &[f64]) -> Self {
        SharedIterate {
            cells: x.iter().map(|v| AtomicU64::new(v.to_bits())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn load(&self, i: usize) -> f64 {
        f64::from_bits(self.cells[i].load(Ordering::Relaxed))
    }

    #[inline]
    pub fn store(&self, i: usize, v: f64) {
        self.cells[i].store(v.to_bits(), Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.load(i)).collect()
    }

    pub fn snapshot_into(&self, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.load(i);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub threads: usize,
    /// Wall-clock of the solve loop, residual checks included.
    pub wall_clock: Duration,
    /// Part of `wall_clock` the checking thread spent on residual checks.
    pub check_time: Duration,
    /// Coordinate updates divided by `n` (iterations for SynGD).
    pub epochs: f64,
    pub updates: u64,
    pub final_residual: f64,
    pub tolerance_reached: bool,
    /// Per-coordinate update counts, when auditing.
    pub update_counts: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub trace: Trace,
    pub stats: Stats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Async,
    Locked,
    Syngd,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Async => "async",
            Engine::Locked => "locked",
            Engine::Syngd => "syngd",
        }
    }
}

pub fn solve(p: &QuadraticProblem, cfg: &SolverConfig, engine: Engine) -> Result<SolveResult, SolverError> {
    match engine {
        Engine::Async => solve_async(p, cfg),
        Engine::Locked => solve_locked(p, cfg),
        Engine::Syngd => solve_syngd(p, cfg),
    }
}

/// Barrier that releases every waiter as soon as the stop flag is raised.
struct StopBarrier {
    parties: usize,
    state: Mutex<(usize, u64)>,
    cv: Condvar,
}

impl StopBarrier {
    fn new(parties: usize) -> Self {
        StopBarrier {
            parties,
            state: Mutex::new((0, 0)),
            cv: Condvar::new(),
        }
    }

    /// `false` when released by a stop.
    fn wait(&self, stop: &AtomicBool) -> bool {
        let mut s = self.state.lock().expect("barrier poisoned");
        if stop.load(Ordering::Acquire) {
            return false;
        }
        let generation = s.1;
        s.0 += 1;
        if s.0 == self.parties {
            s.0 = 0;
            s.1 += 1;
            self.cv.notify_all();
            return true;
        }
        while s.1 == generation && !stop.load(Ordering::Acquire) {
            s = self.cv.wait(s).expect("barrier poisoned");
        }
        s.1 != generation
    }

    fn release(&self, stop: &AtomicBool) {
        let _guard = self.state.lock().expect("barrier poisoned");
        stop.store(true, Ordering::Release);
        self.cv.notify_all();
    }
}

/// Coordinate order for the next shuffle period. Every worker advances its
/// own copy identically, so no order is ever shared.
struct Shuffler {
    order: Vec<usize>,
    stream: Stream,
}

impl Shuffler {
    fn new(n: usize, seed: u64) -> Self {
        Shuffler {
            order: (0..n).collect(),
            stream: CounterRng::new(seed).stream(streams::SHUFFLE),
        }
    }

    fn next_period(&mut self) -> &[usize] {
        self.stream.shuffle(&mut self.order);
        &self.order
    }
}

fn block(n: usize, threads: usize, t: usize) -> std::ops::Range<usize> {
    (t * n / threads)..((t + 1) * n / threads)
}

fn initial_point(p: &QuadraticProblem, cfg: &SolverConfig) -> Vec<f64> {
    match &cfg.x0 {
        Some(x0) => p.project(x0),
        None => p.project(&vec![0.0; p.dim()]),
    }
}

/// Lock-free asynchronous coordinate descent. Each worker sweeps its block
/// of the shuffled order once per epoch, evaluating `∇_i f` on the live
/// shared iterate; the order is reshuffled every `shuffle_period` epochs.
pub fn solve_async(p: &QuadraticProblem, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    coordinate_engine(p, cfg, None)
}

/// [`solve_async`] with every read-evaluate-update under one global lock.
pub fn solve_locked(p: &QuadraticProblem, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    let lock = Mutex::new(());
    coordinate_engine(p, cfg, Some(&lock))
}

fn coordinate_engine(
    p: &QuadraticProblem,
    cfg: &SolverConfig,
    lock: Option<&Mutex<()>>,
) -> Result<SolveResult, SolverError> {
    let n = p.dim();
    cfg.validate(n)?;
    let threads = cfg.threads.min(n);
    if threads < cfg.threads {
        log::warn!("using {threads} workers: only {n} coordinates");
    }
    let step = cfg.gamma / p.l_max();
    let region = p.region();
    let x0 = initial_point(p, cfg);
    let shared = SharedIterate::new(&x0);
    let stop = AtomicBool::new(false);
    let barrier = StopBarrier::new(threads);
    let published: Vec<AtomicU64> = (0..threads).map(|_| AtomicU64::new(0)).collect();
    let counts: Option<Vec<AtomicU64>> = cfg.audit.then(|| (0..n).map(|_| AtomicU64::new(0)).collect());

    let mut trace = Trace::new(cfg.check_interval);
    trace.push(Checkpoint::measure(p, &x0, 0, 0.0));
    if trace.checkpoints[0].residual <= cfg.tolerance {
        stop.store(true, Ordering::Release);
    }

    let start = Instant::now();
    let (checks, check_time) = std::thread::scope(|s| {
        let worker = |t: usize| {
            let mut shuffler = Shuffler::new(n, cfg.seed);
            let range = block(n, threads, t);
            let mut done: u64 = 0;
            let mut checks = Vec::new();
            let mut check_time = Duration::ZERO;
            let mut snap = vec![0.0; n];
            let mut order: Vec<usize> = Vec::new();
            for epoch in 0..cfg.max_epochs {
                if epoch % cfg.shuffle_period == 0 {
                    if epoch > 0 && !barrier.wait(&stop) {
                        break;
                    }
                    order.clear();
                    order.extend_from_slice(&shuffler.next_period()[range.clone()]);
                }
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                for &i in &order {
                    let _guard = lock.map(|l| l.lock().expect("global lock poisoned"));
                    let g = p.hessian().row_dot_by(i, |j| shared.load(j)) + p.linear()[i];
                    let xi = shared.load(i);
                    shared.store(i, region.project_coordinate(i, xi - step * g));
                }
                if let Some(c) = &counts {
                    for &i in &order {
                        c[i].fetch_add(1, Ordering::Relaxed);
                    }
                }
                done += order.len() as u64;
                published[t].store(done, Ordering::Relaxed);

                if t == 0 && (epoch + 1) % cfg.check_interval == 0 {
                    let t0 = Instant::now();
                    shared.snapshot_into(&mut snap);
                    let updates: u64 = published.iter().map(|a| a.load(Ordering::Relaxed)).sum();
                    let c = Checkpoint::measure(p, &snap, updates, updates as f64 / n as f64);
                    let reached = c.residual <= cfg.tolerance;
                    checks.push(c);
                    check_time += t0.elapsed();
                    if reached {
                        barrier.release(&stop);
                        break;
                    }
                }
            }
            (checks, check_time)
        };
        let handles: Vec<_> = (1..threads).map(|t| s.spawn(move || worker(t))).collect();
        let lead = worker(0);
        for h in handles {
            h.join().expect("solver worker panicked");
        }
        lead
    });
    let wall_clock = start.elapsed();

    for c in checks {
        if trace.last().is_some_and(|l| l.iteration < c.iteration) {
            trace.push(c);
        }
    }
    let x = shared.snapshot();
    let updates: u64 = published.iter().map(|a| a.load(Ordering::Relaxed)).sum();
    let fin = Checkpoint::measure(p, &x, updates, updates as f64 / n as f64);
    if trace.last().is_some_and(|l| l.iteration < fin.iteration) {
        trace.push(fin);
    }
    Ok(SolveResult {
        stats: Stats {
            threads,
            wall_clock,
            check_time,
            epochs: updates as f64 / n as f64,
            updates,
            final_residual: fin.residual,
            tolerance_reached: fin.residual <= cfg.tolerance,
            update_counts: counts.map(|c| c.into_iter().map(AtomicU64::into_inner).collect()),
        },
        x,
        trace,
    })
}

pub const POWER_ITERATIONS: usize = 200;
pub const POWER_TOLERANCE: f64 = 1e-6;

/// Largest eigenvalue of `Q` by power iteration.
pub fn power_iteration(p: &QuadraticProblem, iterations: usize, tol: f64) -> f64 {
    let n = p.dim();
    let h = p.hessian();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.754_877_666).fract()).collect();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= nv);
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let w: Vec<f64> = (0..n).map(|i| h.row_dot(i, &v)).collect();
        let next: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        let nw = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nw == 0.0 {
            break;
        }
        v = w.into_iter().map(|a| a / nw).collect();
        let converged = (next - lambda).abs() <= tol * next.abs();
        lambda = next;
        if converged {
            break;
        }
    }
    // Clamp into [L_max, Gershgorin bound], both valid for λ_max.
    let gershgorin = (0..n).map(|i| h.row_norm_l1(i)).fold(0.0, f64::max);
    lambda.min(gershgorin).max(p.l_max())
}

/// Synchronous projected gradient descent with step `1/L`: each iteration
/// computes `∇f` by a row-partitioned parallel pass, then updates.
pub fn solve_syngd(p: &QuadraticProblem, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    let n = p.dim();
    cfg.validate(n)?;
    let threads = cfg.threads.min(n);
    let l = power_iteration(p, POWER_ITERATIONS, POWER_TOLERANCE);
    let step = 1.0 / l;
    let region = p.region();
    let x0 = initial_point(p, cfg);
    let x = SharedIterate::new(&x0);
    let g = SharedIterate::new(&vec![0.0; n]);
    let partial: Vec<AtomicU64> = (0..threads).map(|_| AtomicU64::new(0)).collect();
    let stop = AtomicBool::new(false);
    let barrier = Barrier::new(threads);

    let start = Instant::now();
    let (checks, check_time) = std::thread::scope(|s| {
        let worker = |t: usize| {
            let range = block(n, threads, t);
            let mut checks = Vec::new();
            let mut check_time = Duration::ZERO;
            let mut snap = vec![0.0; n];
            let mut k = 0u64;
            loop {
                let mut r2 = 0.0;
                for i in range.clone() {
                    let gi = p.hessian().row_dot_by(i, |j| x.load(j)) + p.linear()[i];
                    g.store(i, gi);
                    let xi = x.load(i);
                    let r = xi - region.project_coordinate(i, xi - gi);
                    r2 += r * r;
                }
                partial[t].store(r2.to_bits(), Ordering::Relaxed);
                barrier.wait();
                if t == 0 {
                    let t0 = Instant::now();
                    let residual = partial.iter().map(|a| f64::from_bits(a.load(Ordering::Relaxed))).sum::<f64>().sqrt();
                    x.snapshot_into(&mut snap);
                    let mut c = Checkpoint::measure(p, &snap, k, k as f64);
                    c.residual = residual;
                    checks.push(c);
                    if residual <= cfg.tolerance || k >= cfg.max_epochs {
                        stop.store(true, Ordering::Relaxed);
                    }
                    check_time += t0.elapsed();
                }
                barrier.wait();
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                for i in range.clone() {
                    x.store(i, region.project_coordinate(i, x.load(i) - step * g.load(i)));
                }
                k += 1;
                barrier.wait();
            }
            (checks, check_time)
        };
        let handles: Vec<_> = (1..threads).map(|t| s.spawn(move || worker(t))).collect();
        let lead = worker(0);
        for h in handles {
            h.join().expect("solver worker panicked");
        }
        lead
    });
    let wall_clock = start.elapsed();

    let xs = x.snapshot();
    let iterations = checks.last().map_or(0, |c| c.iteration);
    let final_residual = p.residual(&xs)?;
    let mut trace = Trace::new(1);
    for c in checks {
        trace.push(c);
    }
    Ok(SolveResult {
        x: xs,
        trace,
        stats: Stats {
            threads,
            wall_clock,
            check_time,
            epochs: iterations as f64,
            updates: iterations * n as u64,
            final_residual,
            tolerance_reached: final_residual <= cfg.tolerance,
            update_counts: None,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub threads: usize,
    pub median_sec: f64,
    /// `t₁ / t_P`; absent when a run missed the tolerance.
    pub speedup: Option<f64>,
    pub median_epochs: f64,
    pub reached: bool,
}

pub const SPEEDUP_HEADER: &str = "threads,median_sec,speedup,epochs";

impl SpeedupRow {
    pub fn csv(&self) -> String {
        use crate::io::fmt_real;
        format!(
            "{},{},{},{}",
            self.threads,
            fmt_real(self.median_sec),
            self.speedup.map(fmt_real).unwrap_or_default(),
            fmt_real(self.median_epochs)
        )
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

/// Median wall-clock and epochs over `reps` runs per thread count. Run `r`
/// uses seed `cfg.seed + r` at every thread count. Speedups are relative to
/// the single-thread median, which is measured even if 1 is not listed.
pub fn measure_speedup(
    p: &QuadraticProblem,
    base: &SolverConfig,
    thread_list: &[usize],
    reps: usize,
    engine: Engine,
) -> Result<Vec<SpeedupRow>, SolverError> {
    let reps = reps.max(1);
    let measure = |threads: usize| -> Result<SpeedupRow, SolverError> {
        let mut secs = Vec::with_capacity(reps);
        let mut epochs = Vec::with_capacity(reps);
        let mut reached = true;
        for r in 0..reps {
            let cfg = SolverConfig {
                threads,
                seed: base.seed.wrapping_add(r as u64),
                ..base.clone()
            };
            let out = solve(p, &cfg, engine)?;
            secs.push(out.stats.wall_clock.as_secs_f64());
            epochs.push(out.stats.epochs);
            reached &= out.stats.tolerance_reached;
        }
        Ok(SpeedupRow {
            threads,
            median_sec: median(secs),
            speedup: None,
            median_epochs: median(epochs),
            reached,
        })
    };
    let mut rows = thread_list.iter().map(|&t| measure(t)).collect::<Result<Vec<_>, _>>()?;
    let single = match rows.iter().find(|r| r.threads == 1) {
        Some(r) => r.clone(),
        None => measure(1)?,
    };
    for row in &mut rows {
        if row.reached && single.reached {
            row.speedup = Some(if row.threads == 1 {
                1.0
            } else {
                single.median_sec / row.median_sec
            });
        }
    }
    Ok(rows)
}
