//! Three operations for the static page in `www/`: a steplength plan with
//! its envelope, a simulated mean trace against that envelope, and the
//! largest admissible delay as a function of `n`.

use wasm_bindgen::prelude::*;

use asyscd::generators::{gen_synthetic_qp, SyntheticSpec};
use asyscd::problem::compute_lipschitz;
use asyscd::simulator::{run_with_gamma, DelaySchedule, RunOptions};
use asyscd::theory::{
    linear_envelope, max_tau_constrained, max_tau_unconstrained, plan_constrained_corollary,
    plan_unconstrained_corollary, sublinear_envelope, Regime, StepPlan, TheoryError,
};

/// Largest problem the page will simulate.
pub const MAX_DEMO_N: usize = 400;

fn corollary_plan(n: usize, ratio: f64, tau: u64, constrained: bool) -> Result<StepPlan, TheoryError> {
    if constrained {
        plan_constrained_corollary(n, 1.0, ratio, tau)
    } else {
        plan_unconstrained_corollary(n, 1.0, ratio, tau)
    }
}

/// Corollary plan, or the forced step `γ = 1/2` when `τ` is inadmissible.
fn plan_or_forced(n: usize, l_max: f64, l_res: f64, tau: u64, constrained: bool) -> Result<(StepPlan, bool), String> {
    let r = if constrained {
        plan_constrained_corollary(n, l_max, l_res, tau)
    } else {
        plan_unconstrained_corollary(n, l_max, l_res, tau)
    };
    match r {
        Ok(p) => Ok((p, true)),
        Err(TheoryError::Inadmissible { .. }) => {
            let regime = if constrained { Regime::Constrained } else { Regime::Unconstrained };
            StepPlan::forced(regime, n, l_max, l_res, tau, 0.5)
                .map(|p| (p, false))
                .map_err(|e| e.to_string())
        }
        Err(e) => Err(e.to_string()),
    }
}

#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct PlanView {
    admissible: bool,
    gamma: f64,
    rho: f64,
    psi: f64,
    message: String,
    curve: Vec<f64>,
}

#[wasm_bindgen]
impl PlanView {
    #[wasm_bindgen(getter)]
    pub fn admissible(&self) -> bool {
        self.admissible
    }
    #[wasm_bindgen(getter)]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    #[wasm_bindgen(getter)]
    pub fn rho(&self) -> f64 {
        self.rho
    }
    #[wasm_bindgen(getter)]
    pub fn psi(&self) -> f64 {
        self.psi
    }
    #[wasm_bindgen(getter)]
    pub fn message(&self) -> String {
        self.message.clone()
    }
    /// Interleaved `(j, bound)` pairs.
    #[wasm_bindgen(getter)]
    pub fn curve(&self) -> Vec<f64> {
        self.curve.clone()
    }
}

/// Corollary plan for `(n, L_res/L_max, τ)` and its envelope over
/// `epochs · n` iterations at `points` evenly spaced `j`. A positive
/// `modulus` gives the linear envelope, zero the sublinear one.
pub fn plan_envelope(
    n: usize,
    ratio: f64,
    tau: u64,
    constrained: bool,
    modulus: f64,
    f0_gap: f64,
    radius: f64,
    epochs: u64,
    points: usize,
) -> PlanView {
    let plan = match corollary_plan(n, ratio, tau, constrained) {
        Ok(p) => p,
        Err(e) => {
            return PlanView {
                admissible: false,
                gamma: f64::NAN,
                rho: f64::NAN,
                psi: f64::NAN,
                message: e.to_string(),
                curve: Vec::new(),
            }
        }
    };
    let env = if modulus > 0.0 {
        linear_envelope(&plan, modulus, f0_gap, radius)
    } else {
        sublinear_envelope(&plan, f0_gap, radius)
    };
    let (curve, message) = match env {
        Ok(env) => {
            let horizon = epochs * n as u64;
            let points = points.max(2) as u64;
            let curve = (0..points)
                .flat_map(|k| {
                    let j = horizon * k / (points - 1);
                    [j as f64, env.objective_bound(j)]
                })
                .collect();
            (curve, String::new())
        }
        Err(e) => (Vec::new(), e.to_string()),
    };
    PlanView {
        admissible: true,
        gamma: plan.gamma,
        rho: plan.rho,
        psi: plan.psi,
        message,
        curve,
    }
}

#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct TraceView {
    epochs: Vec<f64>,
    mean_gap: Vec<f64>,
    envelope: Vec<f64>,
    gamma: f64,
    admissible: bool,
    ratio: f64,
}

#[wasm_bindgen]
impl TraceView {
    #[wasm_bindgen(getter)]
    pub fn epochs(&self) -> Vec<f64> {
        self.epochs.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn mean_gap(&self) -> Vec<f64> {
        self.mean_gap.clone()
    }
    /// Bound on the objective gap implied by the envelope.
    #[wasm_bindgen(getter)]
    pub fn envelope(&self) -> Vec<f64> {
        self.envelope.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    #[wasm_bindgen(getter)]
    pub fn admissible(&self) -> bool {
        self.admissible
    }
    #[wasm_bindgen(getter)]
    pub fn ratio(&self) -> f64 {
        self.ratio
    }
}

/// Mean objective gap over `seeds` simulated runs with uniformly random
/// delays up to `tau` on a synthetic QP, one point per epoch.
pub fn simulate_trace(
    m: usize,
    n: usize,
    alpha: f64,
    constrained: bool,
    tau: u64,
    seeds: usize,
    epochs: u64,
    seed: u64,
) -> Result<TraceView, String> {
    if n > MAX_DEMO_N {
        return Err(format!("n is limited to {MAX_DEMO_N} in the demo"));
    }
    if seeds == 0 || epochs == 0 {
        return Err("need at least one seed and one epoch".into());
    }
    let mut spec = SyntheticSpec::new(m, n, alpha, seed);
    if constrained {
        spec = spec.constrained();
    }
    let p = gen_synthetic_qp(&spec).map_err(|e| e.to_string())?;
    let hint = p.optimum().cloned().ok_or("no optimum available for this instance")?;
    let lip = compute_lipschitz(&p);
    let (plan, admissible) = plan_or_forced(n, lip.l_max, lip.l_res, tau, constrained)?;
    let x0 = vec![0.0; n];
    let f0_gap = p.objective(&x0).map_err(|e| e.to_string())? - hint.value;
    let r0 = hint.point.as_ref().map_or(0.0, |x| x.iter().map(|v| v * v).sum::<f64>().sqrt());

    let opts = RunOptions::new(epochs * n as u64 - 1, 0);
    let mut sum = vec![0.0; epochs as usize + 1];
    for s in 0..seeds as u64 {
        let schedule = DelaySchedule::random_uniform(tau, seed ^ (s + 1));
        let run = run_with_gamma(&p, plan.gamma, &schedule, &x0, &RunOptions { seed: seed + s, ..opts.clone() })
            .map_err(|e| e.to_string())?;
        for (k, c) in run.trace.checkpoints.iter().enumerate() {
            sum[k] += c.gap.unwrap_or(f64::NAN);
        }
    }
    let mean_gap = sum.iter().map(|s| (s / seeds as f64).max(0.0)).collect();
    let env = if alpha > 0.0 {
        linear_envelope(&plan, alpha, f0_gap.max(0.0), r0)
    } else {
        sublinear_envelope(&plan, f0_gap, r0)
    }
    .map_err(|e| e.to_string())?;
    Ok(TraceView {
        epochs: (0..=epochs).map(|e| e as f64).collect(),
        mean_gap,
        envelope: (0..=epochs).map(|e| env.objective_bound(e * n as u64)).collect(),
        gamma: plan.gamma,
        admissible,
        ratio: lip.l_res / lip.l_max,
    })
}

/// `(n, max τ unconstrained, max τ constrained)` triples for `points`
/// geometrically spaced `n`; `-1` where no delay is admissible.
pub fn max_tau_curve(n_min: usize, n_max: usize, points: usize, ratio: f64) -> Vec<f64> {
    let (lo, hi) = (n_min.max(1) as f64, n_max.max(n_min.max(1)) as f64);
    let points = points.max(2);
    let mut out = Vec::with_capacity(3 * points);
    let mut last = 0;
    for k in 0..points {
        let n = (lo * (hi / lo).powf(k as f64 / (points - 1) as f64)).round() as usize;
        if k > 0 && n == last {
            continue;
        }
        last = n;
        let t = |v: Option<u64>| v.map_or(-1.0, |t| t as f64);
        out.extend([n as f64, t(max_tau_unconstrained(n, ratio)), t(max_tau_constrained(n, ratio))]);
    }
    out
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = planEnvelope)]
pub fn plan_envelope_js(
    n: usize,
    ratio: f64,
    tau: u32,
    constrained: bool,
    modulus: f64,
    f0_gap: f64,
    radius: f64,
    epochs: u32,
    points: usize,
) -> PlanView {
    plan_envelope(n, ratio, tau as u64, constrained, modulus, f0_gap, radius, epochs as u64, points)
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = simulateTrace)]
pub fn simulate_trace_js(
    m: usize,
    n: usize,
    alpha: f64,
    constrained: bool,
    tau: u32,
    seeds: usize,
    epochs: u32,
    seed: u32,
) -> Result<TraceView, JsValue> {
    simulate_trace(m, n, alpha, constrained, tau as u64, seeds, epochs as u64, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = maxTauCurve)]
pub fn max_tau_curve_js(n_min: usize, n_max: usize, points: usize, ratio: f64) -> Vec<f64> {
    max_tau_curve(n_min, n_max, points, ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_matches_reference_values() {
        let v = plan_envelope(10_000, 1.0, 10, false, 0.5, 1.0, 0.0, 2, 5);
        assert!(v.admissible);
        assert!((v.gamma - 0.7465025).abs() < 1e-6);
        assert_eq!(v.curve.len(), 10);
        assert_eq!(v.curve[0], 0.0);
        assert_eq!(v.curve[1], 1.0);
        assert!(v.curve.chunks(2).collect::<Vec<_>>().windows(2).all(|w| w[1][1] < w[0][1]));
    }

    #[test]
    fn inadmissible_plan_reports_why() {
        let v = plan_envelope(100, 1.0, 5, false, 0.5, 1.0, 0.0, 2, 5);
        assert!(!v.admissible);
        assert!(v.message.contains("not admissible"), "{}", v.message);
        assert!(v.curve.is_empty());
    }

    #[test]
    fn simulated_mean_stays_under_the_envelope() {
        let t = simulate_trace(60, 100, 0.5, false, 0, 20, 10, 3).unwrap();
        assert_eq!(t.epochs.len(), 11);
        assert!(t.admissible);
        assert!((t.mean_gap[0] - t.envelope[0]).abs() <= 1e-9 * t.envelope[0]);
        for (g, e) in t.mean_gap.iter().zip(&t.envelope) {
            assert!(*g <= 1.1 * e, "{g} > 1.1 × {e}");
        }
        assert!(t.mean_gap[10] < 0.1 * t.mean_gap[0]);
    }

    #[test]
    fn constrained_trace_uses_forced_step_when_needed() {
        let t = simulate_trace(30, 40, 0.5, true, 1, 5, 4, 1).unwrap();
        assert!(!t.admissible);
        assert_eq!(t.gamma, 0.5);
        assert!(simulate_trace(10, MAX_DEMO_N + 1, 0.5, false, 0, 1, 1, 1).is_err());
    }

    #[test]
    fn max_tau_grows_with_n() {
        let c = max_tau_curve(10, 1_000_000, 30, 1.0);
        let rows: Vec<&[f64]> = c.chunks(3).collect();
        assert_eq!(rows[0], &[10.0, -1.0, -1.0]);
        assert!(rows.windows(2).all(|w| w[1][0] > w[0][0] && w[1][1] >= w[0][1] && w[1][2] >= w[0][2]));
        let last = rows.last().unwrap();
        assert_eq!(last[0], 1e6);
        assert_eq!(last[1], (1000.0 / (2.0 * std::f64::consts::E)).floor() - 1.0);
    }
}
