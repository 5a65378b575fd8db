//! Steplength plans, rate envelopes and high-probability iteration counts for
//! asynchronous stochastic coordinate descent with delay bound `τ`.
//!
//! Everything here is a pure function of `(n, L_max, L_res, τ, ...)`. The
//! unconstrained and box-constrained regimes have different admissibility
//! conditions and different envelope forms; a [`StepPlan`] records which
//! regime it was built for and how.

use std::f64::consts::E;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("delay bound τ = {tau} is not admissible: {reason}{}", max_tau_note(*max_tau))]
    Inadmissible {
        tau: u64,
        reason: String,
        max_tau: Option<u64>,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("steplength does not contract: per-iteration factor {factor}")]
    NotContracting { factor: f64 },
}

fn max_tau_note(max_tau: Option<u64>) -> String {
    match max_tau {
        Some(t) => format!(" (largest admissible τ is {t})"),
        None => " (no τ is admissible for this n and L_res/L_max)".to_string(),
    }
}

fn invalid(msg: impl Into<String>) -> TheoryError {
    TheoryError::InvalidArgument(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Unconstrained,
    Constrained,
}

/// How a plan's steplength was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanSource {
    /// The corollary's prescribed `ρ` and `γ`; admissibility was verified.
    Corollary,
    /// Minimum of the theorem's steplength bounds for a user-chosen `ρ`.
    General,
    /// Steplength supplied by the caller; no guarantee applies.
    Forced,
}

/// Which steplength upper bound is the binding one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaBound {
    /// `γ ≤ 1/ψ`.
    InversePsi,
    /// `γ ≤ (ρ−1)√n L_max / (2ρ^(τ+1) L_res)` (unconstrained only).
    RatioGrowth,
    /// `γ ≤ (ρ−1)√n L_max / (L_res ρ^τ (2 + L_res/(√n L_max)))` (unconstrained only).
    RatioCurvature,
    /// `γ ≤ (1 − 1/ρ − 2/√n) √n L_max / (4 L_res τ ρ^τ)` (constrained only).
    ConstrainedRatio,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    pub gamma: f64,
    pub rho: f64,
    pub psi: f64,
    pub tau: u64,
    pub regime: Regime,
    pub n: usize,
    pub l_max: f64,
    /// `L_res / L_max`.
    pub ratio: f64,
    pub source: PlanSource,
    pub active_bound: Option<GammaBound>,
}

impl StepPlan {
    /// Coordinate step `γ / L_max`.
    pub fn step(&self) -> f64 {
        self.gamma / self.l_max
    }

    /// A plan with a caller-chosen steplength. `ρ` follows the corollary
    /// formula for the regime so that `ψ` is defined; no admissibility is
    /// claimed.
    pub fn forced(
        regime: Regime,
        n: usize,
        l_max: f64,
        l_res: f64,
        tau: u64,
        gamma: f64,
    ) -> Result<StepPlan, TheoryError> {
        let ratio = check_constants(n, l_max, l_res)?;
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(invalid(format!("steplength must be positive, got {gamma}")));
        }
        let sqrt_n = (n as f64).sqrt();
        let (rho, psi) = match regime {
            Regime::Unconstrained => {
                let rho = 1.0 + 2.0 * E * ratio / sqrt_n;
                (rho, psi_unconstrained(n, ratio, tau, rho))
            }
            Regime::Constrained => {
                let rho = 1.0 + 4.0 * E * (tau.max(1) as f64) * ratio / sqrt_n;
                (rho, psi_constrained(n, ratio, tau, rho))
            }
        };
        Ok(StepPlan {
            gamma,
            rho,
            psi,
            tau,
            regime,
            n,
            l_max,
            ratio,
            source: PlanSource::Forced,
            active_bound: None,
        })
    }
}

fn check_constants(n: usize, l_max: f64, l_res: f64) -> Result<f64, TheoryError> {
    if n == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if !(l_max > 0.0) || !l_max.is_finite() || !l_res.is_finite() {
        return Err(invalid(format!("need finite L_max > 0, got L_max = {l_max}, L_res = {l_res}")));
    }
    if l_res < l_max * (1.0 - 1e-12) {
        return Err(invalid(format!("L_res = {l_res} is below L_max = {l_max}")));
    }
    Ok((l_res / l_max).max(1.0))
}

#[inline]
fn powu(base: f64, exp: u64) -> f64 {
    base.powf(exp as f64)
}

/// `ψ = 1 + 2τρ^τ (L_res/L_max) / √n`.
pub fn psi_unconstrained(n: usize, ratio: f64, tau: u64, rho: f64) -> f64 {
    1.0 + 2.0 * tau as f64 * powu(rho, tau) * ratio / (n as f64).sqrt()
}

/// `ψ = 1 + (L_res/L_max) τ ρ^τ / √n · (2 + 1/(√n (L_res/L_max)) + 2τ/n)`.
pub fn psi_constrained(n: usize, ratio: f64, tau: u64, rho: f64) -> f64 {
    let nf = n as f64;
    let sqrt_n = nf.sqrt();
    let t = tau as f64;
    1.0 + ratio * t * powu(rho, tau) / sqrt_n * (2.0 + 1.0 / (sqrt_n * ratio) + 2.0 * t / nf)
}

/// The three unconstrained steplength bounds, in [`GammaBound`] order
/// `[InversePsi, RatioGrowth, RatioCurvature]`.
pub fn unconstrained_gamma_bounds(n: usize, ratio: f64, tau: u64, rho: f64) -> [f64; 3] {
    let sqrt_n = (n as f64).sqrt();
    let psi = psi_unconstrained(n, ratio, tau, rho);
    [
        1.0 / psi,
        (rho - 1.0) * sqrt_n / (2.0 * powu(rho, tau + 1) * ratio),
        (rho - 1.0) * sqrt_n / (ratio * powu(rho, tau) * (2.0 + ratio / sqrt_n)),
    ]
}

/// The two constrained steplength bounds `[InversePsi, ConstrainedRatio]`.
/// The second is infinite when `τ = 0`.
pub fn constrained_gamma_bounds(n: usize, ratio: f64, tau: u64, rho: f64) -> [f64; 2] {
    let sqrt_n = (n as f64).sqrt();
    let psi = psi_constrained(n, ratio, tau, rho);
    let second = if tau == 0 {
        f64::INFINITY
    } else {
        (1.0 - 1.0 / rho - 2.0 / sqrt_n) * sqrt_n / (4.0 * ratio * tau as f64 * powu(rho, tau))
    };
    [1.0 / psi, second]
}

/// `τ + 1 ≤ √n L_max / (2e L_res)`.
pub fn unconstrained_delay_admissible(n: usize, ratio: f64, tau: u64) -> bool {
    (tau as f64 + 1.0) <= (n as f64).sqrt() / (2.0 * E * ratio)
}

/// `τ ≥ 1`, `n ≥ 5` and `τ(τ + 1) ≤ √n L_max / (4e L_res)`.
pub fn constrained_delay_admissible(n: usize, ratio: f64, tau: u64) -> bool {
    let t = tau as f64;
    tau >= 1 && n >= 5 && t * (t + 1.0) <= (n as f64).sqrt() / (4.0 * E * ratio)
}

/// Largest `τ` satisfying [`unconstrained_delay_admissible`], if any.
pub fn max_tau_unconstrained(n: usize, ratio: f64) -> Option<u64> {
    let bound = (n as f64).sqrt() / (2.0 * E * ratio);
    if !(bound >= 1.0) {
        return None;
    }
    let mut tau = (bound.floor() as u64).saturating_sub(1);
    while tau > 0 && !unconstrained_delay_admissible(n, ratio, tau) {
        tau -= 1;
    }
    while unconstrained_delay_admissible(n, ratio, tau + 1) {
        tau += 1;
    }
    unconstrained_delay_admissible(n, ratio, tau).then_some(tau)
}

/// Largest `τ` satisfying [`constrained_delay_admissible`], if any.
pub fn max_tau_constrained(n: usize, ratio: f64) -> Option<u64> {
    if n < 5 {
        return None;
    }
    let bound = (n as f64).sqrt() / (4.0 * E * ratio);
    let mut tau = (((1.0 + 4.0 * bound).sqrt() - 1.0) / 2.0).floor().max(1.0) as u64;
    while tau > 1 && !constrained_delay_admissible(n, ratio, tau) {
        tau -= 1;
    }
    while constrained_delay_admissible(n, ratio, tau + 1) {
        tau += 1;
    }
    constrained_delay_admissible(n, ratio, tau).then_some(tau)
}

fn argmin(bounds: &[f64], names: &[GammaBound]) -> (f64, GammaBound) {
    let mut best = (bounds[0], names[0]);
    for (&b, &name) in bounds.iter().zip(names).skip(1) {
        if b < best.0 {
            best = (b, name);
        }
    }
    best
}

const UNC_BOUNDS: [GammaBound; 3] = [
    GammaBound::InversePsi,
    GammaBound::RatioGrowth,
    GammaBound::RatioCurvature,
];
const CON_BOUNDS: [GammaBound; 2] = [GammaBound::InversePsi, GammaBound::ConstrainedRatio];

/// Unconstrained plan with `ρ = 1 + 2e L_res/(√n L_max)` and `γ = 1/ψ`.
pub fn plan_unconstrained_corollary(
    n: usize,
    l_max: f64,
    l_res: f64,
    tau: u64,
) -> Result<StepPlan, TheoryError> {
    let ratio = check_constants(n, l_max, l_res)?;
    if !unconstrained_delay_admissible(n, ratio, tau) {
        return Err(TheoryError::Inadmissible {
            tau,
            reason: format!(
                "τ + 1 must not exceed √n L_max / (2e L_res) = {:.6}",
                (n as f64).sqrt() / (2.0 * E * ratio)
            ),
            max_tau: max_tau_unconstrained(n, ratio),
        });
    }
    let rho = 1.0 + 2.0 * E * ratio / (n as f64).sqrt();
    let bounds = unconstrained_gamma_bounds(n, ratio, tau, rho);
    let psi = 1.0 / bounds[0];
    let gamma = 1.0 / psi;
    if psi > 2.0 || bounds.iter().any(|&b| gamma > b) {
        return Err(invalid(format!(
            "corollary plan failed its own checks: ψ = {psi}, bounds = {bounds:?}"
        )));
    }
    let (_, active) = argmin(&bounds, &UNC_BOUNDS);
    log::debug!("unconstrained corollary plan: γ = {gamma}, ρ = {rho}, ψ = {psi}, active bound {active:?}");
    Ok(StepPlan {
        gamma,
        rho,
        psi,
        tau,
        regime: Regime::Unconstrained,
        n,
        l_max,
        ratio,
        source: PlanSource::Corollary,
        active_bound: Some(active),
    })
}

/// Unconstrained plan for a given `ρ > 1`: `γ` is the smallest of the three
/// steplength bounds.
pub fn plan_unconstrained_general(
    n: usize,
    l_max: f64,
    l_res: f64,
    tau: u64,
    rho: f64,
) -> Result<StepPlan, TheoryError> {
    let ratio = check_constants(n, l_max, l_res)?;
    if !(rho > 1.0) || !rho.is_finite() {
        return Err(invalid(format!("ρ must exceed 1, got {rho}")));
    }
    let bounds = unconstrained_gamma_bounds(n, ratio, tau, rho);
    let (gamma, active) = argmin(&bounds, &UNC_BOUNDS);
    log::debug!("unconstrained plan for ρ = {rho}: bounds {bounds:?}, active {active:?}");
    Ok(StepPlan {
        gamma,
        rho,
        psi: 1.0 / bounds[0],
        tau,
        regime: Regime::Unconstrained,
        n,
        l_max,
        ratio,
        source: PlanSource::General,
        active_bound: Some(active),
    })
}

/// Constrained plan with `ρ = 1 + 4eτ L_res/(√n L_max)` and `γ = 1/2`.
pub fn plan_constrained_corollary(
    n: usize,
    l_max: f64,
    l_res: f64,
    tau: u64,
) -> Result<StepPlan, TheoryError> {
    let ratio = check_constants(n, l_max, l_res)?;
    if n < 5 || tau < 1 || !constrained_delay_admissible(n, ratio, tau) {
        let reason = if n < 5 {
            format!("requires n ≥ 5, got n = {n}")
        } else if tau < 1 {
            "requires τ ≥ 1".to_string()
        } else {
            format!(
                "τ(τ + 1) must not exceed √n L_max / (4e L_res) = {:.6}",
                (n as f64).sqrt() / (4.0 * E * ratio)
            )
        };
        return Err(TheoryError::Inadmissible {
            tau,
            reason,
            max_tau: max_tau_constrained(n, ratio),
        });
    }
    let rho = 1.0 + 4.0 * E * tau as f64 * ratio / (n as f64).sqrt();
    let bounds = constrained_gamma_bounds(n, ratio, tau, rho);
    let psi = 1.0 / bounds[0];
    let gamma = 0.5;
    if psi > 2.0 || bounds.iter().any(|&b| gamma > b) {
        return Err(invalid(format!(
            "corollary plan failed its own checks: ψ = {psi}, bounds = {bounds:?}"
        )));
    }
    let (_, active) = argmin(&bounds, &CON_BOUNDS);
    log::debug!("constrained corollary plan: ρ = {rho}, ψ = {psi}, bounds {bounds:?}");
    Ok(StepPlan {
        gamma,
        rho,
        psi,
        tau,
        regime: Regime::Constrained,
        n,
        l_max,
        ratio,
        source: PlanSource::Corollary,
        active_bound: Some(active),
    })
}

/// Constrained plan for a given `ρ > (1 − 2/√n)⁻¹`: `γ` is the smaller of the
/// two steplength bounds. Unlike the corollary this also covers `τ = 0`.
pub fn plan_constrained_general(
    n: usize,
    l_max: f64,
    l_res: f64,
    tau: u64,
    rho: f64,
) -> Result<StepPlan, TheoryError> {
    let ratio = check_constants(n, l_max, l_res)?;
    if n < 5 {
        return Err(invalid(format!("constrained plans require n ≥ 5, got n = {n}")));
    }
    let rho_min = 1.0 / (1.0 - 2.0 / (n as f64).sqrt());
    if !(rho > rho_min) || !rho.is_finite() {
        return Err(invalid(format!("ρ must exceed (1 − 2/√n)⁻¹ = {rho_min}, got {rho}")));
    }
    let bounds = constrained_gamma_bounds(n, ratio, tau, rho);
    let (gamma, active) = argmin(&bounds, &CON_BOUNDS);
    log::debug!("constrained plan for ρ = {rho}: bounds {bounds:?}, active {active:?}");
    Ok(StepPlan {
        gamma,
        rho,
        psi: 1.0 / bounds[0],
        tau,
        regime: Regime::Constrained,
        n,
        l_max,
        ratio,
        source: PlanSource::General,
        active_bound: Some(active),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeKind {
    LinearStrong,
    SublinearGeneral,
}

/// The quantity an envelope bounds in expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeMeasure {
    /// `f(x_j) − f*`.
    ObjectiveGap,
    /// `‖x_j − P_S(x_j)‖² + w (f(x_j) − f*)`.
    DistancePlusGap { gap_weight: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Curve {
    /// `initial · factor^j`.
    Geometric { factor: f64, initial: f64 },
    /// `numerator / (offset + slope · j)`.
    Reciprocal { numerator: f64, offset: f64, slope: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEnvelope {
    pub kind: EnvelopeKind,
    pub regime: Regime,
    pub measure: EnvelopeMeasure,
    curve: Curve,
}

impl RateEnvelope {
    pub fn evaluate(&self, j: u64) -> f64 {
        match self.curve {
            Curve::Geometric { factor, initial } => initial * factor.powf(j as f64),
            Curve::Reciprocal {
                numerator,
                offset,
                slope,
            } => numerator / (offset + slope * j as f64),
        }
    }

    /// Bound on `f(x_j) − f*` implied by the envelope.
    pub fn objective_bound(&self, j: u64) -> f64 {
        match self.measure {
            EnvelopeMeasure::ObjectiveGap => self.evaluate(j),
            EnvelopeMeasure::DistancePlusGap { gap_weight } => self.evaluate(j) / gap_weight,
        }
    }

    /// Per-iteration contraction factor of a linear envelope.
    pub fn factor(&self) -> Option<f64> {
        match self.curve {
            Curve::Geometric { factor, .. } => Some(factor),
            Curve::Reciprocal { .. } => None,
        }
    }

    /// `(j, bound)` pairs for `j = 0, stride, 2·stride, ... ≤ j_max`.
    pub fn curve(&self, j_max: u64, stride: u64) -> Vec<(u64, f64)> {
        let stride = stride.max(1);
        (0..=j_max / stride).map(|k| k * stride).map(|j| (j, self.evaluate(j))).collect()
    }
}

pub fn evaluate_envelope(env: &RateEnvelope, j: u64) -> f64 {
    env.evaluate(j)
}

/// Linear-rate envelope for an essentially strongly convex objective with
/// modulus `l > 0`.
///
/// Unconstrained corollary plans use the simplified factor
/// `1 − l/(2n L_max)`; other unconstrained plans use
/// `1 − (2lγ/(n L_max))(1 − ψγ/2)`. Constrained plans bound
/// `‖x_j − P_S(x_j)‖² + (2γ/L_max)(f(x_j) − f*)` with factor
/// `1 − l/(n(l + L_max/γ))`, starting from `R_0² + (2γ/L_max)(f(x_0) − f*)`.
pub fn linear_envelope(
    plan: &StepPlan,
    modulus: f64,
    f0_gap: f64,
    r0: f64,
) -> Result<RateEnvelope, TheoryError> {
    if !(modulus > 0.0) {
        return Err(invalid(format!(
            "linear envelopes need a positive modulus, got {modulus}; use the sublinear envelope"
        )));
    }
    if !(f0_gap >= 0.0) {
        return Err(invalid(format!("initial gap must be nonnegative, got {f0_gap}")));
    }
    let n = plan.n as f64;
    let l_max = plan.l_max;
    let gamma = plan.gamma;
    let (factor, initial, measure) = match plan.regime {
        Regime::Unconstrained => {
            let factor = if plan.source == PlanSource::Corollary {
                1.0 - modulus / (2.0 * n * l_max)
            } else {
                1.0 - 2.0 * modulus * gamma / (n * l_max) * (1.0 - plan.psi * gamma / 2.0)
            };
            (factor, f0_gap, EnvelopeMeasure::ObjectiveGap)
        }
        Regime::Constrained => {
            if !(r0 >= 0.0) {
                return Err(invalid(format!("R_0 must be nonnegative, got {r0}")));
            }
            let w = 2.0 * gamma / l_max;
            (
                1.0 - modulus / (n * (modulus + l_max / gamma)),
                r0 * r0 + w * f0_gap,
                EnvelopeMeasure::DistancePlusGap { gap_weight: w },
            )
        }
    };
    if !(factor > 0.0 && factor < 1.0) {
        return Err(TheoryError::NotContracting { factor });
    }
    Ok(RateEnvelope {
        kind: EnvelopeKind::LinearStrong,
        regime: plan.regime,
        measure,
        curve: Curve::Geometric { factor, initial },
    })
}

/// Sublinear `1/j`-type envelope on `f(x_j) − f*` for general convex
/// objectives. `radius` is `R` (unconstrained, a uniform bound on the
/// distance to the solution set) or `R_0` (constrained).
pub fn sublinear_envelope(
    plan: &StepPlan,
    f0_gap: f64,
    radius: f64,
) -> Result<RateEnvelope, TheoryError> {
    if !(f0_gap > 0.0) {
        return Err(invalid(format!("initial gap must be positive, got {f0_gap}")));
    }
    if !(radius >= 0.0) {
        return Err(invalid(format!("radius must be nonnegative, got {radius}")));
    }
    let n = plan.n as f64;
    let l_max = plan.l_max;
    let gamma = plan.gamma;
    let curve = match plan.regime {
        Regime::Unconstrained => {
            let r2 = radius * radius;
            let slope = if plan.source == PlanSource::Corollary {
                1.0 / (4.0 * n * l_max * r2)
            } else {
                gamma * (1.0 - plan.psi * gamma / 2.0) / (n * l_max * r2)
            };
            if !(slope >= 0.0) {
                return Err(TheoryError::NotContracting { factor: slope });
            }
            Curve::Reciprocal {
                numerator: 1.0,
                offset: 1.0 / f0_gap,
                slope,
            }
        }
        Regime::Constrained => Curve::Reciprocal {
            numerator: n * (radius * radius * l_max + 2.0 * gamma * f0_gap) / (2.0 * gamma),
            offset: n,
            slope: 1.0,
        },
    };
    Ok(RateEnvelope {
        kind: EnvelopeKind::SublinearGeneral,
        regime: plan.regime,
        measure: EnvelopeMeasure::ObjectiveGap,
        curve,
    })
}

/// Inputs for [`iterations_for_confidence`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceQuery {
    pub regime: Regime,
    /// Essentially strongly convex with `modulus > 0`.
    pub strong: bool,
    pub n: usize,
    pub l_max: f64,
    pub modulus: f64,
    pub f0_gap: f64,
    /// `R` for the unconstrained general case, `R_0` for constrained.
    pub radius: f64,
    pub epsilon: f64,
    pub eta: f64,
}

/// Smallest `j` for which `P(f(x_j) − f* ≤ ε) ≥ 1 − η` is guaranteed.
pub fn iterations_for_confidence(q: &ConfidenceQuery) -> Result<u64, TheoryError> {
    if !(q.epsilon > 0.0 && q.epsilon < q.f0_gap) {
        return Err(invalid(format!(
            "ε must lie in (0, f(x_0) − f*) = (0, {}), got {}",
            q.f0_gap, q.epsilon
        )));
    }
    if !(q.eta > 0.0 && q.eta < 1.0) {
        return Err(invalid(format!("η must lie in (0, 1), got {}", q.eta)));
    }
    if q.strong && !(q.modulus > 0.0) {
        return Err(invalid("the strongly convex count needs a positive modulus"));
    }
    let n = q.n as f64;
    let l = q.l_max;
    let eps_eta = q.epsilon * q.eta;
    let r2 = q.radius * q.radius;
    let bound = match (q.regime, q.strong) {
        (Regime::Unconstrained, true) => 2.0 * n * l / q.modulus * (q.f0_gap / eps_eta).ln(),
        (Regime::Unconstrained, false) => 4.0 * n * l * r2 * (1.0 / eps_eta - 1.0 / q.f0_gap),
        (Regime::Constrained, true) => {
            n * (q.modulus + 2.0 * l) / q.modulus * ((l * r2 + q.f0_gap) / eps_eta).ln().abs()
        }
        (Regime::Constrained, false) => n * (l * r2 + q.f0_gap) / eps_eta - n,
    };
    Ok(bound.max(0.0).ceil() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn corollary_one_with_zero_delay() {
        let p = plan_unconstrained_corollary(100, 1.0, 1.0, 0).unwrap();
        assert_eq!(p.psi, 1.0);
        assert_eq!(p.gamma, 1.0);
        assert_eq!(p.source, PlanSource::Corollary);
    }

    #[test]
    fn corollary_one_rejects_large_delay() {
        // √100 / (2e) = 1.8394 < τ + 1 = 2
        match plan_unconstrained_corollary(100, 1.0, 1.0, 1) {
            Err(TheoryError::Inadmissible { max_tau, .. }) => assert_eq!(max_tau, Some(0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn corollary_one_reference_values() {
        // mpmath, 40 digits: ρ = 1.0543656365691809, ψ = 1.3395802526266099
        let p = plan_unconstrained_corollary(10_000, 1.0, 1.0, 10).unwrap();
        assert_relative_eq!(p.rho, 1.054_365_636_569_180_9, max_relative = 1e-14);
        assert_relative_eq!(p.psi, 1.339_580_252_626_609_9, max_relative = 1e-13);
        assert_relative_eq!(p.gamma, 0.746_502_494_374_061_7, max_relative = 1e-13);
        assert_eq!(p.active_bound, Some(GammaBound::InversePsi));
    }

    #[test]
    fn general_plan_reference_values() {
        // mpmath: τ=5 bounds (0.75637129, 1.41118483, 1.53693397), τ=6 (0.70166839, ...)
        let p5 = plan_unconstrained_general(10_000, 1.0, 2.0, 5, 1.1).unwrap();
        assert_relative_eq!(p5.gamma, 0.756_371_293_591_568_6, max_relative = 1e-13);
        assert_eq!(p5.active_bound, Some(GammaBound::InversePsi));
        let p6 = plan_unconstrained_general(10_000, 1.0, 2.0, 6, 1.1).unwrap();
        assert_relative_eq!(p6.gamma, 0.701_668_393_425_805_0, max_relative = 1e-13);
        assert!(p6.gamma <= p5.gamma);
        let p0 = plan_unconstrained_general(10_000, 1.0, 2.0, 0, 2.0).unwrap();
        assert_eq!(p0.psi, 1.0);
        assert_eq!(p0.gamma, 1.0);
        assert!(plan_unconstrained_general(100, 1.0, 1.0, 0, 1.0).is_err());
    }

    #[test]
    fn general_plan_reports_binding_bound() {
        // ρ barely above 1 makes the ratio bounds tiny.
        let p = plan_unconstrained_general(100, 1.0, 1.0, 2, 1.0001).unwrap();
        assert_eq!(p.active_bound, Some(GammaBound::RatioCurvature));
        assert!(p.gamma < 1e-3);
        // 2ρ > 2 + L_res/(√n L_max) flips the order of the two ratio bounds.
        let p = plan_unconstrained_general(10_000, 1.0, 1.0, 2, 1.01).unwrap();
        assert_eq!(p.active_bound, Some(GammaBound::RatioGrowth));
    }

    #[test]
    fn corollary_two_cases() {
        match plan_constrained_corollary(4, 1.0, 1.0, 1) {
            Err(TheoryError::Inadmissible { max_tau, .. }) => assert_eq!(max_tau, None),
            other => panic!("{other:?}"),
        }
        assert!(plan_constrained_corollary(1_000_000, 1.0, 1.0, 0).is_err());
        let p = plan_constrained_corollary(1_000_000, 1.0, 1.0, 1).unwrap();
        // mpmath: 1 + 4e/1000
        assert_relative_eq!(p.rho, 1.010_873_127_313_836_2, max_relative = 1e-14);
        assert_eq!(p.gamma, 0.5);
        assert!(p.psi <= 2.0);
        // √1e6/(4e) = 91.97: τ = 9 gives 90, τ = 10 gives 110.
        match plan_constrained_corollary(1_000_000, 1.0, 1.0, 10) {
            Err(TheoryError::Inadmissible { max_tau, .. }) => assert_eq!(max_tau, Some(9)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constrained_general_plan_with_zero_delay() {
        let p = plan_constrained_general(100, 1.0, 1.5, 0, 2.0).unwrap();
        assert_eq!(p.gamma, 1.0);
        assert!(plan_constrained_general(100, 1.0, 1.5, 0, 1.2).is_err());
        assert!(plan_constrained_general(4, 1.0, 1.0, 0, 10.0).is_err());
    }

    #[test]
    fn max_tau_matches_direct_condition() {
        for &(n, ratio) in &[(100usize, 1.0), (20_000, 2.2), (1_000_000, 1.0), (400, 1.3)] {
            if let Some(t) = max_tau_unconstrained(n, ratio) {
                assert!(unconstrained_delay_admissible(n, ratio, t));
                assert!(!unconstrained_delay_admissible(n, ratio, t + 1));
            }
            if let Some(t) = max_tau_constrained(n, ratio) {
                assert!(constrained_delay_admissible(n, ratio, t));
                assert!(!constrained_delay_admissible(n, ratio, t + 1));
            }
        }
        // √20000 / (2e · 2.2) = 11.82
        assert_eq!(max_tau_unconstrained(20_000, 2.2), Some(10));
    }

    #[test]
    fn envelope_values() {
        let plan = plan_unconstrained_corollary(100, 1.0, 1.0, 0).unwrap();
        let env = linear_envelope(&plan, 0.5, 3.0, 0.0).unwrap();
        assert_eq!(env.evaluate(0), 3.0);
        assert_eq!(env.factor(), Some(0.9975));
        assert!(linear_envelope(&plan, 0.0, 3.0, 0.0).is_err());

        let cplan = StepPlan::forced(Regime::Constrained, 10, 1.0, 1.0, 1, 0.5).unwrap();
        let cenv = linear_envelope(&cplan, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(cenv.factor().unwrap(), 1.0 - 1.0 / 30.0, max_relative = 1e-15);
        // R_0² + (2γ/L_max)·gap, and the objective bound rescales to L_max R_0² + gap at γ = 1/2.
        assert_eq!(cenv.evaluate(0), 2.0);
        assert_eq!(cenv.objective_bound(0), 2.0);

        let s = sublinear_envelope(&plan, 2.5, 1.0).unwrap();
        assert_eq!(s.evaluate(0), 2.5);
        let cs = sublinear_envelope(&cplan, 1.0, 1.0).unwrap();
        assert_eq!(cs.evaluate(0), 2.0);
        assert_eq!(cs.evaluate(10), 1.0);
        assert!(sublinear_envelope(&plan, 0.0, 1.0).is_err());
    }

    #[test]
    fn forced_plan_that_overshoots_does_not_contract() {
        let p = StepPlan::forced(Regime::Unconstrained, 100, 1.0, 1.0, 0, 2.5).unwrap();
        assert!(matches!(
            linear_envelope(&p, 0.5, 1.0, 0.0),
            Err(TheoryError::NotContracting { .. })
        ));
    }

    fn query(regime: Regime, strong: bool) -> ConfidenceQuery {
        ConfidenceQuery {
            regime,
            strong,
            n: 10,
            l_max: 1.0,
            modulus: 1.0,
            f0_gap: 1.0,
            radius: 1.0,
            epsilon: 0.1,
            eta: 0.1,
        }
    }

    #[test]
    fn confidence_counts() {
        // 20 ln 100 = 92.103
        assert_eq!(iterations_for_confidence(&query(Regime::Unconstrained, true)).unwrap(), 93);
        // L_max R_0² + gap = 2: 30 ln 200 = 158.95
        assert_eq!(iterations_for_confidence(&query(Regime::Constrained, true)).unwrap(), 159);
        let mut q = query(Regime::Unconstrained, false);
        q.f0_gap = 0.5;
        q.epsilon = 0.25;
        q.eta = 0.5;
        // ε·η = 0.125 ≠ gap; 40 (8 − 2) = 240
        assert_eq!(iterations_for_confidence(&q).unwrap(), 240);
        let mut q = query(Regime::Unconstrained, true);
        q.epsilon = 1.0;
        assert!(iterations_for_confidence(&q).is_err());
        q.epsilon = 0.5;
        q.eta = 1.0;
        assert!(iterations_for_confidence(&q).is_err());
    }

    #[test]
    fn general_count_vanishes_as_eps_eta_reaches_gap() {
        let mut q = ConfidenceQuery {
            regime: Regime::Unconstrained,
            strong: false,
            n: 10,
            l_max: 1.0,
            modulus: 0.0,
            f0_gap: 0.5,
            radius: 1.0,
            epsilon: 0.4,
            eta: 0.5,
        };
        // 1/(0.2) − 1/0.5 = 3 → 40·3 = 120
        assert_eq!(iterations_for_confidence(&q).unwrap(), 120);
        q.epsilon = 0.5 * (1.0 - 1e-9);
        q.eta = 1.0 - 1e-9;
        assert_eq!(iterations_for_confidence(&q).unwrap(), 1);
        q.regime = Regime::Constrained;
        q.radius = 0.0;
        // n·gap/(εη) − n is a hair above zero.
        assert_eq!(iterations_for_confidence(&q).unwrap(), 1);
    }
}
