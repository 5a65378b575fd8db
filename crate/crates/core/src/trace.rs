use std::fmt::Write as _;

use crate::io::fmt_real;
use crate::problem::{distance, QuadraticProblem};
use crate::theory::RateEnvelope;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    /// Updates applied so far.
    pub iteration: u64,
    /// `iteration / n`, or completed epochs for epoch-based engines.
    pub epoch: f64,
    pub residual: f64,
    pub objective: f64,
    /// `f(x) − f*` when the problem carries an optimum hint.
    pub gap: Option<f64>,
    /// `‖x − x*‖` when the hint includes a solution point.
    pub distance: Option<f64>,
}

impl Checkpoint {
    pub fn measure(p: &QuadraticProblem, x: &[f64], iteration: u64, epoch: f64) -> Self {
        let objective = p.objective_unchecked(x);
        let hint = p.optimum();
        Checkpoint {
            iteration,
            epoch,
            residual: p.residual_unchecked(x),
            objective,
            gap: hint.map(|h| objective - h.value),
            distance: hint.and_then(|h| h.point.as_deref()).map(|xs| distance(x, xs)),
        }
    }
}

/// Checkpoints with strictly increasing iteration indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub stride: u64,
    pub checkpoints: Vec<Checkpoint>,
}

pub const TRACE_HEADER: &str = "j,epoch,residual,objective,gap,envelope_linear,envelope_sublinear";

impl Trace {
    pub fn new(stride: u64) -> Self {
        Trace {
            stride,
            checkpoints: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, c: Checkpoint) {
        debug_assert!(self
            .checkpoints
            .last()
            .map_or(true, |last| last.iteration < c.iteration));
        self.checkpoints.push(c);
    }

    pub fn last(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }

    /// CSV with the optional envelope columns filled from `linear` and
    /// `sublinear` (objective-gap bounds); missing values are left empty.
    pub fn to_csv(&self, linear: Option<&RateEnvelope>, sublinear: Option<&RateEnvelope>) -> String {
        let mut out = String::with_capacity(64 * (self.checkpoints.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(fmt_real).unwrap_or_default();
        for c in &self.checkpoints {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.iteration,
                fmt_real(c.epoch),
                fmt_real(c.residual),
                fmt_real(c.objective),
                opt(c.gap),
                opt(linear.map(|e| e.objective_bound(c.iteration))),
                opt(sublinear.map(|e| e.objective_bound(c.iteration))),
            );
        }
        out
    }
}
