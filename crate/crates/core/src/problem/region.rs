use super::ProblemError;

/// Feasible set: all of ℝⁿ, or a product of closed intervals.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleRegion {
    Unconstrained,
    /// `lower[i] <= upper[i]`; infinite bounds are allowed.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl FeasibleRegion {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ProblemError> {
        if lower.len() != upper.len() {
            return Err(ProblemError::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(ProblemError::InvalidBounds { index: i, lo, hi });
            }
        }
        Ok(FeasibleRegion::Box { lower, upper })
    }

    /// `[lo, hi]ⁿ`.
    pub fn uniform_box(n: usize, lo: f64, hi: f64) -> Result<Self, ProblemError> {
        Self::boxed(vec![lo; n], vec![hi; n])
    }

    /// The nonnegative orthant.
    pub fn nonnegative(n: usize) -> Self {
        FeasibleRegion::Box {
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn is_box(&self) -> bool {
        matches!(self, FeasibleRegion::Box { .. })
    }

    pub fn bounds(&self, i: usize) -> (f64, f64) {
        match self {
            FeasibleRegion::Unconstrained => (f64::NEG_INFINITY, f64::INFINITY),
            FeasibleRegion::Box { lower, upper } => (lower[i], upper[i]),
        }
    }

    #[inline]
    pub fn project_coordinate(&self, i: usize, v: f64) -> f64 {
        match self {
            FeasibleRegion::Unconstrained => v,
            // max/min rather than clamp: clamp panics on NaN bounds and we
            // want -inf/inf to pass values through untouched.
            FeasibleRegion::Box { lower, upper } => v.max(lower[i]).min(upper[i]),
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| self.project_coordinate(i, v))
            .collect()
    }

    pub fn project_in_place(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = self.project_coordinate(i, *v);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            FeasibleRegion::Unconstrained => true,
            FeasibleRegion::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(&v, (&lo, &hi))| lo <= v && v <= hi),
        }
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<(), ProblemError> {
        match self {
            FeasibleRegion::Box { lower, .. } if lower.len() != n => {
                Err(ProblemError::DimensionMismatch {
                    expected: n,
                    found: lower.len(),
                })
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clipping() {
        let r = FeasibleRegion::uniform_box(2, 0.0, 1.0).unwrap();
        assert_eq!(r.project(&[-0.5, 2.0]), vec![0.0, 1.0]);
        assert_eq!(r.project(&[0.25, 0.75]), vec![0.25, 0.75]);
        assert_eq!(FeasibleRegion::Unconstrained.project(&[-7.0, 3.0]), vec![-7.0, 3.0]);
    }

    #[test]
    fn invalid_bounds_are_rejected() {
        assert!(FeasibleRegion::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(FeasibleRegion::boxed(vec![f64::NAN], vec![0.0]).is_err());
        assert!(FeasibleRegion::boxed(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(FeasibleRegion::boxed(vec![f64::NEG_INFINITY], vec![f64::INFINITY]).is_ok());
        assert!(FeasibleRegion::boxed(vec![2.0], vec![2.0]).is_ok());
    }

    proptest! {
        #[test]
        fn infinite_box_matches_unconstrained(x in prop::collection::vec(-1e6f64..1e6, 1..20)) {
            let n = x.len();
            let b = FeasibleRegion::uniform_box(n, f64::NEG_INFINITY, f64::INFINITY).unwrap();
            prop_assert_eq!(b.project(&x), FeasibleRegion::Unconstrained.project(&x));
            prop_assert!(b.contains(&x));
        }

        #[test]
        fn projection_is_idempotent_and_nonexpansive(
            pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -5.0f64..5.0, 0.0f64..5.0), 1..12)
        ) {
            let lower: Vec<f64> = pairs.iter().map(|p| p.2).collect();
            let upper: Vec<f64> = pairs.iter().map(|p| p.2 + p.3).collect();
            let r = FeasibleRegion::boxed(lower, upper).unwrap();
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let px = r.project(&x);
            let py = r.project(&y);
            prop_assert_eq!(r.project(&px), px.clone());
            prop_assert!(r.contains(&px));
            let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
            prop_assert!(d(&px, &py) <= d(&x, &y) + 1e-12);
        }
    }
}
