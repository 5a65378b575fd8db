//! Quadratic objectives `½xᵀQx + cᵀx` over a separable feasible region.

mod format;
mod matrix;
mod region;

pub use format::{format_problem, load_problem, parse_problem, save_problem};
pub use matrix::{CsrMatrix, DenseMatrix, Hessian};
pub use region::FeasibleRegion;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative tolerance for the `Q_ij == Q_ji` check.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Largest dimension for which dense factorizations are attempted.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("Hessian is not symmetric at ({row}, {col}): {upper} vs {lower}")]
    NotSymmetric {
        row: usize,
        col: usize,
        upper: f64,
        lower: f64,
    },
    #[error("Hessian diagonal entry {index} is {value}; must be positive")]
    NonpositiveDiagonal { index: usize, value: f64 },
    #[error("invalid bounds at coordinate {index}: [{lo}, {hi}]")]
    InvalidBounds { index: usize, lo: f64, hi: f64 },
    #[error("non-finite value at coordinate {index}")]
    NonFinite { index: usize },
}

/// Known optimum of a problem, used only for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimumHint {
    pub value: f64,
    pub point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem {
    hessian: Hessian,
    linear: Vec<f64>,
    region: FeasibleRegion,
    diagonal: Vec<f64>,
    optimum: Option<OptimumHint>,
    modulus_hint: Option<f64>,
    psd_by_construction: bool,
}

impl QuadraticProblem {
    /// Validates dimensions, symmetry and a positive diagonal. Positive
    /// semidefiniteness is not checked here; problems that do not come from
    /// a generator carry [`QuadraticProblem::psd_by_construction`] `== false`.
    pub fn new(
        hessian: Hessian,
        linear: Vec<f64>,
        region: FeasibleRegion,
    ) -> Result<Self, ProblemError> {
        let n = hessian.dim();
        if linear.len() != n {
            return Err(ProblemError::DimensionMismatch {
                expected: n,
                found: linear.len(),
            });
        }
        if let Some(index) = linear.iter().position(|v| !v.is_finite()) {
            return Err(ProblemError::NonFinite { index });
        }
        region.check_dim(n)?;
        hessian.check_symmetric(SYMMETRY_TOL)?;
        let diagonal: Vec<f64> = (0..n).map(|i| hessian.get(i, i)).collect();
        if let Some(index) = diagonal.iter().position(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(ProblemError::NonpositiveDiagonal {
                index,
                value: diagonal[index],
            });
        }
        Ok(QuadraticProblem {
            hessian,
            linear,
            region,
            diagonal,
            optimum: None,
            modulus_hint: None,
            psd_by_construction: false,
        })
    }

    pub(crate) fn mark_psd(mut self) -> Self {
        self.psd_by_construction = true;
        self
    }

    pub fn with_optimum(mut self, hint: OptimumHint) -> Self {
        self.optimum = Some(hint);
        self
    }

    pub fn with_modulus(mut self, modulus: f64) -> Self {
        self.modulus_hint = Some(modulus);
        self
    }

    pub fn set_optimum(&mut self, hint: Option<OptimumHint>) {
        self.optimum = hint;
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn hessian(&self) -> &Hessian {
        &self.hessian
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn region(&self) -> &FeasibleRegion {
        &self.region
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn optimum(&self) -> Option<&OptimumHint> {
        self.optimum.as_ref()
    }

    pub fn modulus_hint(&self) -> Option<f64> {
        self.modulus_hint
    }

    pub fn psd_by_construction(&self) -> bool {
        self.psd_by_construction
    }

    pub fn l_max(&self) -> f64 {
        self.diagonal.iter().copied().fold(f64::MIN, f64::max)
    }

    fn check_len(&self, x: &[f64]) -> Result<(), ProblemError> {
        if x.len() != self.dim() {
            return Err(ProblemError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `½xᵀQx + cᵀx`.
    pub fn objective(&self, x: &[f64]) -> Result<f64, ProblemError> {
        self.check_len(x)?;
        Ok(self.objective_unchecked(x))
    }

    pub(crate) fn objective_unchecked(&self, x: &[f64]) -> f64 {
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..x.len() {
            quad += x[i] * self.hessian.row_dot(i, x);
            lin += self.linear[i] * x[i];
        }
        0.5 * quad + lin
    }

    /// `Qx + c`, one row dot product per coordinate.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, ProblemError> {
        self.check_len(x)?;
        Ok(self.gradient_unchecked(x))
    }

    pub(crate) fn gradient_unchecked(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len()).map(|i| self.coordinate_gradient_unchecked(x, i)).collect()
    }

    pub fn coordinate_gradient(&self, x: &[f64], i: usize) -> Result<f64, ProblemError> {
        self.check_len(x)?;
        if i >= self.dim() {
            return Err(ProblemError::IndexOutOfRange { index: i, n: self.dim() });
        }
        Ok(self.coordinate_gradient_unchecked(x, i))
    }

    #[inline]
    pub(crate) fn coordinate_gradient_unchecked(&self, x: &[f64], i: usize) -> f64 {
        self.hessian.row_dot(i, x) + self.linear[i]
    }

    /// `‖∇f(x)‖` when unconstrained, `‖x − P(x − ∇f(x))‖` on a box.
    pub fn residual(&self, x: &[f64]) -> Result<f64, ProblemError> {
        self.check_len(x)?;
        Ok(self.residual_unchecked(x))
    }

    pub(crate) fn residual_unchecked(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..x.len() {
            let g = self.coordinate_gradient_unchecked(x, i);
            let r = x[i] - self.region.project_coordinate(i, x[i] - g);
            s += r * r;
        }
        s.sqrt()
    }

    /// Hypothesized full update `P(x_current − (γ/L_max)∇f(x_read))`, i.e.
    /// the coordinate step applied to every coordinate at once.
    pub fn full_prox_step(
        &self,
        x_read: &[f64],
        x_current: &[f64],
        gamma: f64,
    ) -> Result<Vec<f64>, ProblemError> {
        self.check_len(x_read)?;
        self.check_len(x_current)?;
        let step = gamma / self.l_max();
        Ok((0..self.dim())
            .map(|i| {
                let g = self.coordinate_gradient_unchecked(x_read, i);
                self.region.project_coordinate(i, x_current[i] - step * g)
            })
            .collect())
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.region.project(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzConstants {
    pub per_coordinate: Vec<f64>,
    pub l_max: f64,
    pub l_res: f64,
    pub modulus: Option<f64>,
}

impl LipschitzConstants {
    pub fn ratio(&self) -> f64 {
        self.l_res / self.l_max
    }
}

/// `L_i = Q_ii`, `L_max = max Q_ii`, `L_res = max_i ‖Q_·i‖₂`.
pub fn compute_lipschitz(p: &QuadraticProblem) -> LipschitzConstants {
    let per_coordinate = p.diagonal().to_vec();
    let l_max = p.l_max();
    let h = p.hessian();
    let l_res = (0..p.dim()).map(|i| h.row_norm(i)).fold(0.0, f64::max);
    LipschitzConstants {
        per_coordinate,
        l_max,
        // A column norm is at least its diagonal entry, but rounding in the
        // norm can land one ulp below it.
        l_res: l_res.max(l_max),
        modulus: p.modulus_hint(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulusSource {
    /// Known from the generator (ridge term).
    Analytic,
    /// Inverse power iteration on a dense copy.
    InverseIteration,
    /// Dense factorization failed: Q is singular to working precision.
    Singular,
    /// Too large for a dense estimate.
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusEstimate {
    pub value: f64,
    pub source: ModulusSource,
}

/// Estimate of `λ_min(Q)`, used as the strong-convexity modulus `l`.
pub fn estimate_modulus(p: &QuadraticProblem) -> ModulusEstimate {
    if let Some(l) = p.modulus_hint() {
        return ModulusEstimate {
            value: l,
            source: ModulusSource::Analytic,
        };
    }
    let n = p.dim();
    if n > DENSE_LIMIT {
        log::warn!("modulus unknown: n = {n} exceeds dense limit {DENSE_LIMIT}");
        return ModulusEstimate {
            value: 0.0,
            source: ModulusSource::Unknown,
        };
    }
    let q = DMatrix::from_row_slice(n, n, &p.hessian().to_dense());
    let Some(chol) = q.clone().cholesky() else {
        return ModulusEstimate {
            value: 0.0,
            source: ModulusSource::Singular,
        };
    };
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_7).fract());
    v /= v.norm();
    let mut lambda = f64::INFINITY;
    for _ in 0..1000 {
        let mut w = chol.solve(&v);
        let norm = w.norm();
        if !norm.is_finite() || norm == 0.0 {
            break;
        }
        w /= norm;
        let next = (w.transpose() * &q * &w)[(0, 0)];
        v = w;
        let done = (next - lambda).abs() <= 1e-13 * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    ModulusEstimate {
        value: lambda.max(0.0),
        source: ModulusSource::InverseIteration,
    }
}

pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dense(n: usize, q: &[f64], c: &[f64]) -> QuadraticProblem {
        QuadraticProblem::new(
            Hessian::Dense(DenseMatrix::from_row_major(n, q.to_vec()).unwrap()),
            c.to_vec(),
            FeasibleRegion::Unconstrained,
        )
        .unwrap()
    }

    fn two_by_two() -> QuadraticProblem {
        dense(2, &[2.0, 1.0, 1.0, 2.0], &[-1.0, -1.0])
    }

    fn identity2() -> QuadraticProblem {
        dense(2, &[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0])
    }

    #[test]
    fn objective_values() {
        assert_eq!(identity2().objective(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(two_by_two().objective(&[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(identity2().objective(&[3.0, 4.0]).unwrap(), 12.5);
        assert!(matches!(
            identity2().objective(&[1.0]),
            Err(ProblemError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gradient_values() {
        assert_eq!(identity2().gradient(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        assert_eq!(two_by_two().gradient(&[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        let p = two_by_two();
        let x = [0.3, -0.7];
        let g = p.gradient(&x).unwrap();
        for i in 0..2 {
            assert_eq!(p.coordinate_gradient(&x, i).unwrap().to_bits(), g[i].to_bits());
        }
        assert!(matches!(
            p.coordinate_gradient(&x, 2),
            Err(ProblemError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn construction_rejects_bad_input() {
        let zero_diag = QuadraticProblem::new(
            Hessian::Dense(DenseMatrix::from_row_major(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap()),
            vec![0.0; 2],
            FeasibleRegion::Unconstrained,
        );
        assert!(matches!(zero_diag, Err(ProblemError::NonpositiveDiagonal { index: 1, .. })));
        let asym = QuadraticProblem::new(
            Hessian::Dense(DenseMatrix::from_row_major(2, vec![1.0, 0.2, 0.0, 1.0]).unwrap()),
            vec![0.0; 2],
            FeasibleRegion::Unconstrained,
        );
        assert!(matches!(asym, Err(ProblemError::NotSymmetric { .. })));
        let bad_c = QuadraticProblem::new(
            Hessian::Dense(DenseMatrix::from_row_major(1, vec![1.0]).unwrap()),
            vec![f64::NAN],
            FeasibleRegion::Unconstrained,
        );
        assert!(bad_c.is_err());
        let bad_region = QuadraticProblem::new(
            Hessian::Dense(DenseMatrix::from_row_major(1, vec![1.0]).unwrap()),
            vec![0.0],
            FeasibleRegion::nonnegative(2),
        );
        assert!(bad_region.is_err());
    }

    #[test]
    fn lipschitz_constants() {
        let l = compute_lipschitz(&identity2());
        assert_eq!(l.per_coordinate, vec![1.0, 1.0]);
        assert_eq!((l.l_max, l.l_res), (1.0, 1.0));
        let l = compute_lipschitz(&two_by_two());
        assert_eq!(l.l_max, 2.0);
        assert_relative_eq!(l.l_res, 5f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(l.l_res, 2.2360679, epsilon = 1e-7);
    }

    #[test]
    fn modulus_of_identity_and_analytic_hint() {
        let m = estimate_modulus(&identity2());
        assert_eq!(m.source, ModulusSource::InverseIteration);
        assert_relative_eq!(m.value, 1.0, max_relative = 1e-12);
        let m = estimate_modulus(&two_by_two());
        assert_relative_eq!(m.value, 1.0, max_relative = 1e-10);
        let m = estimate_modulus(&identity2().with_modulus(0.25));
        assert_eq!(m, ModulusEstimate { value: 0.25, source: ModulusSource::Analytic });
        let singular = dense(2, &[1.0, 1.0, 1.0, 1.0], &[0.0, 0.0]);
        assert_eq!(estimate_modulus(&singular).value, 0.0);
    }

    #[test]
    fn residual_values() {
        assert_eq!(identity2().residual(&[3.0, 4.0]).unwrap(), 5.0);
        // x* = (1/3, 1/3)
        let r = two_by_two().residual(&[1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!(r < 1e-15, "{r}");
        let n = 4;
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = 1.0;
        }
        let p = QuadraticProblem::new(
            Hessian::Dense(DenseMatrix::from_row_major(n, q).unwrap()),
            vec![1.0; n],
            FeasibleRegion::uniform_box(n, 0.0, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(p.residual(&[0.0; 4]).unwrap(), 0.0);
        assert!(p.residual(&[0.5; 4]).unwrap() > 0.0);
    }

    #[test]
    fn full_prox_step_cases() {
        let p = two_by_two();
        let x = [0.2, 0.9];
        let g = p.gradient(&x).unwrap();
        let step = 0.5 / p.l_max();
        let xbar = p.full_prox_step(&x, &x, 0.5).unwrap();
        for i in 0..2 {
            assert_eq!(xbar[i], x[i] - step * g[i]);
        }
        // Interior point of a box with a small step: constraints inactive.
        let boxed = QuadraticProblem::new(
            p.hessian().clone(),
            p.linear().to_vec(),
            FeasibleRegion::uniform_box(2, 0.0, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(boxed.full_prox_step(&x, &x, 0.01).unwrap(), p.full_prox_step(&x, &x, 0.01).unwrap());
        // Fixed point: x* = (1/3, 1/3) is interior and stationary.
        let xs = [1.0 / 3.0, 1.0 / 3.0];
        let xbar = boxed.full_prox_step(&xs, &xs, 1.0).unwrap();
        for i in 0..2 {
            assert!((xbar[i] - xs[i]).abs() < 1e-15);
        }
    }
}
