//! Least-squares quadratics `½‖Ax − b‖² + (α/2)‖x‖²` and their
//! bound-constrained variant `½(x − x̃)ᵀ(AᵀA + αI)(x − x̃)` over `x ≥ 0`.

use nalgebra::{DMatrix, DVector};

use super::GeneratorError;
use crate::problem::{FeasibleRegion, Hessian, OptimumHint, QuadraticProblem, DENSE_LIMIT};
use crate::rng::{streams, CounterRng};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n: usize,
    pub alpha: f64,
    pub seed: u64,
    pub constrained: bool,
}

impl SyntheticSpec {
    pub fn new(m: usize, n: usize, alpha: f64, seed: u64) -> Self {
        SyntheticSpec {
            m,
            n,
            alpha,
            seed,
            constrained: false,
        }
    }

    pub fn constrained(mut self) -> Self {
        self.constrained = true;
        self
    }

    fn validate(&self) -> Result<(), GeneratorError> {
        if self.m == 0 || self.n == 0 {
            return Err(GeneratorError::InvalidSpec(format!(
                "need m, n ≥ 1, got m = {}, n = {}",
                self.m, self.n
            )));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(GeneratorError::InvalidSpec(format!("alpha must be ≥ 0, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// The sampled data behind a synthetic instance.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// `m × n`, unit-norm columns.
    pub a: DMatrix<f64>,
    pub x_true: DVector<f64>,
    pub b: DVector<f64>,
}

/// Samples `A`, `x̃`, `δ` and forms `b = Ax̃ + δ‖Ax̃‖/(5m)`.
pub fn sample_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData, GeneratorError> {
    spec.validate()?;
    let (m, n) = (spec.m, spec.n);
    let rng = CounterRng::new(spec.seed);
    let mut a = DMatrix::from_fn(m, n, |i, j| rng.normal(streams::MATRIX, (j * m + i) as u64));
    for mut col in a.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let x_true = DVector::from_fn(n, |i, _| rng.normal(streams::TRUE_MODEL, i as u64));
    let ax = &a * &x_true;
    let scale = ax.norm() / (5.0 * m as f64);
    let b = DVector::from_fn(m, |i, _| ax[i] + rng.normal(streams::NOISE, i as u64) * scale);
    Ok(SyntheticData { a, x_true, b })
}

fn symmetric_gram(a: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
    let mut q = a.tr_mul(a);
    let n = q.nrows();
    for j in 0..n {
        for i in 0..j {
            q[(j, i)] = q[(i, j)];
        }
        q[(j, j)] += alpha;
    }
    q
}

fn row_major(q: &DMatrix<f64>) -> Vec<f64> {
    // Symmetric, so column-major storage reads as row-major.
    q.as_slice().to_vec()
}

pub fn gen_synthetic_qp(spec: &SyntheticSpec) -> Result<QuadraticProblem, GeneratorError> {
    let data = sample_synthetic(spec)?;
    let n = spec.n;
    let q = symmetric_gram(&data.a, spec.alpha);
    let (c, region) = if spec.constrained {
        (-(&q * &data.x_true), FeasibleRegion::nonnegative(n))
    } else {
        (-(data.a.tr_mul(&data.b)), FeasibleRegion::Unconstrained)
    };
    let hessian = Hessian::from_dense(n, row_major(&q))?;
    let mut p = QuadraticProblem::new(hessian, c.as_slice().to_vec(), region)?.mark_psd();
    if spec.alpha > 0.0 {
        p = p.with_modulus(spec.alpha);
    }
    if n <= DENSE_LIMIT {
        let hint = if spec.constrained {
            super::box_optimum(&p)
        } else {
            unconstrained_optimum(&q, &c, &data, spec)
        };
        if let Some((point, value)) = hint {
            p = p.with_optimum(OptimumHint {
                value,
                point: Some(point),
            });
        }
    }
    Ok(p)
}

/// Solution of `Qx = −c`; for singular `Q = AᵀA` with `m < n`, the
/// minimum-norm solution `Aᵀ(AAᵀ)⁻¹b`, which is also the point of the
/// solution set nearest the origin.
fn unconstrained_optimum(
    q: &DMatrix<f64>,
    c: &DVector<f64>,
    data: &SyntheticData,
    spec: &SyntheticSpec,
) -> Option<(Vec<f64>, f64)> {
    let x = if spec.alpha == 0.0 && spec.m < spec.n {
        let aat = &data.a * data.a.transpose();
        let y = aat.cholesky()?.solve(&data.b);
        data.a.tr_mul(&y)
    } else {
        q.clone().cholesky()?.solve(&(-c))
    };
    let value = 0.5 * x.dot(&(q * &x)) + c.dot(&x);
    Some((x.as_slice().to_vec(), value))
}
