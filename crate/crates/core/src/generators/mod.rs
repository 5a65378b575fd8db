//! Problem families: synthetic least squares (plain and bound-constrained),
//! vertex-cover penalty relaxations, and kernel SVM duals, with the edge
//! list and LIBSVM readers that feed them.

mod graph;
mod svm;
mod synthetic;

pub use graph::{
    gen_random_graph, gen_vertex_cover, load_edge_list, parse_edge_list, GraphSpec, DEFAULT_BETA,
};
pub use svm::{gen_svm_dual, load_libsvm, parse_libsvm, SparseSample, SvmSpec, MAX_SVM_SAMPLES};
pub use synthetic::{gen_synthetic_qp, sample_synthetic, SyntheticData, SyntheticSpec};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::problem::{ProblemError, QuadraticProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("invalid generator input: {0}")]
    InvalidSpec(String),
    #[error("self-loop on vertex {0}")]
    SelfLoop(u64),
    #[error("{found} samples exceed the dense limit of {limit}; subsample the data first")]
    TooLarge { found: usize, limit: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

const POLISH_SWEEPS: usize = 20_000;
const POLISH_RESIDUAL: f64 = 1e-11;

/// High-accuracy minimizer of a box-constrained problem: cyclic projected
/// coordinate sweeps, then an active-set solve on the free coordinates.
/// `None` when neither reaches a residual of `1e-9`.
pub(crate) fn box_optimum(p: &QuadraticProblem) -> Option<(Vec<f64>, f64)> {
    let n = p.dim();
    let region = p.region();
    let mut x = p.project(&vec![0.0; n]);
    for sweep in 0..POLISH_SWEEPS {
        for i in 0..n {
            let g = p.coordinate_gradient_unchecked(&x, i);
            x[i] = region.project_coordinate(i, x[i] - g / p.diagonal()[i]);
        }
        if sweep % 10 == 9 && p.residual_unchecked(&x) <= POLISH_RESIDUAL {
            break;
        }
    }
    if let Some(y) = active_set_refine(p, &x) {
        if p.residual_unchecked(&y) < p.residual_unchecked(&x) {
            x = y;
        }
    }
    let r = p.residual_unchecked(&x);
    if r > 1e-9 {
        log::warn!("reference optimum not found: residual {r:.3e}");
        return None;
    }
    Some((x.clone(), p.objective_unchecked(&x)))
}

/// Solves `Q_FF x_F = −c_F − Q_FA x_A` with the active set read off `x`.
fn active_set_refine(p: &QuadraticProblem, x: &[f64]) -> Option<Vec<f64>> {
    let n = p.dim();
    let region = p.region();
    let free: Vec<usize> = (0..n)
        .filter(|&i| {
            let (lo, hi) = region.bounds(i);
            x[i] > lo && x[i] < hi
        })
        .collect();
    if free.is_empty() {
        return None;
    }
    let k = free.len();
    let mut pos = vec![usize::MAX; n];
    for (a, &i) in free.iter().enumerate() {
        pos[i] = a;
    }
    let mut qff = DMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    for (a, &i) in free.iter().enumerate() {
        rhs[a] = -p.linear()[i];
        p.hessian().for_each_in_row(i, |j, v| {
            if pos[j] != usize::MAX {
                qff[(a, pos[j])] = v;
            } else {
                rhs[a] -= v * x[j];
            }
        });
    }
    let sol = qff.cholesky()?.solve(&rhs);
    let mut y = x.to_vec();
    for (a, &i) in free.iter().enumerate() {
        y[i] = region.project_coordinate(i, sol[a]);
    }
    Some(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{FeasibleRegion, Hessian};

    #[test]
    fn box_optimum_on_a_small_problem() {
        // min ½(x₁² + x₂²) − 2x₁ + x₂ on [0,1]²  →  x = (1, 0).
        let p = QuadraticProblem::new(
            Hessian::from_dense(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            vec![-2.0, 1.0],
            FeasibleRegion::uniform_box(2, 0.0, 1.0).unwrap(),
        )
        .unwrap();
        let (x, v) = box_optimum(&p).unwrap();
        assert_eq!(x, vec![1.0, 0.0]);
        assert_eq!(v, -1.5);
    }
}
