use asyscd::problem::{compute_lipschitz, FeasibleRegion, Hessian, QuadraticProblem};
use asyscd::verification::random_convex_qp;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;

/// Symmetric positive definite `BᵀB + μI` from entries in `[-1, 1]`.
fn spd(n: usize, entries: &[f64], mu: f64) -> Vec<f64> {
    let b = DMatrix::from_row_slice(n, n, &entries[..n * n]);
    let q = b.transpose() * &b + DMatrix::identity(n, n) * mu;
    let q = (&q + q.transpose()) * 0.5;
    q.transpose().as_slice().to_vec()
}

fn strictly_convex() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..=10).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(-1.0f64..1.0, n * n),
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(-5.0f64..5.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gradient_norm_bounds_gap_by_modulus((n, b, c, x) in strictly_convex()) {
        let dense = spd(n, &b, 0.05);
        let q = DMatrix::from_row_slice(n, n, &dense);
        let l = SymmetricEigen::new(q.clone()).eigenvalues.min();
        let x_star = q.clone().lu().solve(&(-DVector::from_column_slice(&c))).unwrap();
        let p = QuadraticProblem::new(Hessian::from_dense(n, dense).unwrap(), c, FeasibleRegion::Unconstrained).unwrap();
        let f_star = p.objective(x_star.as_slice()).unwrap();
        let g2: f64 = p.gradient(&x).unwrap().iter().map(|g| g * g).sum();
        let gap = p.objective(&x).unwrap() - f_star;
        prop_assert!(g2 >= 2.0 * l * gap - 1e-9 * (1.0 + g2.abs()), "‖g‖² = {g2}, 2l·gap = {}", 2.0 * l * gap);
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive(
        bounds in prop::collection::vec((-3.0f64..3.0, 0.0f64..4.0), 1..30),
        pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 30),
    ) {
        let n = bounds.len();
        let region = FeasibleRegion::boxed(
            bounds.iter().map(|b| b.0).collect(),
            bounds.iter().map(|b| b.0 + b.1).collect(),
        ).unwrap();
        let x: Vec<f64> = pts[..n].iter().map(|p| p.0).collect();
        let y: Vec<f64> = pts[..n].iter().map(|p| p.1).collect();
        let (px, py) = (region.project(&x), region.project(&y));
        prop_assert_eq!(region.project(&px), px.clone());
        prop_assert!(region.contains(&px));
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        prop_assert!(d(&px, &py) <= d(&x, &y) + 1e-12);
    }

    #[test]
    fn residual_ratio_sits_between_one_and_root_n(n in 2usize..60, seed in 0u64..10_000, boxed in any::<bool>()) {
        let p = random_convex_qp(n, seed, boxed);
        let l = compute_lipschitz(&p);
        prop_assert!(l.l_res >= l.l_max * (1.0 - 1e-12));
        prop_assert!(l.l_res <= (n as f64).sqrt() * l.l_max * (1.0 + 1e-12));
    }

    #[test]
    fn zero_residual_iff_fixed_point(n in 2usize..30, seed in 0u64..10_000, boxed in any::<bool>(), shift in 1e-3f64..1.0) {
        let p = random_convex_qp(n, seed, boxed);
        let (lo, hi) = (0..n).map(|i| p.region().bounds(i)).fold((vec![], vec![]), |(mut l, mut h), b| {
            l.push(b.0);
            h.push(b.1);
            (l, h)
        });
        // Cyclic projected coordinate descent to a numerical optimum.
        let mut x = p.project(&vec![0.0; n]);
        while p.residual(&x).unwrap() > 1e-11 {
            for i in 0..n {
                let g = p.coordinate_gradient(&x, i).unwrap();
                x[i] = (x[i] - g / p.diagonal()[i]).clamp(lo[i], hi[i]);
            }
        }
        let fixed = |x: &[f64]| {
            let g = p.gradient(x).unwrap();
            let step: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - b).collect();
            let px = p.project(&step);
            px.iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        prop_assert!(p.residual(&x).unwrap() <= 1e-9);
        prop_assert!(fixed(&x) <= 1e-9);
        let x_fp = p.project(&x.iter().zip(p.gradient(&x).unwrap()).map(|(a, g)| a - g).collect::<Vec<_>>());
        prop_assert!(p.residual(&x_fp).unwrap() <= 1e-8);
        let mut y = x.clone();
        y[seed as usize % n] += shift;
        let y = p.project(&y);
        prop_assert_eq!(p.residual(&y).unwrap() == 0.0, fixed(&y) == 0.0);
    }
}
