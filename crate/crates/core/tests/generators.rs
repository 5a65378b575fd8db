use asyscd::generators::{gen_random_graph, gen_svm_dual, gen_synthetic_qp, gen_vertex_cover, parse_libsvm, SyntheticSpec};
use asyscd::problem::{format_problem, load_problem, save_problem};
use nalgebra::{DMatrix, SymmetricEigen};

#[test]
fn equal_seeds_save_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    for (k, spec) in [SyntheticSpec::new(30, 50, 0.5, 9), SyntheticSpec::new(30, 50, 0.0, 9).constrained()]
        .into_iter()
        .enumerate()
    {
        let a = dir.path().join(format!("a{k}.qp"));
        let b = dir.path().join(format!("b{k}.qp"));
        save_problem(&gen_synthetic_qp(&spec).unwrap(), &a).unwrap();
        save_problem(&gen_synthetic_qp(&spec).unwrap(), &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let other = gen_synthetic_qp(&SyntheticSpec { seed: 10, ..spec }).unwrap();
        assert_ne!(format_problem(&other), std::fs::read_to_string(&a).unwrap());
    }
    let g = |seed| gen_vertex_cover(&gen_random_graph(40, 0.1, seed, 5.0).unwrap()).unwrap();
    assert_eq!(format_problem(&g(3)), format_problem(&g(3)));
}

#[test]
fn saved_problems_load_back_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("qpc.qp");
    let p = gen_synthetic_qp(&SyntheticSpec::new(25, 40, 0.3, 4).constrained()).unwrap();
    save_problem(&p, &path).unwrap();
    let q = load_problem(&path).unwrap();
    assert_eq!(p.hessian().to_dense(), q.hessian().to_dense());
    assert_eq!(p.linear(), q.linear());
    assert_eq!(p.region(), q.region());
}

#[test]
fn synthetic_diagonal_is_one_plus_alpha() {
    for (m, n, alpha, seed) in [(10, 5, 0.0, 1), (40, 80, 0.5, 2), (100, 60, 2.0, 3)] {
        let p = gen_synthetic_qp(&SyntheticSpec::new(m, n, alpha, seed)).unwrap();
        for (i, d) in p.diagonal().iter().enumerate() {
            assert!((d - (1.0 + alpha)).abs() <= 1e-9, "Q[{i}][{i}] = {d}");
        }
    }
}

#[test]
fn vertex_cover_rows_are_sparse() {
    let spec = gen_random_graph(60, 0.08, 21, 5.0).unwrap();
    let (v, edges) = spec.compact().unwrap();
    let p = gen_vertex_cover(&spec).unwrap();
    let mut degree = vec![0usize; v];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let max_degree = degree.iter().copied().max().unwrap();
    let dense = p.hessian().to_dense();
    let n = p.dim();
    assert_eq!(n, v + edges.len());
    let nnz = |i: usize| dense[i * n..(i + 1) * n].iter().filter(|x| **x != 0.0).count();
    for i in 0..v {
        assert!(nnz(i) <= 2 * max_degree + 1, "vertex row {i} has {} nonzeros", nnz(i));
    }
    for i in v..n {
        assert_eq!(nnz(i), 3, "slack row {i}");
    }
}

#[test]
fn svm_dual_is_symmetric_psd() {
    let text: String = (0..150)
        .map(|i| {
            let y = if (i * 7) % 5 < 2 { "-1" } else { "+1" };
            let f = |k: usize| ((i * 31 + k * 17) % 23) as f64 / 23.0 - 0.4;
            format!("{y} {}:{} {}:{} {}:{}\n", 1 + i % 3, f(1), 4 + i % 5, f(2), 9 + i % 2, f(3))
        })
        .collect();
    let p = gen_svm_dual(&parse_libsvm(&text).unwrap()).unwrap();
    let q = DMatrix::from_row_slice(150, 150, &p.hessian().to_dense());
    assert_eq!(q, q.transpose());
    let min = SymmetricEigen::new(q.clone()).eigenvalues.min();
    assert!(min >= -1e-9 * q.norm(), "λ_min = {min}");
}
