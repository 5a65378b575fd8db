//! Symmetric Hessian storage.
//!
//! Both triangles are always stored, so row `i` doubles as column `i`. A
//! coordinate gradient is then a single row dot product and the restricted
//! Lipschitz constant is a maximum row norm.

use super::ProblemError;

/// Compressed sparse-row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets. Duplicates are summed and
    /// explicit zeros are kept.
    pub fn from_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, ProblemError> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(i, j, _) in &entries {
            if i >= n || j >= n {
                return Err(ProblemError::IndexOutOfRange {
                    index: i.max(j),
                    n,
                });
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = Some((i, j));
            row_ptr[i + 1] += 1;
            cols.push(j);
            vals.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self, ProblemError> {
        if data.len() != n * n {
            return Err(ProblemError::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Ok(DenseMatrix { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Hessian {
    Sparse(CsrMatrix),
    Dense(DenseMatrix),
}

/// Stored densely once more than this fraction of entries is nonzero.
pub const DENSE_THRESHOLD: f64 = 0.25;

impl Hessian {
    /// Picks sparse or dense storage by [`DENSE_THRESHOLD`]. Exact zeros
    /// are dropped from sparse storage.
    pub fn from_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, ProblemError> {
        let csr = CsrMatrix::from_triplets(n, triplets.into_iter().filter(|t| t.2 != 0.0))?;
        if n > 0 && csr.nnz() as f64 > DENSE_THRESHOLD * (n as f64 * n as f64) {
            let mut data = vec![0.0; n * n];
            for i in 0..n {
                let (cols, vals) = csr.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    data[i * n + j] = v;
                }
            }
            Ok(Hessian::Dense(DenseMatrix { n, data }))
        } else {
            Ok(Hessian::Sparse(csr))
        }
    }

    /// Picks storage for a row-major dense array by [`DENSE_THRESHOLD`].
    pub fn from_dense(n: usize, data: Vec<f64>) -> Result<Self, ProblemError> {
        let dense = DenseMatrix::from_row_major(n, data)?;
        let nnz = dense.data.iter().filter(|v| **v != 0.0).count();
        if n > 0 && nnz as f64 > DENSE_THRESHOLD * (n as f64 * n as f64) {
            Ok(Hessian::Dense(dense))
        } else {
            Self::from_triplets(n, (0..n * n).map(|k| (k / n, k % n, dense.data[k])))
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, Hessian::Dense(_))
    }

    /// Nonzero entries in row-major order.
    pub fn nonzeros(&self) -> Vec<(usize, usize, f64)> {
        let mut t = self.triplets();
        t.retain(|e| e.2 != 0.0);
        t
    }

    pub fn dim(&self) -> usize {
        match self {
            Hessian::Sparse(m) => m.dim(),
            Hessian::Dense(m) => m.dim(),
        }
    }

    /// Stored entries; for dense storage every entry counts.
    pub fn nnz(&self) -> usize {
        match self {
            Hessian::Sparse(m) => m.nnz(),
            Hessian::Dense(m) => m.n * m.n,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Hessian::Sparse(m) => m.get(i, j),
            Hessian::Dense(m) => m.get(i, j),
        }
    }

    /// `Σ_j Q_ij x_j`, accumulated left to right over the stored row.
    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        match self {
            Hessian::Sparse(m) => {
                let (cols, vals) = m.row(i);
                let mut acc = 0.0;
                for (&j, &v) in cols.iter().zip(vals) {
                    acc += v * x[j];
                }
                acc
            }
            Hessian::Dense(m) => {
                let mut acc = 0.0;
                for (&v, &xj) in m.row(i).iter().zip(x) {
                    acc += v * xj;
                }
                acc
            }
        }
    }

    /// Like [`Hessian::row_dot`] but reads coordinates through `read`, for
    /// iterates that live in shared cells.
    #[inline]
    pub fn row_dot_by(&self, i: usize, read: impl Fn(usize) -> f64) -> f64 {
        match self {
            Hessian::Sparse(m) => {
                let (cols, vals) = m.row(i);
                let mut acc = 0.0;
                for (&j, &v) in cols.iter().zip(vals) {
                    acc += v * read(j);
                }
                acc
            }
            Hessian::Dense(m) => {
                let mut acc = 0.0;
                for (j, &v) in m.row(i).iter().enumerate() {
                    acc += v * read(j);
                }
                acc
            }
        }
    }

    /// Calls `f(j, Q_ij)` for every stored entry of row `i`.
    #[inline]
    pub fn for_each_in_row(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        match self {
            Hessian::Sparse(m) => {
                let (cols, vals) = m.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    f(j, v);
                }
            }
            Hessian::Dense(m) => {
                for (j, &v) in m.row(i).iter().enumerate() {
                    f(j, v);
                }
            }
        }
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        let mut s = 0.0;
        self.for_each_in_row(i, |_, v| s += v * v);
        s.sqrt()
    }

    pub fn row_norm_l1(&self, i: usize) -> f64 {
        let mut s = 0.0;
        self.for_each_in_row(i, |_, v| s += v.abs());
        s
    }

    /// All stored entries in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.dim() {
            self.for_each_in_row(i, |j, v| out.push((i, j, v)));
        }
        out
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim();
        match self {
            Hessian::Dense(m) => m.data.clone(),
            Hessian::Sparse(m) => {
                let mut out = vec![0.0; n * n];
                for i in 0..n {
                    let (cols, vals) = m.row(i);
                    for (&j, &v) in cols.iter().zip(vals) {
                        out[i * n + j] = v;
                    }
                }
                out
            }
        }
    }

    /// Checks `Q_ij == Q_ji` within relative tolerance `rel_tol`.
    pub fn check_symmetric(&self, rel_tol: f64) -> Result<(), ProblemError> {
        let n = self.dim();
        for i in 0..n {
            let mut bad = None;
            self.for_each_in_row(i, |j, v| {
                if bad.is_some() || j <= i {
                    return;
                }
                let w = self.get(j, i);
                if (v - w).abs() > rel_tol * v.abs().max(w.abs()) {
                    bad = Some((j, v, w));
                }
            });
            if let Some((j, v, w)) = bad {
                return Err(ProblemError::NotSymmetric {
                    row: i,
                    col: j,
                    upper: v,
                    lower: w,
                });
            }
            // A stored lower entry without a stored upper partner.
            let mut orphan = None;
            self.for_each_in_row(i, |j, v| {
                if orphan.is_none() && j < i && v != 0.0 && self.get(j, i) == 0.0 {
                    orphan = Some((j, v));
                }
            });
            if let Some((j, v)) = orphan {
                return Err(ProblemError::NotSymmetric {
                    row: j,
                    col: i,
                    upper: 0.0,
                    lower: v,
                });
            }
        }
        Ok(())
    }
}
