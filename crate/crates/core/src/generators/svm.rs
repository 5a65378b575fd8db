//! Dual of the kernel SVM without intercept under `K(u, v) = (uᵀv)²`:
//! minimize `½αᵀQα − 1ᵀα` over `[0, C]ᴺ` with `Q_ij = y_i y_j K(x_i, x_j)`.

use std::path::Path;

use super::GeneratorError;
use crate::io::{self, FormatError};
use crate::problem::{DenseMatrix, FeasibleRegion, Hessian, QuadraticProblem};

pub const MAX_SVM_SAMPLES: usize = 5000;

/// Sparse feature vector with strictly increasing 0-based indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseSample {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseSample {
    pub fn dot(&self, other: &SparseSample) -> f64 {
        let (mut a, mut b, mut s) = (0, 0, 0.0);
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    s += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmSpec {
    pub samples: Vec<SparseSample>,
    /// Each `+1` or `−1`.
    pub labels: Vec<f64>,
    pub c_bound: f64,
}

impl SvmSpec {
    /// One more than the largest feature index.
    pub fn features(&self) -> usize {
        self.samples
            .iter()
            .filter_map(|s| s.indices.last())
            .max()
            .map_or(0, |m| m + 1)
    }
}

pub fn gen_svm_dual(spec: &SvmSpec) -> Result<QuadraticProblem, GeneratorError> {
    let n = spec.samples.len();
    if n != spec.labels.len() {
        return Err(GeneratorError::InvalidSpec(format!(
            "{n} samples but {} labels",
            spec.labels.len()
        )));
    }
    if n < 2 {
        return Err(GeneratorError::InvalidSpec("need at least 2 samples".into()));
    }
    if n > MAX_SVM_SAMPLES {
        return Err(GeneratorError::TooLarge {
            found: n,
            limit: MAX_SVM_SAMPLES,
        });
    }
    if let Some(y) = spec.labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(GeneratorError::InvalidSpec(format!("label {y} is not ±1")));
    }
    if !spec.labels.contains(&1.0) || !spec.labels.contains(&-1.0) {
        return Err(GeneratorError::InvalidSpec("both classes must be present".into()));
    }
    if !(spec.c_bound > 0.0) {
        return Err(GeneratorError::InvalidSpec(format!("C must be positive, got {}", spec.c_bound)));
    }
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let k = spec.samples[i].dot(&spec.samples[j]);
            let v = spec.labels[i] * spec.labels[j] * k * k;
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }
    let hessian = Hessian::Dense(DenseMatrix::from_row_major(n, q)?);
    let region = FeasibleRegion::uniform_box(n, 0.0, spec.c_bound)?;
    Ok(QuadraticProblem::new(hessian, vec![-1.0; n], region)?.mark_psd())
}

/// `label idx:val ...` per line with 1-based indices; `#` starts a comment.
/// Labels must be ±1; `C` is set to 1.
pub fn parse_libsvm(text: &str) -> Result<SvmSpec, FormatError> {
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line");
        let label = match label_tok.parse::<f64>() {
            Ok(y) if y == 1.0 || y == -1.0 => y,
            _ => return Err(FormatError::parse(line, format!("label must be +1 or -1, found `{label_tok}`"))),
        };
        let mut pairs = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| FormatError::parse(line, format!("expected `index:value`, found `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .ok()
                .filter(|&i| i >= 1)
                .ok_or_else(|| FormatError::parse(line, format!("feature index must be ≥ 1, found `{idx}`")))?;
            let val = io::parse_real(val, line)?;
            pairs.push((idx - 1, val));
        }
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(FormatError::parse(line, "duplicate feature index"));
        }
        samples.push(SparseSample {
            indices: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
        });
        labels.push(label);
    }
    Ok(SvmSpec {
        samples,
        labels,
        c_bound: 1.0,
    })
}

pub fn load_libsvm(path: impl AsRef<Path>) -> Result<SvmSpec, FormatError> {
    parse_libsvm(&io::read_to_string(path.as_ref())?)
}
