use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::problem::ProblemError;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

impl FormatError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        FormatError::Parse {
            line,
            message: message.into(),
        }
    }
}

pub(crate) fn read_to_string(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_string(path: &Path, contents: &str) -> Result<(), FormatError> {
    std::fs::write(path, contents).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a real, accepting `inf`, `-inf` and `+inf`.
pub(crate) fn parse_real(token: &str, line: usize) -> Result<f64, FormatError> {
    token
        .parse::<f64>()
        .map_err(|_| FormatError::parse(line, format!("expected a real number, found `{token}`")))
}

pub(crate) fn parse_index(token: &str, line: usize) -> Result<usize, FormatError> {
    token
        .parse::<usize>()
        .map_err(|_| FormatError::parse(line, format!("expected an index, found `{token}`")))
}

/// Shortest round-trip decimal, switching to exponent form for very large
/// or very small magnitudes.
pub fn fmt_real(v: f64) -> String {
    let a = v.abs();
    if v.is_finite() && a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}
