//! Plain-text problem files.
//!
//! ```text
//! qp <n> <nnz> <unc|box>
//! c <c_0> ... <c_{n-1}>
//! <i> <j> <Q_ij>            # nnz lines, 0-based, both triangles
//! bounds                    # box only, optional
//! <lo_i> <hi_i>             # n lines, -inf / inf allowed
//! ```
//!
//! Reals are written in shortest round-trip form, so save/load is exact.
//! A box problem without a `bounds` section gets infinite bounds.

use std::fmt::Write as _;
use std::path::Path;

use super::{FeasibleRegion, Hessian, QuadraticProblem};
use crate::io::{self, fmt_real, parse_index, parse_real, FormatError};

pub fn format_problem(p: &QuadraticProblem) -> String {
    let entries = p.hessian().nonzeros();
    let kind = if p.region().is_box() { "box" } else { "unc" };
    let mut out = String::with_capacity(32 * (entries.len() + p.dim()));
    let _ = writeln!(out, "qp {} {} {}", p.dim(), entries.len(), kind);
    out.push('c');
    for v in p.linear() {
        let _ = write!(out, " {}", fmt_real(*v));
    }
    out.push('\n');
    for (i, j, v) in entries {
        let _ = writeln!(out, "{i} {j} {}", fmt_real(v));
    }
    if let FeasibleRegion::Box { lower, upper } = p.region() {
        out.push_str("bounds\n");
        for (lo, hi) in lower.iter().zip(upper) {
            let _ = writeln!(out, "{} {}", fmt_real(*lo), fmt_real(*hi));
        }
    }
    out
}

pub fn parse_problem(text: &str) -> Result<QuadraticProblem, FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (ln, header) = lines
        .next()
        .ok_or_else(|| FormatError::parse(1, "empty problem file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "qp" {
        return Err(FormatError::parse(ln, "expected header `qp <n> <nnz> <unc|box>`"));
    }
    let n = parse_index(fields[1], ln)?;
    let nnz = parse_index(fields[2], ln)?;
    let boxed = match fields[3] {
        "unc" => false,
        "box" => true,
        other => return Err(FormatError::parse(ln, format!("unknown region `{other}`"))),
    };

    let (ln, cline) = lines
        .next()
        .ok_or_else(|| FormatError::parse(ln + 1, "missing `c` line"))?;
    let mut tokens = cline.split_whitespace();
    if tokens.next() != Some("c") {
        return Err(FormatError::parse(ln, "expected `c` line"));
    }
    let linear = tokens
        .map(|t| parse_real(t, ln))
        .collect::<Result<Vec<_>, _>>()?;
    if linear.len() != n {
        return Err(FormatError::parse(
            ln,
            format!("expected {n} linear coefficients, found {}", linear.len()),
        ));
    }

    let mut triplets = Vec::with_capacity(nnz);
    let mut last_line = ln;
    for _ in 0..nnz {
        let (ln, entry) = lines
            .next()
            .ok_or_else(|| FormatError::parse(last_line + 1, format!("expected {nnz} matrix entries")))?;
        last_line = ln;
        let f: Vec<&str> = entry.split_whitespace().collect();
        if f.len() != 3 {
            return Err(FormatError::parse(ln, "expected `i j value`"));
        }
        let (i, j) = (parse_index(f[0], ln)?, parse_index(f[1], ln)?);
        if i >= n || j >= n {
            return Err(FormatError::parse(ln, format!("index out of range for n = {n}")));
        }
        triplets.push((i, j, parse_real(f[2], ln)?));
    }

    let region = match lines.next() {
        None if boxed => FeasibleRegion::uniform_box(n, f64::NEG_INFINITY, f64::INFINITY)?,
        None => FeasibleRegion::Unconstrained,
        Some((ln, "bounds")) if boxed => {
            let mut lower = Vec::with_capacity(n);
            let mut upper = Vec::with_capacity(n);
            let mut last_line = ln;
            for _ in 0..n {
                let (ln, b) = lines
                    .next()
                    .ok_or_else(|| FormatError::parse(last_line + 1, format!("expected {n} bound lines")))?;
                last_line = ln;
                let f: Vec<&str> = b.split_whitespace().collect();
                if f.len() != 2 {
                    return Err(FormatError::parse(ln, "expected `lo hi`"));
                }
                let (lo, hi) = (parse_real(f[0], ln)?, parse_real(f[1], ln)?);
                if !(lo <= hi) {
                    return Err(FormatError::parse(ln, format!("lower bound {lo} exceeds upper bound {hi}")));
                }
                lower.push(lo);
                upper.push(hi);
            }
            FeasibleRegion::boxed(lower, upper)?
        }
        Some((ln, _)) => return Err(FormatError::parse(ln, "unexpected trailing content")),
    };
    if let Some((ln, _)) = lines.next() {
        return Err(FormatError::parse(ln, "unexpected trailing content"));
    }

    let hessian = Hessian::from_triplets(n, triplets)?;
    let p = QuadraticProblem::new(hessian, linear, region)?;
    if !p.psd_by_construction() {
        log::debug!("loaded problem is not known to be positive semidefinite");
    }
    Ok(p)
}

pub fn save_problem(p: &QuadraticProblem, path: impl AsRef<Path>) -> Result<(), FormatError> {
    io::write_string(path.as_ref(), &format_problem(p))
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<QuadraticProblem, FormatError> {
    parse_problem(&io::read_to_string(path.as_ref())?)
}
