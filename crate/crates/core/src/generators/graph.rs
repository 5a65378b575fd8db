//! Vertex cover as a penalized quadratic:
//! `cᵀx + (β/2)‖Ax‖² + (1/(2β))‖x‖²` over `[0,1]ⁿ`, one constraint row
//! `y_u + y_v − s_uv = 0` per edge.

use std::collections::BTreeSet;
use std::path::Path;

use super::GeneratorError;
use crate::io::{self, FormatError};
use crate::problem::{FeasibleRegion, Hessian, QuadraticProblem};
use crate::rng::{streams, CounterRng};

pub const DEFAULT_BETA: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub edges: Vec<(u64, u64)>,
    pub beta: f64,
}

impl GraphSpec {
    pub fn new(edges: Vec<(u64, u64)>, beta: f64) -> Self {
        GraphSpec { edges, beta }
    }

    /// Distinct vertex labels, sorted.
    pub fn vertices(&self) -> Vec<u64> {
        let set: BTreeSet<u64> = self.edges.iter().flat_map(|&(u, v)| [u, v]).collect();
        set.into_iter().collect()
    }

    /// Vertices compacted to `0..V` in label order and edges deduplicated
    /// as unordered pairs, sorted.
    pub fn compact(&self) -> Result<(usize, Vec<(usize, usize)>), GeneratorError> {
        let labels = self.vertices();
        let index = |v: u64| labels.binary_search(&v).expect("label present");
        let mut edges = BTreeSet::new();
        for &(u, v) in &self.edges {
            if u == v {
                return Err(GeneratorError::SelfLoop(u));
            }
            let (a, b) = (index(u), index(v));
            edges.insert((a.min(b), a.max(b)));
        }
        Ok((labels.len(), edges.into_iter().collect()))
    }
}

pub fn gen_vertex_cover(spec: &GraphSpec) -> Result<QuadraticProblem, GeneratorError> {
    if spec.edges.is_empty() {
        return Err(GeneratorError::InvalidSpec("edge list is empty".into()));
    }
    let beta = spec.beta;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(GeneratorError::InvalidSpec(format!("beta must be positive, got {beta}")));
    }
    let (nv, edges) = spec.compact()?;
    let n = nv + edges.len();
    let mut degree = vec![0usize; nv];
    let mut t = Vec::with_capacity(nv + 7 * edges.len());
    for (e, &(u, v)) in edges.iter().enumerate() {
        degree[u] += 1;
        degree[v] += 1;
        let s = nv + e;
        t.extend([(u, v, beta), (v, u, beta)]);
        t.extend([(u, s, -beta), (s, u, -beta), (v, s, -beta), (s, v, -beta)]);
        t.push((s, s, beta + 1.0 / beta));
    }
    for (u, &d) in degree.iter().enumerate() {
        t.push((u, u, beta * d as f64 + 1.0 / beta));
    }
    let mut c = vec![0.0; n];
    c[..nv].fill(1.0);
    let hessian = Hessian::from_triplets(n, t)?;
    let region = FeasibleRegion::uniform_box(n, 0.0, 1.0)?;
    Ok(QuadraticProblem::new(hessian, c, region)?
        .mark_psd()
        .with_modulus(1.0 / beta))
}

/// Erdős–Rényi `G(V, prob)`; isolated vertices disappear on compaction.
pub fn gen_random_graph(vertices: u64, prob: f64, seed: u64, beta: f64) -> Result<GraphSpec, GeneratorError> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(GeneratorError::InvalidSpec(format!("edge probability must lie in [0, 1], got {prob}")));
    }
    let rng = CounterRng::new(seed);
    let mut edges = Vec::new();
    for u in 0..vertices {
        for v in u + 1..vertices {
            if rng.uniform(streams::GRAPH, u * vertices + v) < prob {
                edges.push((u, v));
            }
        }
    }
    if edges.is_empty() {
        return Err(GeneratorError::InvalidSpec("random graph has no edges".into()));
    }
    Ok(GraphSpec::new(edges, beta))
}

/// Whitespace-separated `u v` pairs, one per line; `#` starts a comment.
/// Duplicates are kept here and removed by [`GraphSpec::compact`].
pub fn parse_edge_list(text: &str) -> Result<GraphSpec, FormatError> {
    let mut edges = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let f: Vec<&str> = content.split_whitespace().collect();
        if f.len() != 2 {
            return Err(FormatError::parse(line, "expected `u v`"));
        }
        let parse = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| FormatError::parse(line, format!("expected a vertex id, found `{s}`")))
        };
        let (u, v) = (parse(f[0])?, parse(f[1])?);
        if u == v {
            return Err(FormatError::parse(line, format!("self-loop on vertex {u}")));
        }
        edges.push((u, v));
    }
    Ok(GraphSpec::new(edges, DEFAULT_BETA))
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<GraphSpec, FormatError> {
    parse_edge_list(&io::read_to_string(path.as_ref())?)
}
