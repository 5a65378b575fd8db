use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use asyscd::generators::{
    gen_random_graph, gen_svm_dual, gen_synthetic_qp, gen_vertex_cover, load_edge_list, load_libsvm, SyntheticSpec,
};
use asyscd::problem::{compute_lipschitz, save_problem};

use crate::manifest::{unix_now, RunManifest};
use crate::{Ctx, Outcome};

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[command(subcommand)]
    pub kind: Kind,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// Least squares with ridge term: Q = AᵀA + αI, c = −Aᵀb.
    Qp(SyntheticArgs),
    /// Same Q on the nonnegative orthant with c = −Qx̃.
    Qpc(SyntheticArgs),
    /// Vertex-cover relaxation with penalty β on the box [0, 1].
    Vc(GraphArgs),
    /// Dual of the kernel SVM with K(u, v) = (uᵀv)².
    Svm(SvmArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SyntheticArgs {
    /// Rows of A.
    #[arg(long)]
    pub m: usize,
    /// Columns of A (problem dimension).
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Problem file; defaults to `qp.qp` or `qpc.qp`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GraphArgs {
    /// Edge list, one `u v` pair per line.
    #[arg(long, required_unless_present = "vertices", conflicts_with = "vertices")]
    pub edges: Option<PathBuf>,
    /// Vertices of a random graph.
    #[arg(long)]
    pub vertices: Option<u64>,
    /// Edge probability of the random graph.
    #[arg(long, default_value_t = 0.05)]
    pub prob: f64,
    #[arg(long, default_value_t = 5.0)]
    pub beta: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SvmArgs {
    /// Training data in LIBSVM format, labels ±1.
    #[arg(long)]
    pub libsvm: PathBuf,
    /// Box bound C.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(ctx: &Ctx, args: &GenerateArgs, parameters: Value) -> anyhow::Result<Outcome> {
    let started = unix_now();
    let (problem, source, default_name, output) = match &args.kind {
        Kind::Qp(s) | Kind::Qpc(s) => {
            let constrained = matches!(args.kind, Kind::Qpc(_));
            let mut spec = SyntheticSpec::new(s.m, s.n, s.alpha, ctx.seed);
            if constrained {
                spec = spec.constrained();
            }
            let p = gen_synthetic_qp(&spec)?;
            let name = if constrained { "qpc.qp" } else { "qp.qp" };
            let source = format!("synthetic m={} n={} alpha={} seed={}", s.m, s.n, s.alpha, ctx.seed);
            (p, source, name, &s.output)
        }
        Kind::Vc(g) => {
            if !(g.beta > 0.0) {
                bail!("--beta must be positive, got {}", g.beta);
            }
            let (mut spec, source) = match (&g.edges, g.vertices) {
                (Some(path), _) => (
                    load_edge_list(path).with_context(|| format!("reading {}", path.display()))?,
                    format!("edge list {}", path.display()),
                ),
                (None, Some(v)) => (
                    gen_random_graph(v, g.prob, ctx.seed, g.beta)?,
                    format!("random graph vertices={v} prob={} seed={}", g.prob, ctx.seed),
                ),
                (None, None) => bail!("one of --edges or --vertices is required"),
            };
            spec.beta = g.beta;
            (gen_vertex_cover(&spec)?, source, "vc.qp", &g.output)
        }
        Kind::Svm(s) => {
            let mut spec = load_libsvm(&s.libsvm).with_context(|| format!("reading {}", s.libsvm.display()))?;
            spec.c_bound = s.c;
            (gen_svm_dual(&spec)?, format!("libsvm {}", s.libsvm.display()), "svm.qp", &s.output)
        }
    };
    let path = ctx.out(output.clone().unwrap_or_else(|| PathBuf::from(default_name)));
    save_problem(&problem, &path).with_context(|| format!("writing {}", path.display()))?;

    let lip = compute_lipschitz(&problem);
    let nnz = problem.hessian().nonzeros().len();
    let optimum = problem.optimum().map(|h| h.value);
    ctx.say(format!(
        "wrote {}: n = {}, nnz = {}, region = {}, L_max = {}, L_res = {}{}",
        path.display(),
        problem.dim(),
        nnz,
        if problem.region().is_box() { "box" } else { "unconstrained" },
        lip.l_max,
        lip.l_res,
        optimum.map(|f| format!(", f* = {f}")).unwrap_or_default()
    ));
    let mut m = RunManifest::new("generate", ctx.seed, parameters, started);
    m.problem_source = Some(source);
    m.outputs = vec![path.display().to_string()];
    m.results = json!({
        "n": problem.dim(),
        "nnz": nnz,
        "boxed": problem.region().is_box(),
        "l_max": lip.l_max,
        "l_res": lip.l_res,
        "modulus_hint": problem.modulus_hint(),
        "f_star": optimum,
    });
    m.write_beside(&path)?;
    Ok(Outcome::Success)
}
