//! `asyscd`: generate problems, solve them, benchmark thread scaling, query
//! the rate theory and run the verification suites.

mod bench;
mod generate;
mod manifest;
mod solve;
mod theory_cmd;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "asyscd", version, about = "Asynchronous stochastic coordinate descent for convex quadratics")]
struct Cli {
    /// Base seed for generation, coordinate draws and delays.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Directory for every file the command writes.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Print nothing but warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Write a problem file.
    Generate(generate::GenerateArgs),
    /// Run an engine on a problem file and write its trace.
    Solve(solve::SolveArgs),
    /// Median runtime and speedup per thread count.
    Bench(bench::BenchArgs),
    /// Steplength plans, admissible delays, envelopes and iteration counts.
    Theory(theory_cmd::TheoryArgs),
    /// Run verification suites and report one line per check.
    Verify(verify::VerifyArgs),
}

/// Settings shared by every subcommand.
pub struct Ctx {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub quiet: bool,
}

impl Ctx {
    /// `name` under the output directory unless it is absolute.
    pub fn out(&self, name: impl AsRef<Path>) -> PathBuf {
        let name = name.as_ref();
        if name.is_absolute() {
            name.to_path_buf()
        } else {
            self.out_dir.join(name)
        }
    }

    pub fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }
}

/// How a command that ran to completion ended.
pub enum Outcome {
    Success,
    ChecksFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let parameters = serde_json::to_value(&cli).unwrap_or_default();
    let ctx = Ctx {
        seed: cli.seed,
        out_dir: cli.out_dir,
        quiet: cli.quiet,
    };
    if let Err(e) = std::fs::create_dir_all(&ctx.out_dir) {
        eprintln!("error: cannot create {}: {e}", ctx.out_dir.display());
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::Generate(a) => generate::run(&ctx, a, parameters),
        Command::Solve(a) => solve::run(&ctx, a, parameters),
        Command::Bench(a) => bench::run(&ctx, a, parameters),
        Command::Theory(a) => theory_cmd::run(&ctx, a, parameters),
        Command::Verify(a) => verify::run(&ctx, a, parameters),
    };
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
