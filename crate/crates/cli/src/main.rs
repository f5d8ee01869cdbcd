//! `equivar`: derive, verify, decompose and fit equivariant polynomial maps.
//!
//! Every invocation prints one JSON `CommandResult` on stdout. Exit status
//! is 0 on success, 1 on a domain error and 2 on a usage error or
//! malformed input.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::io::{print_result, write_atomic, CommandResult, Failure, Outcome};

#[derive(Parser, Debug)]
#[command(name = "equivar", version, about = "Equivariant polynomial maps for classical groups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List the invariant generators for a group action.
    Generators(SpecOnly),
    /// Derive invariant features and equivariant basis maps.
    Derive(SpecOnly),
    /// Evaluate a parametrization on input vectors.
    Eval(EvalArgs),
    /// Numerically check generator invariance and basis equivariance.
    Verify(VerifyArgs),
    /// Decompose a polynomial map over the basis maps and certify it.
    Express(ExpressArgs),
    /// Fit an equivariant regression model.
    Fit(FitArgs),
    /// Predict with a fitted model.
    Predict(PredictArgs),
    /// Score a fitted model on a dataset.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SpecArgs {
    /// Group family: O, SO, Lorentz or Sp.
    #[arg(long)]
    pub group: Option<String>,
    /// Dimension of each input vector.
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of input vectors.
    #[arg(long)]
    pub n: Option<usize>,
    /// GroupSpec JSON file, instead of --group/--d/--n.
    #[arg(long, conflicts_with_all = ["group", "d", "n"])]
    pub spec: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Write the payload to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SpecOnly {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Parametrization JSON, as written by `derive`.
    #[arg(long)]
    pub param: PathBuf,
    /// InputTuple JSON, a list of them, or a bare list of vectors.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Relative tolerance; defaults to 1e-9 for O/SO and 1e-7 otherwise.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct ExpressArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// PolyMap JSON: {"d", "n", "components": [polynomial, ...]}.
    #[arg(long)]
    pub map: PathBuf,
    /// Largest total degree of generator monomials tried.
    #[arg(long)]
    pub degree_bound: Option<u32>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Dataset JSON file.
    #[arg(long, conflicts_with = "task")]
    pub data: Option<PathBuf>,
    /// Synthetic task: weighted-gram, cross-target or lorentz-sum.
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long, default_value_t = 500)]
    pub count: usize,
    /// Standard deviation of Gaussian target noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// Degree of the coefficient polynomials in the features.
    #[arg(long, default_value_t = 1)]
    pub degree: u32,
    /// Ridge penalty; 0 selects an unregularized QR solve.
    #[arg(long, default_value_t = 1e-8)]
    pub lambda: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// InputTuple JSON, a list of them, or a bare list of vectors.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Group elements sampled for the equivariance score.
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Data points used for the equivariance score.
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("EQUIVAR_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::usage("UsageError", format!("EQUIVAR_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::domain("ThreadPoolError", e.to_string()))
}

fn out_path(command: &Command) -> Option<&PathBuf> {
    match command {
        Command::Generators(a) | Command::Derive(a) => a.out.out.as_ref(),
        Command::Eval(a) => a.out.out.as_ref(),
        Command::Verify(a) => a.out.out.as_ref(),
        Command::Express(a) => a.out.out.as_ref(),
        Command::Fit(a) => a.out.out.as_ref(),
        Command::Predict(a) => a.out.out.as_ref(),
        Command::Evaluate(a) => a.out.out.as_ref(),
    }
}

/// With `--out`, the payload goes to the file and stdout reports the path.
fn finish(outcome: Outcome, out: Option<&PathBuf>) -> Result<CommandResult, Failure> {
    let Outcome {
        payload,
        mut diagnostics,
    } = outcome;
    let payload = match out {
        None => payload,
        Some(path) => {
            let text = serde_json::to_string_pretty(&payload).expect("values serialize");
            write_atomic(path, text.as_bytes())?;
            diagnostics.push(format!("payload written to {}", path.display()));
            serde_json::json!({ "written": path })
        }
    };
    Ok(CommandResult {
        status: "ok",
        payload,
        diagnostics,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let message = e.render().to_string();
            print_result(&Failure::usage("UsageError", message.trim_end()).into_result());
            return ExitCode::from(2);
        }
    };
    let result = configure_threads()
        .and_then(|()| commands::run(&cli.command))
        .and_then(|outcome| finish(outcome, out_path(&cli.command)));
    match result {
        Ok(r) => {
            print_result(&r);
            ExitCode::SUCCESS
        }
        Err(f) => {
            let code = f.code as u8;
            print_result(&f.into_result());
            ExitCode::from(code)
        }
    }
}
