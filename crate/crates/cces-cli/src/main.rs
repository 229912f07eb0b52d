//! `cces` — production-network pipeline around cascaded-CES technologies.
//!
//! Subcommands chain through a shared `--out` directory: `ingest` turns raw
//! linked tables into shares and prices, `triangulate` orders the sectors,
//! `calibrate` fits the technologies, `solve`/`shock` project counterfactual
//! prices and welfare, `cluster` groups sectors by multiplier similarity,
//! `report` emits the whole table-and-figure bundle, and `synth` fabricates
//! economies with known ground truth. Every run records its inputs, its
//! effective configuration and its complete output inventory in
//! `run_manifest.json`.
//!
//! Failures print a single JSON object to stderr — `{code, module, message,
//! context}` — and map onto stable exit codes: 2 usage, 3 i/o or parse,
//! 4 validation, 5 calibration, 6 non-convergence, 7 linear-algebra or size
//! limits, 1 anything else.

mod artifacts;
mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use crate::artifacts::OutDir;
use crate::commands::Ctx;

#[derive(Parser)]
#[command(
    name = "cces",
    version,
    about = "Cascaded-CES production networks: ingest, order, calibrate, project, cluster",
    propagate_version = true
)]
struct Cli {
    /// Directory receiving artifacts and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for parallel stages (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// JSON options file; `ingest` honors `split`, `balance_tol` and `p0`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load linked transaction tables and deflators; merge and reduce them.
    Ingest(commands::ingest::IngestArgs),
    /// Order sectors most-upstream-first and score the hierarchy.
    Triangulate(commands::triangulate::TriangulateArgs),
    /// Fit nest elasticities, shares and productivity changes per sector.
    Calibrate(commands::calibrate::CalibrateArgs),
    /// Solve projected equilibrium prices under a productivity shock.
    Solve(commands::solve::SolveArgs),
    /// Account the welfare effects of a shock scenario.
    Shock(commands::shock::ShockArgs),
    /// Cluster sectors by net-multiplier similarity.
    Cluster(commands::cluster::ClusterArgs),
    /// Emit the complete table-and-figure bundle.
    Report(commands::report::ReportArgs),
    /// Generate a synthetic economy with known ground truth.
    Synth(commands::synth::SynthArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Triangulate(_) => "triangulate",
            Command::Calibrate(_) => "calibrate",
            Command::Solve(_) => "solve",
            Command::Shock(_) => "shock",
            Command::Cluster(_) => "cluster",
            Command::Report(_) => "report",
            Command::Synth(_) => "synth",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let module = cli.command.name();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (exit, code) = classify(&err);
            let payload = serde_json::json!({
                "code": code,
                "module": module,
                "message": format!("{err:#}"),
                "context": { "out": cli.out.display().to_string() },
            });
            eprintln!("{payload}");
            ExitCode::from(exit)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("initializing the thread pool")?;
    }
    let config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| cces::Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|e| cces::Error::Parse {
                file: path.display().to_string(),
                message: e.to_string(),
            })?
        }
        None => serde_json::Value::Null,
    };
    let ctx = Ctx {
        out: OutDir::create(&cli.out)?,
        config,
    };
    match &cli.command {
        Command::Ingest(args) => commands::ingest::run(ctx, args),
        Command::Triangulate(args) => commands::triangulate::run(ctx, args),
        Command::Calibrate(args) => commands::calibrate::run(ctx, args),
        Command::Solve(args) => commands::solve::run(ctx, args),
        Command::Shock(args) => commands::shock::run(ctx, args),
        Command::Cluster(args) => commands::cluster::run(ctx, args),
        Command::Report(args) => commands::report::run(ctx, args),
        Command::Synth(args) => commands::synth::run(ctx, args),
    }
}

/// Map an error chain onto (exit code, machine code). The library's own
/// classification wins; bare i/o and JSON errors from the CLI layer get
/// folded into the same families.
fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<cces::Error>() {
            let code = e.code();
            let exit = match code {
                "io" | "parse" => 3,
                "validation" => 4,
                "calibration" => 5,
                "non_convergence" => 6,
                "singular" | "too_large" => 7,
                _ => 1,
            };
            return (exit, code);
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return (3, "io");
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return (3, "parse");
        }
    }
    (1, "internal")
}
