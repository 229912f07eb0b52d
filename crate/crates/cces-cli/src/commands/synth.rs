//! `cces synth`: generate a synthetic economy with known parameters and
//! write it out in exactly the CSV formats `ingest` consumes, alongside the
//! ground truth for end-to-end validation.

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use cces::ingest::{write_deflators_csv, write_transactions_csv};
use cces::synth::generate_economy;
use cces::{Economy, GeneratorConfig, TwoStateData};

use super::Ctx;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of sectors.
    #[arg(long, default_value_t = 50)]
    pub n: usize,

    /// RNG seed; equal seeds give bit-identical output.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Probability that a feasible supply link exists.
    #[arg(long)]
    pub density: Option<f64>,

    /// How strongly links follow the hidden hierarchy (1 = strictly).
    #[arg(long)]
    pub bias: Option<f64>,
}

#[derive(Serialize)]
struct GroundTruth<'a> {
    config: &'a GeneratorConfig,
    /// Hidden upstream-to-downstream ranks the generator used.
    hidden_order: &'a [usize],
    economy: &'a Economy,
    data: &'a TwoStateData,
}

pub fn run(ctx: Ctx, args: &SynthArgs) -> Result<()> {
    let mut ctx = ctx;
    let mut cfg = GeneratorConfig {
        n: args.n,
        seed: args.seed,
        ..GeneratorConfig::default()
    };
    if let Some(d) = args.density {
        cfg.density = d;
    }
    if let Some(b) = args.bias {
        cfg.triangular_bias = b;
    }

    let synth = generate_economy(&cfg)?;

    write_transactions_csv(&ctx.out.path("transactions.csv"), &synth.tables)?;
    ctx.out.mark_written("transactions.csv");
    write_deflators_csv(&ctx.out.path("deflators.csv"), &synth.tables)?;
    ctx.out.mark_written("deflators.csv");
    ctx.out.write_json(
        "ground_truth.json",
        &GroundTruth {
            config: &synth.config,
            hidden_order: &synth.hidden_order,
            economy: &synth.economy,
            data: &synth.data,
        },
    )?;

    let effective = serde_json::to_value(&cfg)?;
    ctx.out.finish("synth", &[], &effective)
}
