//! `cces ingest`: load the linked tables, merge the two halves of the
//! current period, and reduce everything to shares and relative prices.

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use cces::ingest::{
    load_linked_tables, merge_states_split, to_two_state, RepairNote, REPAIR_SPLIT_DEFAULT,
};
use cces::tol;

use super::Ctx;

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Transactions CSV: `period,sector,<ids...>,final_demand`, one block of
    /// rows per period (0, 1, 2) ending in the `primary` row.
    #[arg(long)]
    pub transactions: std::path::PathBuf,

    /// Deflator CSV: `sector_id,period,deflator`, covering every sector and
    /// `primary` in all three periods.
    #[arg(long)]
    pub deflators: std::path::PathBuf,
}

/// Keys honored from `--config`.
#[derive(Debug, Default, Serialize, Deserialize)]
struct IngestConfig {
    /// Weights for repairing cells recorded in only one of periods 1/2.
    split: Option<(f64, f64)>,
    /// Relative row/column balance slack accepted in the raw tables.
    balance_tol: Option<f64>,
    /// Override for the primary-factor relative price.
    p0: Option<f64>,
}

pub fn run(ctx: Ctx, args: &IngestArgs) -> Result<()> {
    let mut ctx = ctx;
    let cfg: IngestConfig = if ctx.config.is_null() {
        IngestConfig::default()
    } else {
        serde_json::from_value(ctx.config.clone()).context("reading ingest keys from --config")?
    };
    let split = cfg.split.unwrap_or(REPAIR_SPLIT_DEFAULT);
    let balance_tol = cfg.balance_tol.unwrap_or(tol::BALANCE_TOL_DEFAULT);

    let tables = load_linked_tables(&args.transactions, &args.deflators, balance_tol)?;
    let merged = merge_states_split(&tables, split)?;
    let mut data = to_two_state(&merged)?;
    if let Some(p0) = cfg.p0 {
        if !p0.is_finite() || p0 <= 0.0 {
            return Err(cces::Error::Validation(format!(
                "config p0 must be positive and finite, got {p0}"
            ))
            .into());
        }
        data.p0 = p0;
    }
    let incidence = merged.incidence();

    ctx.out.write_json("two_state.json", &data)?;
    ctx.out.write_json("incidence.json", &incidence)?;
    ctx.out.write_json(
        "merge_report.json",
        &MergeReport {
            sectors: merged.n,
            links: incidence.link_count(),
            repairs: &merged.repairs,
            ref_deflators: &merged.ref_deflators,
            cur_deflators: &merged.cur_deflators,
            split,
            balance_tol,
        },
    )?;

    let effective = serde_json::json!({
        "split": [split.0, split.1],
        "balance_tol": balance_tol,
        "p0": cfg.p0,
    });
    let inputs = [
        ctx.out.input_name(&args.transactions),
        ctx.out.input_name(&args.deflators),
    ];
    ctx.out.finish("ingest", &inputs, &effective)
}

#[derive(Serialize)]
struct MergeReport<'a> {
    sectors: usize,
    links: usize,
    repairs: &'a [RepairNote],
    ref_deflators: &'a [f64],
    cur_deflators: &'a [f64],
    split: (f64, f64),
    balance_tol: f64,
}
