//! `cces calibrate`: fit every sector's nest elasticities, shares and
//! productivity change from the two observed states, then verify that the
//! fitted economy reproduces both price systems.

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use cces::cascade::tornqvist;
use cces::equilibrium::{calibrate_economy, observations, verify_replication};
use cces::network::histogram;
use cces::TwoStateData;

use super::{histogram_csv, Ctx, StreamOrderFile};
use crate::svg;

/// Replication residuals above this mean the fitted technologies do not
/// actually reproduce the observed data; the artifact flags it but the run
/// still completes so the residuals can be inspected.
const REPLICATION_TOL: f64 = 1e-8;

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Bins for the elasticity histogram.
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
}

#[derive(Serialize)]
struct SectorRecord {
    sector_id: String,
    theta: f64,
    ln_theta: f64,
    /// Divisia-style index level, the model-free benchmark for `theta`.
    tornqvist: f64,
    ln_tornqvist: f64,
    sigmas: Vec<f64>,
    lambdas: Vec<f64>,
    /// Nest inputs, innermost (most upstream) first.
    inputs: Vec<String>,
    residual: f64,
    iterations: usize,
    notes: Vec<String>,
}

pub fn run(ctx: Ctx, args: &CalibrateArgs) -> Result<()> {
    let mut ctx = ctx;
    let data: TwoStateData = ctx.out.read_json("two_state.json", "ingest")?;
    let sof: StreamOrderFile = ctx.out.read_json("stream_order.json", "triangulate")?;
    let order = sof.to_stream_order(&data.ids)?;

    let (econ, diags) = calibrate_economy(&data, &order)?;
    let obs = observations(&data, &order)?;
    let replication = verify_replication(&econ, &data);

    let mut records = Vec::with_capacity(econ.n);
    for j in 0..econ.n {
        let tech = &econ.technologies[j];
        let ln_tq = tornqvist(&obs[j]);
        records.push(SectorRecord {
            sector_id: econ.ids[j].clone(),
            theta: tech.theta,
            ln_theta: tech.theta.ln(),
            tornqvist: ln_tq.exp(),
            ln_tornqvist: ln_tq,
            sigmas: tech.nests.iter().map(|n| n.sigma).collect(),
            lambdas: tech.nests.iter().map(|n| n.lambda).collect(),
            inputs: tech.nests.iter().map(|n| econ.ids[n.input].clone()).collect(),
            residual: diags[j].residual,
            iterations: diags[j].iterations,
            notes: diags[j].notes.clone(),
        });
    }

    ctx.out.write_json("economy.json", &econ)?;
    ctx.out.write_json("calibration.json", &records)?;

    let mut flat = String::from("sector,theta,ln_theta,tornqvist,ln_tornqvist,residual,iterations\n");
    for r in &records {
        flat.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.sector_id, r.theta, r.ln_theta, r.tornqvist, r.ln_tornqvist, r.residual, r.iterations
        ));
    }
    ctx.out.write_text("calibration.csv", &flat)?;

    let mut cells = String::from("sector,nest,input,lambda,sigma\n");
    for r in &records {
        for (k, input) in r.inputs.iter().enumerate() {
            cells.push_str(&format!(
                "{},{k},{input},{},{}\n",
                r.sector_id, r.lambdas[k], r.sigmas[k]
            ));
        }
    }
    ctx.out.write_text("sigma_cells.csv", &cells)?;

    let sigmas: Vec<f64> = records.iter().flat_map(|r| r.sigmas.iter().copied()).collect();
    if !sigmas.is_empty() {
        let h = histogram(&sigmas, args.bins)?;
        ctx.out.write_text("sigma_histogram.csv", &histogram_csv(&h))?;
        ctx.out.write_text(
            "sigma_histogram.svg",
            &svg::histogram_svg(&h, "Calibrated elasticities", "sigma"),
        )?;
    }

    ctx.out.write_json(
        "replication.json",
        &serde_json::json!({
            "checks": replication.checks,
            "max_residual": replication.max_residual(),
            "tolerance": REPLICATION_TOL,
            "passed": replication.passes(REPLICATION_TOL),
        }),
    )?;

    let effective = serde_json::json!({ "bins": args.bins });
    ctx.out.finish(
        "calibrate",
        &[
            "two_state.json".to_string(),
            "stream_order.json".to_string(),
        ],
        &effective,
    )
}
