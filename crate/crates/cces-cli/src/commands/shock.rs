//! `cces shock`: welfare accounting for one scenario — the household's
//! compensating scale factor, the aggregate primary-input saving, and the
//! per-sector redistribution of primary income — against the substitution
//! technology, the fixed-proportions baseline, or both.

use anyhow::Result;
use clap::Args;

use cces::{Economy, TwoStateData};

use super::{
    delta_v_csv, delta_v_profile_svg, load_shock_spec, run_scenario, shock_map, shock_vector,
    welfare_csv, Ctx, ShockSpec, StreamOrderFile,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BaselineArg {
    Cces,
    Leontief,
    Both,
}

#[derive(Debug, Args)]
pub struct ShockArgs {
    /// Scenario JSON `{"z": {"<sector_id>": 1.1, ...}}`; omitted sectors
    /// get 1. Without the flag the scenario is the identity (z = 1).
    #[arg(long)]
    pub scenario: Option<std::path::PathBuf>,

    /// Projected technology to evaluate.
    #[arg(long, value_enum, default_value_t = BaselineArg::Both)]
    pub baseline: BaselineArg,
}

pub fn run(ctx: Ctx, args: &ShockArgs) -> Result<()> {
    let mut ctx = ctx;
    let econ: Economy = ctx.out.read_json("economy.json", "calibrate")?;
    let data: TwoStateData = ctx.out.read_json("two_state.json", "ingest")?;
    let sof: StreamOrderFile = ctx.out.read_json("stream_order.json", "triangulate")?;
    let order = sof.to_stream_order(&econ.ids)?;

    let spec = match &args.scenario {
        Some(path) => load_shock_spec(path)?,
        None => ShockSpec::default(),
    };
    let z = shock_vector(&econ, &spec)?;
    let with_cces = matches!(args.baseline, BaselineArg::Cces | BaselineArg::Both);
    let with_leontief = matches!(args.baseline, BaselineArg::Leontief | BaselineArg::Both);
    let outcome = run_scenario(&econ, &data.final_demand, &z, with_cces, with_leontief)?;

    ctx.out
        .write_text("welfare.csv", &welfare_csv(&outcome, &data.final_demand))?;
    ctx.out
        .write_text("delta_v.csv", &delta_v_csv(&outcome, &econ.ids, &order))?;
    ctx.out
        .write_text("delta_v_profile.svg", &delta_v_profile_svg(&outcome, &order))?;

    let z_map = shock_map(&econ, &z);
    ctx.out.write_json(
        "shock_report.json",
        &serde_json::json!({
            "z": z_map,
            "cces": outcome.cces.as_ref().map(|b| &b.report),
            "leontief": outcome.leontief.as_ref().map(|b| &b.report),
            "solver": outcome.cces.as_ref().map(|b| serde_json::json!({
                "iterations": b.solution.iterations,
                "residual": b.solution.residual,
            })),
        }),
    )?;

    let mut inputs = vec![
        "economy.json".to_string(),
        "two_state.json".to_string(),
        "stream_order.json".to_string(),
    ];
    if let Some(path) = &args.scenario {
        inputs.push(ctx.out.input_name(path));
    }
    let effective = serde_json::json!({
        "z": z_map,
        "baseline": match args.baseline {
            BaselineArg::Cces => "cces",
            BaselineArg::Leontief => "leontief",
            BaselineArg::Both => "both",
        },
    });
    ctx.out.finish("shock", &inputs, &effective)
}
