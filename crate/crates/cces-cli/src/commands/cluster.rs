//! `cces cluster`: agglomerative clustering of sectors by the similarity of
//! their net-multiplier columns, at any of the three equilibrium states —
//! or, with `--compare`, the histogram of pairwise-distance changes
//! between two states.

use anyhow::Result;
use clap::Args;

use cces::network::{distance_change_histogram, Linkage};
use cces::Economy;

use super::{
    cluster_state, histogram_csv, state_equilibrium, write_cluster_artifacts, Ctx, StateArg,
    StreamOrderFile,
};
use crate::svg;

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Equilibrium state whose multiplier network is clustered.
    #[arg(long, value_enum, default_value_t = StateArg::Current)]
    pub state: StateArg,

    /// Linkage rule: single, complete or average.
    #[arg(long, default_value = "average")]
    pub linkage: Linkage,

    /// Compare two states instead: emit the distance-change histogram.
    #[arg(long, num_args = 2, value_names = ["BEFORE", "AFTER"], value_enum)]
    pub compare: Option<Vec<StateArg>>,

    /// Bins for the distance-change histogram.
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
}

pub fn run(ctx: Ctx, args: &ClusterArgs) -> Result<()> {
    let mut ctx = ctx;
    let econ: Economy = ctx.out.read_json("economy.json", "calibrate")?;
    let mut inputs = vec!["economy.json".to_string()];

    if let Some(pair) = &args.compare {
        let (before, after) = (pair[0], pair[1]);
        if matches!(before, StateArg::Projected) || matches!(after, StateArg::Projected) {
            inputs.push("solve.json".to_string());
        }
        let state_a = state_equilibrium(&ctx, &econ, before)?;
        let state_b = state_equilibrium(&ctx, &econ, after)?;
        let (dm_a, _) = cluster_state(&state_a, args.linkage)?;
        let (dm_b, _) = cluster_state(&state_b, args.linkage)?;
        let h = distance_change_histogram(&dm_a.d, &dm_b.d, args.bins)?;
        let tag = format!("{}_{}", before.name(), after.name());
        ctx.out
            .write_text(&format!("distance_change_{tag}.csv"), &histogram_csv(&h))?;
        ctx.out.write_text(
            &format!("distance_change_{tag}.svg"),
            &svg::histogram_svg(
                &h,
                &format!("Pairwise distance changes, {} to {}", before.name(), after.name()),
                "distance change",
            ),
        )?;
        let effective = serde_json::json!({
            "compare": [before.name(), after.name()],
            "bins": args.bins,
        });
        return ctx.out.finish("cluster", &inputs, &effective);
    }

    if matches!(args.state, StateArg::Projected) {
        inputs.push("solve.json".to_string());
    }
    let state = state_equilibrium(&ctx, &econ, args.state)?;
    let (dm, dendro) = cluster_state(&state, args.linkage)?;

    // The stream-ordered heatmap needs the triangulation; fall back to
    // original order only if it has not been run.
    let stream = match ctx
        .out
        .read_json::<StreamOrderFile>("stream_order.json", "triangulate")
    {
        Ok(sof) => {
            inputs.push("stream_order.json".to_string());
            Some(sof.to_stream_order(&econ.ids)?)
        }
        Err(_) => None,
    };

    write_cluster_artifacts(
        &mut ctx.out,
        args.state.name(),
        &econ.ids,
        &dm,
        &dendro,
        stream.as_ref(),
    )?;

    let effective = serde_json::json!({
        "state": args.state.name(),
        "linkage": format!("{:?}", args.linkage).to_lowercase(),
    });
    ctx.out.finish("cluster", &inputs, &effective)
}
