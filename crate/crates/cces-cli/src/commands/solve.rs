//! `cces solve`: projected general-equilibrium prices under a productivity
//! shock, plus the coefficient matrices at all three states.

use anyhow::Result;
use clap::Args;

use cces::equilibrium::{coefficients, solve_equilibrium, StateLabel};
use cces::Economy;

use super::{load_shock_spec, shares_csv, shock_map, shock_vector, Ctx, ShockSpec, SolveFile};

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Shock JSON `{"z": {"<sector_id>": 1.1, ...}}`; omitted sectors get 1.
    /// Without the flag, every sector gets 1 (a pure replication solve).
    #[arg(long)]
    pub shock: Option<std::path::PathBuf>,
}

pub fn run(ctx: Ctx, args: &SolveArgs) -> Result<()> {
    let mut ctx = ctx;
    let econ: Economy = ctx.out.read_json("economy.json", "calibrate")?;
    let spec = match &args.shock {
        Some(path) => load_shock_spec(path)?,
        None => ShockSpec::default(),
    };
    let z = shock_vector(&econ, &spec)?;

    let solution = solve_equilibrium(&econ, &z, None)?;
    let relative: Vec<f64> = solution
        .prices
        .iter()
        .zip(&econ.p)
        .map(|(w, p)| w / p)
        .collect();

    let reference = coefficients(&econ, &vec![1.0; econ.n], 1.0, StateLabel::Reference);
    let current = coefficients(&econ, &econ.p, econ.p0, StateLabel::Current);
    let projected = coefficients(&econ, &solution.prices, econ.p0, StateLabel::Projected);

    let mut prices = String::from("sector,current,projected,relative\n");
    for j in 0..econ.n {
        prices.push_str(&format!(
            "{},{},{},{}\n",
            econ.ids[j], econ.p[j], solution.prices[j], relative[j]
        ));
    }
    ctx.out.write_text("projected_prices.csv", &prices)?;
    ctx.out
        .write_text("coefficients_reference.csv", &shares_csv(&reference, &econ.ids))?;
    ctx.out
        .write_text("coefficients_current.csv", &shares_csv(&current, &econ.ids))?;
    ctx.out
        .write_text("coefficients_projected.csv", &shares_csv(&projected, &econ.ids))?;

    let z_map = shock_map(&econ, &z);
    ctx.out.write_json(
        "solve.json",
        &SolveFile {
            z: z_map.clone(),
            iterations: solution.iterations,
            residual: solution.residual,
            prices: solution.prices.clone(),
            relative,
        },
    )?;

    let mut inputs = vec!["economy.json".to_string()];
    if let Some(path) = &args.shock {
        inputs.push(ctx.out.input_name(path));
    }
    let effective = serde_json::json!({ "z": z_map });
    ctx.out.finish("solve", &inputs, &effective)
}
