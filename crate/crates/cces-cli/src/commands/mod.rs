//! One module per subcommand, plus the artifact schemas and helpers the
//! stages share. Artifacts flow through the `--out` directory: each command
//! reads its predecessors' files from there and adds its own.

pub mod calibrate;
pub mod cluster;
pub mod ingest;
pub mod report;
pub mod shock;
pub mod solve;
pub mod synth;
pub mod triangulate;

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use cces::equilibrium::{coefficients, solve_equilibrium, EquilibriumState, Solution, StateLabel};
use cces::network::{
    distance_matrix, hierarchical_cluster, net_multipliers, Dendrogram, DistanceMatrix, Histogram,
    Linkage,
};
use cces::propagation::{
    leontief_baseline, primary_redistribution_profile, welfare, BaselineKind, ProfileEntry,
    WelfareReport,
};
use cces::{Economy, Mat, StreamOrder};

use crate::artifacts::OutDir;
use crate::svg;

/// Everything a subcommand needs besides its own flags.
pub struct Ctx {
    pub out: OutDir,
    /// Parsed `--config` JSON, `Null` when the flag was absent.
    pub config: serde_json::Value,
}

// ---------------------------------------------------------------------------
// Artifact schemas shared across stages
// ---------------------------------------------------------------------------

/// `stream_order.json`: the triangulation result.
#[derive(Debug, Serialize, Deserialize)]
pub struct StreamOrderFile {
    pub gamma_star: f64,
    pub linearity: f64,
    /// Sector ids from most upstream to most downstream.
    pub order: Vec<String>,
    /// The same order as indices into the dataset's id list.
    pub order_indices: Vec<usize>,
}

impl StreamOrderFile {
    pub fn new(order: &StreamOrder, ids: &[String]) -> Self {
        StreamOrderFile {
            gamma_star: order.gamma,
            linearity: order.linearity,
            order: order.order.iter().map(|&i| ids[i].clone()).collect(),
            order_indices: order.order.clone(),
        }
    }

    /// Rebuild the library object, checking the file matches the dataset it
    /// is being applied to.
    pub fn to_stream_order(&self, ids: &[String]) -> Result<StreamOrder> {
        if self.order.len() != ids.len() || self.order_indices.len() != ids.len() {
            return Err(cces::Error::Validation(format!(
                "stream order lists {} sectors but the dataset has {}",
                self.order.len(),
                ids.len()
            ))
            .into());
        }
        for (name, &idx) in self.order.iter().zip(&self.order_indices) {
            if ids.get(idx).map(String::as_str) != Some(name.as_str()) {
                return Err(cces::Error::Validation(format!(
                    "stream order entry '{name}' does not match the dataset; \
                     re-run triangulate on this data"
                ))
                .into());
            }
        }
        Ok(StreamOrder::from_parts(
            self.order_indices.clone(),
            self.gamma_star,
            self.linearity,
        )?)
    }
}

/// `solve.json`: projected prices for one shock vector.
#[derive(Debug, Serialize, Deserialize)]
pub struct SolveFile {
    /// Full shock vector keyed by sector id (including the implicit 1s).
    pub z: BTreeMap<String, f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Projected nominal prices, dataset order.
    pub prices: Vec<f64>,
    /// Projected prices relative to current ones.
    pub relative: Vec<f64>,
}

/// On-disk shock scenario: sectors not listed keep `z = 1`.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct ShockSpec {
    pub z: BTreeMap<String, f64>,
}

pub fn load_shock_spec(path: &Path) -> Result<ShockSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| cces::Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let spec = serde_json::from_str(&text).map_err(|e| cces::Error::Parse {
        file: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(spec)
}

/// Expand a sparse scenario into a dense shock vector over `econ.ids`.
pub fn shock_vector(econ: &Economy, spec: &ShockSpec) -> Result<Vec<f64>> {
    let mut z = vec![1.0; econ.n];
    for (id, &factor) in &spec.z {
        let j = econ
            .ids
            .iter()
            .position(|s| s == id)
            .ok_or_else(|| cces::Error::Validation(format!("shock names unknown sector '{id}'")))?;
        z[j] = factor;
    }
    Ok(z)
}

pub fn shock_map(econ: &Economy, z: &[f64]) -> BTreeMap<String, f64> {
    econ.ids.iter().cloned().zip(z.iter().copied()).collect()
}

// ---------------------------------------------------------------------------
// Scenario evaluation shared by `shock` and `report`
// ---------------------------------------------------------------------------

pub struct CcesBranch {
    pub solution: Solution,
    /// Projected over current prices.
    pub pi_rel: Vec<f64>,
    pub state: EquilibriumState,
    pub report: WelfareReport,
}

pub struct LeontiefBranch {
    /// Relative prices solving the fixed-proportions system.
    pub rho: Vec<f64>,
    pub report: WelfareReport,
}

pub struct ScenarioOutcome {
    pub current: EquilibriumState,
    pub cces: Option<CcesBranch>,
    pub leontief: Option<LeontiefBranch>,
}

pub fn run_scenario(
    econ: &Economy,
    final_demand: &[f64],
    z: &[f64],
    with_cces: bool,
    with_leontief: bool,
) -> Result<ScenarioOutcome> {
    let current = coefficients(econ, &econ.p, econ.p0, StateLabel::Current);
    let cces = if with_cces {
        let solution = solve_equilibrium(econ, z, None)?;
        let pi_rel: Vec<f64> = solution
            .prices
            .iter()
            .zip(&econ.p)
            .map(|(w, p)| w / p)
            .collect();
        let state = coefficients(econ, &solution.prices, econ.p0, StateLabel::Projected);
        let report = welfare(&current, &state, &pi_rel, final_demand, BaselineKind::Cces)?;
        Some(CcesBranch {
            solution,
            pi_rel,
            state,
            report,
        })
    } else {
        None
    };
    let leontief = if with_leontief {
        let (state, rho) = leontief_baseline(&current, z)?;
        let report = welfare(&current, &state, &rho, final_demand, BaselineKind::Leontief)?;
        Some(LeontiefBranch { rho, report })
    } else {
        None
    };
    Ok(ScenarioOutcome {
        current,
        cces,
        leontief,
    })
}

/// The welfare summary table: one row for the current state and one per
/// projected baseline.
pub fn welfare_csv(outcome: &ScenarioOutcome, f: &[f64]) -> String {
    let mut s = String::from(
        "state,baseline,delta_star,delta_f,total_final_demand,total_gross_output,total_value_added\n",
    );
    let total_f: f64 = f.iter().sum();
    let any = outcome
        .cces
        .as_ref()
        .map(|b| &b.report)
        .or(outcome.leontief.as_ref().map(|b| &b.report));
    if let Some(rep) = any {
        let y: f64 = rep.gross_output_current.iter().sum();
        let v: f64 = rep.value_added_current.iter().sum();
        s.push_str(&format!("current,observed,1,0,{total_f},{y},{v}\n"));
    }
    if let Some(b) = &outcome.leontief {
        s.push_str(&projected_row("leontief", &b.report, &b.rho, f));
    }
    if let Some(b) = &outcome.cces {
        s.push_str(&projected_row("cces", &b.report, &b.pi_rel, f));
    }
    s
}

fn projected_row(name: &str, rep: &WelfareReport, pi: &[f64], f: &[f64]) -> String {
    // Nominal final demand in the projection: the scaled bundle at new prices.
    let fd: f64 = pi
        .iter()
        .zip(f)
        .map(|(p, fj)| rep.delta_star * p * fj)
        .sum();
    let y: f64 = rep.gross_output_projected.iter().sum();
    let v: f64 = rep.value_added_projected.iter().sum();
    format!(
        "projected,{name},{},{},{fd},{y},{v}\n",
        rep.delta_star, rep.delta_f
    )
}

/// Per-sector primary-income redistribution, walked in stream order.
pub fn delta_v_csv(outcome: &ScenarioOutcome, ids: &[String], order: &StreamOrder) -> String {
    let mut s = String::from("sector,stream_position,baseline,delta_v,ln_abs,sign\n");
    for (name, report) in branch_reports(outcome) {
        let profile = primary_redistribution_profile(&report.delta_v, &order.order);
        for (rank, e) in profile.iter().enumerate() {
            let ln_abs = e.ln_abs.map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{},{rank},{name},{},{ln_abs},{}\n",
                ids[e.sector], report.delta_v[e.sector], e.sign
            ));
        }
    }
    s
}

pub fn branch_reports(outcome: &ScenarioOutcome) -> Vec<(&'static str, &WelfareReport)> {
    let mut v = Vec::new();
    if let Some(b) = &outcome.leontief {
        v.push(("leontief", &b.report));
    }
    if let Some(b) = &outcome.cces {
        v.push(("cces", &b.report));
    }
    v
}

pub fn delta_v_profile_svg(outcome: &ScenarioOutcome, order: &StreamOrder) -> String {
    let profiles: Vec<(&'static str, Vec<ProfileEntry>)> = branch_reports(outcome)
        .into_iter()
        .map(|(name, rep)| {
            (
                name,
                primary_redistribution_profile(&rep.delta_v, &order.order),
            )
        })
        .collect();
    let series: Vec<(&str, &[ProfileEntry])> = profiles
        .iter()
        .map(|(name, p)| (*name, p.as_slice()))
        .collect();
    svg::profile_svg(&series, "Primary income redistribution along the stream order")
}

// ---------------------------------------------------------------------------
// Clustering shared by `cluster` and `report`
// ---------------------------------------------------------------------------

/// Which equilibrium state's multiplier network to analyze.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StateArg {
    #[value(alias = "ref")]
    Reference,
    #[value(alias = "cur")]
    Current,
    #[value(alias = "proj")]
    Projected,
}

impl StateArg {
    pub fn name(self) -> &'static str {
        match self {
            StateArg::Reference => "reference",
            StateArg::Current => "current",
            StateArg::Projected => "projected",
        }
    }
}

/// Build the coefficient matrix for a named state. The projected state
/// comes from `solve.json`, so `solve` must have run.
pub fn state_equilibrium(ctx: &Ctx, econ: &Economy, which: StateArg) -> Result<EquilibriumState> {
    Ok(match which {
        StateArg::Reference => {
            let ones = vec![1.0; econ.n];
            coefficients(econ, &ones, 1.0, StateLabel::Reference)
        }
        StateArg::Current => coefficients(econ, &econ.p, econ.p0, StateLabel::Current),
        StateArg::Projected => {
            let sf: SolveFile = ctx.out.read_json("solve.json", "solve")?;
            if sf.prices.len() != econ.n {
                return Err(cces::Error::Validation(format!(
                    "solve.json holds {} prices but the economy has {} sectors",
                    sf.prices.len(),
                    econ.n
                ))
                .into());
            }
            coefficients(econ, &sf.prices, econ.p0, StateLabel::Projected)
        }
    })
}

pub fn cluster_state(
    state: &EquilibriumState,
    linkage: Linkage,
) -> Result<(DistanceMatrix, Dendrogram)> {
    let block = state.intermediate_block();
    let mu = net_multipliers(&block)?;
    let dm = distance_matrix(&mu)?;
    let dendro = hierarchical_cluster(&dm.d, linkage)?;
    Ok((dm, dendro))
}

/// Write the full per-state clustering bundle: distance matrix, merge list,
/// leaf order, heatmaps in original and stream order, and the dendrogram.
pub fn write_cluster_artifacts(
    out: &mut OutDir,
    tag: &str,
    ids: &[String],
    dm: &DistanceMatrix,
    dendro: &Dendrogram,
    stream: Option<&StreamOrder>,
) -> Result<()> {
    out.write_text(&format!("distance_{tag}.csv"), &square_csv(ids, &dm.d, None))?;

    let mut merges = String::from("a,b,height,size\n");
    for m in &dendro.merges {
        merges.push_str(&format!("{},{},{},{}\n", m.a, m.b, m.height, m.size));
    }
    out.write_text(&format!("merges_{tag}.csv"), &merges)?;

    let mut leaves = String::from("position,sector_index,sector\n");
    for (pos, &leaf) in dendro.leaf_order.iter().enumerate() {
        leaves.push_str(&format!("{pos},{leaf},{}\n", ids[leaf]));
    }
    out.write_text(&format!("leaf_order_{tag}.csv"), &leaves)?;

    out.write_text(
        &format!("heatmap_{tag}_original.csv"),
        &square_csv(ids, &dm.d, None),
    )?;
    if let Some(order) = stream {
        out.write_text(
            &format!("heatmap_{tag}_stream.csv"),
            &square_csv(ids, &dm.d, Some(&order.order)),
        )?;
    }
    out.write_text(
        &format!("dendrogram_{tag}.svg"),
        &svg::dendrogram_svg(dendro, ids, &format!("Multiplier dendrogram ({tag})")),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Small CSV builders
// ---------------------------------------------------------------------------

/// Square matrix as CSV, optionally with rows and columns permuted.
pub fn square_csv(ids: &[String], m: &Mat, perm: Option<&[usize]>) -> String {
    let identity: Vec<usize> = (0..ids.len()).collect();
    let idx = perm.unwrap_or(&identity);
    let mut s = String::from("sector");
    for &j in idx {
        s.push(',');
        s.push_str(&ids[j]);
    }
    s.push('\n');
    for &i in idx {
        s.push_str(&ids[i]);
        for &j in idx {
            s.push_str(&format!(",{}", m.get(i, j)));
        }
        s.push('\n');
    }
    s
}

/// Cost-share matrix of a state: primary row first, one column per sector.
pub fn shares_csv(state: &EquilibriumState, ids: &[String]) -> String {
    let mut s = String::from("input");
    for id in ids {
        s.push(',');
        s.push_str(id);
    }
    s.push('\n');
    s.push_str("primary");
    for j in 0..ids.len() {
        s.push_str(&format!(",{}", state.shares.get(0, j)));
    }
    s.push('\n');
    for (i, id) in ids.iter().enumerate() {
        s.push_str(id);
        for j in 0..ids.len() {
            s.push_str(&format!(",{}", state.shares.get(i + 1, j)));
        }
        s.push('\n');
    }
    s
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut s = String::from("bin_lo,bin_hi,count\n");
    for (i, &count) in h.counts.iter().enumerate() {
        s.push_str(&format!("{},{},{count}\n", h.edges[i], h.edges[i + 1]));
    }
    s
}
