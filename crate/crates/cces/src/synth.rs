//! Synthetic economies with known ground truth.
//!
//! The generator draws a hidden processing order, an incidence biased toward
//! that order, share weights, elasticities and productivities, then runs the
//! model *forward*: reference prices are all 1 by construction, current
//! prices come from the actual fixed point, and the emitted linked tables
//! are built from the implied cost shares so that merging them reproduces
//! the generated two-state dataset exactly. That makes these economies
//! end-to-end oracles: every pipeline stage's output can be compared against
//! the constructed truth.
//!
//! All randomness flows from one seeded ChaCha stream in a fixed draw order,
//! so a (seed, config) pair is fully reproducible.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::cascade::{calibrate_lambdas, Nest, SectorTechnology};
use crate::equilibrium::{coefficients, solve_equilibrium, Economy, StateLabel};
use crate::error::{Error, Result};
use crate::ingest::{IncidenceMatrix, LinkedTables, TablePeriod, TwoStateData};
use crate::linalg;
use crate::mat::Mat;

/// Elasticities are drawn from these intervals by default: substitution
/// behavior on both sides of the Cobb-Douglas point, with a guard band
/// around 1 where calibration is ill-conditioned.
pub const DEFAULT_SIGMA_RANGES: [(f64, f64); 2] = [(-3.0, -0.1), (0.1, 4.0)];

/// No elasticity is generated inside this open interval.
pub const SIGMA_GUARD_BAND: (f64, f64) = (0.95, 1.05);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub seed: u64,
    /// Probability of a delivery link from an upstream to a downstream
    /// sector.
    pub density: f64,
    /// 1 = strictly triangular incidence (plus one self-loop for the most
    /// upstream sector); 0 = direction-blind.
    pub triangular_bias: f64,
    /// Intervals the elasticities are drawn from (uniform over their union).
    pub sigma_ranges: Vec<(f64, f64)>,
    /// Productivity scalars; keep this away from 1 so that self-supplying
    /// sectors stay well-identified.
    pub theta_range: (f64, f64),
    /// Current numeraire price.
    pub p0_range: (f64, f64),
    /// Dirichlet concentration for the reference share columns.
    pub dirichlet_alpha: f64,
    /// Reference shares below this are redrawn.
    pub min_share: f64,
    /// Nominal final demand per sector, both states.
    pub demand_range: (f64, f64),
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n: 50,
            seed: 0,
            density: 0.25,
            triangular_bias: 0.9,
            sigma_ranges: DEFAULT_SIGMA_RANGES.to_vec(),
            theta_range: (0.75, 0.95),
            p0_range: (0.85, 1.15),
            dirichlet_alpha: 2.0,
            min_share: 1e-3,
            demand_range: (50.0, 150.0),
        }
    }
}

/// A generated economy with every layer of ground truth exposed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticEconomy {
    pub config: GeneratorConfig,
    pub economy: Economy,
    pub data: TwoStateData,
    pub tables: LinkedTables,
    pub incidence: IncidenceMatrix,
    /// `hidden_order[k]` = sector at (true) stream position k.
    pub hidden_order: Vec<usize>,
}

fn validate_config(cfg: &GeneratorConfig) -> Result<()> {
    let bad = |msg: String| Err(Error::Validation(msg));
    if cfg.n < 2 {
        return bad(format!("need at least 2 sectors, got {}", cfg.n));
    }
    if cfg.n > crate::tol::MAX_SECTORS {
        return Err(Error::TooLarge(format!(
            "{} sectors exceeds the supported maximum of {}",
            cfg.n,
            crate::tol::MAX_SECTORS
        )));
    }
    if !(cfg.density > 0.0 && cfg.density <= 1.0) {
        return bad(format!("density must be in (0, 1], got {}", cfg.density));
    }
    if !(0.0..=1.0).contains(&cfg.triangular_bias) {
        return bad(format!(
            "triangular bias must be in [0, 1], got {}",
            cfg.triangular_bias
        ));
    }
    if cfg.sigma_ranges.is_empty() {
        return bad("at least one sigma range is required".into());
    }
    for &(lo, hi) in &cfg.sigma_ranges {
        if !lo.is_finite() || !hi.is_finite() || hi < lo {
            return bad(format!("bad sigma range ({lo}, {hi})"));
        }
        let (glo, ghi) = SIGMA_GUARD_BAND;
        if lo > glo && hi < ghi {
            return bad(format!(
                "sigma range ({lo}, {hi}) lies entirely inside the guard band around 1"
            ));
        }
    }
    for (label, (lo, hi), positive) in [
        ("theta", cfg.theta_range, true),
        ("p0", cfg.p0_range, true),
        ("demand", cfg.demand_range, true),
    ] {
        if !lo.is_finite() || !hi.is_finite() || hi < lo || (positive && lo <= 0.0) {
            return bad(format!("bad {label} range ({lo}, {hi})"));
        }
    }
    if !(cfg.dirichlet_alpha > 0.0) {
        return bad(format!(
            "dirichlet alpha must be positive, got {}",
            cfg.dirichlet_alpha
        ));
    }
    if !(cfg.min_share >= 0.0 && cfg.min_share < 0.3) {
        return bad(format!("min share must be in [0, 0.3), got {}", cfg.min_share));
    }
    Ok(())
}

fn uniform_in(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi == lo {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

fn draw_sigma(rng: &mut ChaCha8Rng, ranges: &[(f64, f64)]) -> Result<f64> {
    let lengths: Vec<f64> = ranges.iter().map(|(lo, hi)| hi - lo).collect();
    let total: f64 = lengths.iter().sum();
    for _ in 0..1_000 {
        let sigma = if total == 0.0 {
            // All ranges are points: pick one uniformly.
            ranges[rng.gen_range(0..ranges.len())].0
        } else {
            let mut u = rng.gen_range(0.0..total);
            let mut sigma = ranges[0].0;
            for (&(lo, _), &len) in ranges.iter().zip(&lengths) {
                if u <= len {
                    sigma = lo + u;
                    break;
                }
                u -= len;
            }
            sigma
        };
        let (glo, ghi) = SIGMA_GUARD_BAND;
        if !(sigma > glo && sigma < ghi) {
            return Ok(sigma);
        }
    }
    Err(Error::Validation(
        "could not draw an elasticity outside the guard band around 1".into(),
    ))
}

fn dirichlet(rng: &mut ChaCha8Rng, k: usize, alpha: f64, min_share: f64) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("validated alpha");
    for _ in 0..200 {
        let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total <= 0.0 {
            continue;
        }
        let shares: Vec<f64> = draws.iter().map(|v| v / total).collect();
        if shares.iter().all(|&s| s >= min_share) {
            return shares;
        }
    }
    // Extremely unlikely fallback: clamp and renormalize.
    let mut shares = vec![1.0 / k as f64; k];
    let total: f64 = shares.iter().sum();
    for s in &mut shares {
        *s /= total;
    }
    shares
}

/// Generate one synthetic economy. See the module docs for the construction.
pub fn generate_economy(cfg: &GeneratorConfig) -> Result<SyntheticEconomy> {
    validate_config(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut last_err = None;
    // Price positivity constraints (deflators must stay positive in the
    // extrapolated third period) occasionally fail for extreme draws; retry
    // with the same stream.
    for _ in 0..20 {
        match generate_once(cfg, &mut rng) {
            Ok(s) => return Ok(s),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Validation("generator failed".into())))
}

fn generate_once(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Result<SyntheticEconomy> {
    let n = cfg.n;
    let width = (n.max(2) - 1).to_string().len();
    let ids: Vec<String> = (0..n).map(|i| format!("s{i:0width$}")).collect();

    // Hidden processing order and ranks.
    let mut hidden: Vec<usize> = (0..n).collect();
    hidden.shuffle(rng);
    let mut rank = vec![0usize; n];
    for (r, &s) in hidden.iter().enumerate() {
        rank[s] = r;
    }

    // Incidence: upstream->downstream links at full density, the reverse
    // direction damped by the bias.
    let mut inc = IncidenceMatrix::empty(n, ids.clone());
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = if rank[i] < rank[j] {
                cfg.density
            } else {
                cfg.density * (1.0 - cfg.triangular_bias)
            };
            if rng.gen::<f64>() < p {
                inc.set(i, j, true);
            }
        }
    }
    // Every sector needs at least one input: fall back to a random upstream
    // supplier, or a self-loop for the most upstream sector.
    for j in 0..n {
        if (0..n).any(|i| inc.get(i, j)) {
            continue;
        }
        let upstream: Vec<usize> = (0..n).filter(|&i| rank[i] < rank[j]).collect();
        if upstream.is_empty() {
            inc.set(j, j, true);
        } else {
            inc.set(upstream[rng.gen_range(0..upstream.len())], j, true);
        }
    }

    // Technologies: shares from a Dirichlet (primary first), elasticities
    // from the configured ranges, inputs nested most-upstream-first.
    let mut technologies = Vec::with_capacity(n);
    for j in 0..n {
        let mut inputs: Vec<usize> = (0..n).filter(|&i| inc.get(i, j)).collect();
        inputs.sort_by_key(|&i| rank[i]);
        let shares = dirichlet(rng, inputs.len() + 1, cfg.dirichlet_alpha, cfg.min_share);
        let lambdas = calibrate_lambdas(&shares)?;
        let mut nests = Vec::with_capacity(inputs.len());
        for (pos, &input) in inputs.iter().enumerate() {
            nests.push(Nest {
                input,
                lambda: lambdas[pos],
                sigma: draw_sigma(rng, &cfg.sigma_ranges)?,
            });
        }
        technologies.push(SectorTechnology {
            id: ids[j].clone(),
            nests,
            theta: uniform_in(rng, cfg.theta_range),
        });
    }
    let p0 = uniform_in(rng, cfg.p0_range);

    let mut economy = Economy {
        n,
        ids: ids.clone(),
        technologies,
        p0,
        p: vec![1.0; n],
    };
    // Current prices are the model's own fixed point (z = 1).
    let ones = vec![1.0; n];
    let sol = solve_equilibrium(&economy, &ones, Some(&ones))?;
    economy.p = sol.prices;

    // The extrapolated third-period deflator is 2p - 1, so prices must stay
    // clear of 0.5; the margin keeps the tables strictly positive.
    if economy.p.iter().any(|&p| p < 0.51) || p0 < 0.51 {
        return Err(Error::Validation(
            "generated prices too low for positive period-2 deflators".into(),
        ));
    }

    let ref_state = coefficients(&economy, &ones, 1.0, StateLabel::Reference);
    let cur_state = coefficients(&economy, &economy.p, economy.p0, StateLabel::Current);

    // Nominal tables implied by share columns and final demand draws.
    fn build_period(block: &Mat, primary: &[f64], f: &[f64]) -> Result<TablePeriod> {
        let n = f.len();
        let gross = linalg::solve_i_minus(block, f, "synthetic gross outputs")?;
        let mut x = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                x.set(i, j, block.get(i, j) * gross[j]);
            }
        }
        let primary: Vec<f64> = (0..n).map(|j| primary[j] * gross[j]).collect();
        Ok(TablePeriod {
            x,
            primary,
            final_demand: f.to_vec(),
            primary_final: 0.0,
        })
    }
    let f_ref: Vec<f64> = (0..n).map(|_| uniform_in(rng, cfg.demand_range)).collect();
    let f_cur: Vec<f64> = (0..n).map(|_| uniform_in(rng, cfg.demand_range)).collect();
    let t_ref = build_period(
        &ref_state.intermediate_block(),
        &ref_state.primary_row(),
        &f_ref,
    )?;
    let mut t_cur = build_period(
        &cur_state.intermediate_block(),
        &cur_state.primary_row(),
        &f_cur,
    )?;

    // The third period is the linear extrapolation 2*current - reference;
    // scale the current table up until that stays nonnegative everywhere.
    let mut s_min: f64 = 0.0;
    let mut consider = |r: f64, c: f64| {
        if r > 0.0 {
            s_min = s_min.max(r / (2.0 * c));
        }
    };
    for i in 0..n {
        for j in 0..n {
            consider(t_ref.x.get(i, j), t_cur.x.get(i, j));
        }
        consider(t_ref.primary[i], t_cur.primary[i]);
        consider(t_ref.final_demand[i], t_cur.final_demand[i]);
    }
    let scale = (1.05 * s_min).max(1.0);
    let scale_period = |tp: &mut TablePeriod, s: f64| {
        let scaled: Vec<f64> = tp.x.data().iter().map(|v| v * s).collect();
        tp.x = Mat::from_rows(n, n, scaled);
        for v in tp.primary.iter_mut() {
            *v *= s;
        }
        for v in tp.final_demand.iter_mut() {
            *v *= s;
        }
    };
    scale_period(&mut t_cur, scale);

    let mut t2 = TablePeriod {
        x: Mat::zeros(n, n),
        primary: vec![0.0; n],
        final_demand: vec![0.0; n],
        primary_final: 0.0,
    };
    for i in 0..n {
        for j in 0..n {
            t2.x.set(i, j, 2.0 * t_cur.x.get(i, j) - t_ref.x.get(i, j));
        }
        t2.primary[i] = 2.0 * t_cur.primary[i] - t_ref.primary[i];
        t2.final_demand[i] = 2.0 * t_cur.final_demand[i] - t_ref.final_demand[i];
    }

    let mut deflators = Mat::zeros(n + 1, 3);
    for r in 0..=n {
        deflators.set(r, 0, 1.0);
        deflators.set(r, 1, 1.0);
        let p = if r == n { p0 } else { economy.p[r] };
        deflators.set(r, 2, 2.0 * p - 1.0);
    }

    let tables = LinkedTables {
        n,
        ids: ids.clone(),
        periods: [t_ref.clone(), t_ref, t2],
        deflators,
    };

    let data = TwoStateData {
        n,
        ids,
        a: ref_state.shares,
        b: cur_state.shares,
        p: economy.p.clone(),
        p0,
        final_demand: t_cur.final_demand,
    };

    Ok(SyntheticEconomy {
        config: cfg.clone(),
        economy,
        data,
        tables,
        incidence: inc,
        hidden_order: hidden,
    })
}

/// Multiplicative jitter on the productivity scalars, for robustness tests.
pub fn perturb(econ: &Economy, seed: u64, magnitude: f64) -> Economy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = econ.clone();
    for tech in &mut out.technologies {
        tech.theta *= (rng.gen_range(-magnitude..magnitude)).exp();
    }
    out
}

/// Multiplicative lognormal noise on both states' cost shares, column by
/// column, renormalized so every column still sums to one. Zero cells stay
/// zero, so the incidence pattern survives. `noise` is the log-scale
/// standard deviation (must be nonnegative); zero returns the data
/// unchanged. Used to characterize how calibration degrades as the observed
/// shares drift off the exactly-consistent manifold.
pub fn perturb_shares(data: &TwoStateData, noise: f64, seed: u64) -> TwoStateData {
    if noise == 0.0 {
        return data.clone();
    }
    let normal = Normal::new(0.0, noise).expect("noise must be nonnegative and finite");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = data.clone();
    for mat in [&mut out.a, &mut out.b] {
        for j in 0..out.n {
            for r in 0..=out.n {
                let v = mat.get(r, j);
                if v > 0.0 {
                    mat.set(r, j, v * normal.sample(&mut rng).exp());
                }
            }
            let sum = mat.col_sum(j);
            for r in 0..=out.n {
                let v = mat.get(r, j);
                mat.set(r, j, v / sum);
            }
        }
    }
    out
}
