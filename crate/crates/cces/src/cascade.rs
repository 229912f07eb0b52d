//! Cascaded-CES technologies: cost evaluation and calibration.
//!
//! A sector transforms one primary factor and k intermediate inputs through a
//! chain of two-input CES nests. Nest 1 combines the primary factor with the
//! most upstream intermediate input; each later nest combines the running
//! aggregate with the next input downstream; a Hicks-neutral productivity
//! scalar theta multiplies the outermost aggregate. By Shephard duality the
//! unit cost is the same cascade applied to prices with the conjugate
//! exponents, so everything here works on the dual (price) side:
//!
//! ```text
//! W_1 = w_0                                     (primary factor price)
//! W_{i+1} = [ lambda_i w_i^{1-sigma_i} + (1-lambda_i) W_i^{1-sigma_i} ]^{1/(1-sigma_i)}
//! c = W_{k+1} / theta                           (unit cost = output price)
//! ```
//!
//! Calibration inverts this chain: given cost-share columns from two
//! equilibrium states (all prices 1 in the reference state) and current
//! prices, the lambdas come from the reference shares alone, each sigma from
//! the ratio of current to reference within-nest shares, and theta from a
//! one-dimensional root solve that makes the implied primary-factor price
//! match the observed numeraire.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

/// One CES nest: the intermediate input it absorbs (an economy-wide
/// commodity index), its reference share weight, and its elasticity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nest {
    pub input: usize,
    pub lambda: f64,
    pub sigma: f64,
}

/// A calibrated sector technology. `nests` runs innermost (most upstream
/// input) to outermost; `theta` is the Hicks-neutral productivity scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorTechnology {
    pub id: String,
    pub nests: Vec<Nest>,
    pub theta: f64,
}

/// What calibration consumes for one sector: its cost-share column in the
/// reference state (`a`) and current state (`b`), both primary-first and in
/// nest order, plus current prices (`p[0]` is the numeraire / primary price,
/// `p[i]` the price of nest i's input) and the sector's own current output
/// price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorObservation {
    pub id: String,
    /// Economy-wide commodity index of each nest's input, innermost first.
    pub inputs: Vec<usize>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub p: Vec<f64>,
    pub p_out: f64,
}

/// Non-fatal notes produced while calibrating one sector.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDiagnostics {
    /// Residual `W_1(theta) - p_0` at the accepted root.
    pub residual: f64,
    /// Bisection iterations spent on the productivity root.
    pub iterations: usize,
    /// Degenerate nests forced to sigma = 1, extra sign changes in the
    /// bracket scan, and similar conditions worth surfacing.
    pub notes: Vec<String>,
}

/// Calibration result for one sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedSector {
    pub tech: SectorTechnology,
    pub diagnostics: CalibrationDiagnostics,
}

/// Dual price aggregator for a single nest.
///
/// Returns the nest's unit cost given the input price `w_in`, the inner
/// aggregate's price `inner`, the share weight `lambda` and elasticity
/// `sigma`. The Cobb-Douglas limit is used within [`tol::SIGMA_ONE_EPS`] of
/// sigma = 1; sigma = 0 degenerates to the linear (fixed-proportions) cost.
pub fn nest_cost(lambda: f64, sigma: f64, w_in: f64, inner: f64) -> f64 {
    if (sigma - 1.0).abs() < tol::SIGMA_ONE_EPS {
        w_in.powf(lambda) * inner.powf(1.0 - lambda)
    } else {
        let om = 1.0 - sigma;
        (lambda * w_in.powf(om) + (1.0 - lambda) * inner.powf(om)).powf(1.0 / om)
    }
}

/// Price of the outermost aggregate before productivity: the full dual chain
/// `W_{k+1}` evaluated at economy prices `w` (indexed by each nest's
/// `input`) and primary price `w0`.
pub fn gross_dual(tech: &SectorTechnology, w: &[f64], w0: f64) -> f64 {
    let mut inner = w0;
    for nest in &tech.nests {
        inner = nest_cost(nest.lambda, nest.sigma, w[nest.input], inner);
    }
    inner
}

/// Unit cost of the sector at prices `(w, w0)`: `gross_dual / theta`.
pub fn unit_cost(tech: &SectorTechnology, w: &[f64], w0: f64) -> f64 {
    gross_dual(tech, w, w0) / tech.theta
}

/// Cost shares at prices `(w, w0)` by Shephard's lemma, primary share first
/// and then one share per nest in nest order.
///
/// Each nest contributes `lambda_i (w_i / W_{i+1})^{1-sigma_i}` of that
/// nest's budget; the outer nests scale it down by their compound-input
/// shares. The returned vector sums to 1 up to rounding.
pub fn cost_shares(tech: &SectorTechnology, w: &[f64], w0: f64) -> Vec<f64> {
    let k = tech.nests.len();
    // Forward pass: W_1 .. W_{k+1}.
    let mut chain = Vec::with_capacity(k + 1);
    chain.push(w0);
    for nest in &tech.nests {
        let inner = *chain.last().unwrap();
        chain.push(nest_cost(nest.lambda, nest.sigma, w[nest.input], inner));
    }

    let mut shares = vec![0.0; k + 1];
    // `outer` accumulates the product of compound-input shares of all nests
    // outside the current one.
    let mut outer = 1.0;
    for (i, nest) in tech.nests.iter().enumerate().rev() {
        let within = if (nest.sigma - 1.0).abs() < tol::SIGMA_ONE_EPS {
            nest.lambda
        } else {
            nest.lambda * (w[nest.input] / chain[i + 1]).powf(1.0 - nest.sigma)
        };
        shares[i + 1] = outer * within;
        outer *= 1.0 - within;
    }
    shares[0] = outer;
    shares
}

/// Share weights from a reference cost-share column (primary-first).
///
/// Working outermost-in, each nest's weight is its input's share of
/// everything not yet absorbed by outer nests:
/// `lambda_i = a_i / (a_0 + ... + a_i)`. The leftover product reproduces the
/// primary share exactly.
pub fn calibrate_lambdas(a: &[f64]) -> Result<Vec<f64>> {
    validate_share_column(a, "reference")?;
    let mut lambdas = Vec::with_capacity(a.len() - 1);
    let mut below = a[0];
    for &ai in &a[1..] {
        below += ai;
        lambdas.push(ai / below);
    }
    Ok(lambdas)
}

fn validate_share_column(s: &[f64], label: &str) -> Result<()> {
    if s.len() < 2 {
        return Err(Error::Validation(format!(
            "{label} share column needs a primary share and at least one input share"
        )));
    }
    let sum: f64 = s.iter().sum();
    if (sum - 1.0).abs() > tol::SHARE_SUM_TOL {
        return Err(Error::Validation(format!(
            "{label} share column sums to {sum}, expected 1"
        )));
    }
    if s[0] <= 0.0 {
        return Err(Error::Validation(format!(
            "{label} primary share must be positive, got {}",
            s[0]
        )));
    }
    for (i, &v) in s.iter().enumerate() {
        if !v.is_finite() || v < 0.0 || v >= 1.0 {
            return Err(Error::Validation(format!(
                "{label} share {i} out of range: {v}"
            )));
        }
    }
    Ok(())
}

/// Outcome of one backward-recursion evaluation at a trial productivity.
enum Backward {
    /// Recursion completed; carries (W_1, sigmas, W chain).
    Done(f64, Vec<f64>, Vec<f64>),
    /// A nest inversion left no positive radicand (trial productivity is
    /// outside the feasible region, typically floating-point over/underflow
    /// at extreme trials).
    Infeasible,
}

/// One backward sweep of the calibration recursion at trial productivity `t`.
///
/// Starting from `W_{k+1} = t * p_out`, peel nests outermost-in: the current
/// within-nest share pins sigma through
/// `b_i / (R_i lambda_i) = (p_i / W_{i+1})^{1-sigma_i}` where `R_i` is the
/// cost share of nest i's whole aggregate, and the CES identity then inverts
/// for the inner aggregate's price. Returns the implied primary price `W_1`.
fn backward_sweep(
    t: f64,
    b: &[f64],
    p: &[f64],
    p_out: f64,
    lambdas: &[f64],
    notes: Option<&mut Vec<String>>,
) -> Backward {
    let k = lambdas.len();
    let mut sigmas = vec![0.0; k];
    let mut chain = vec![0.0; k + 1]; // chain[i] = W_{i+1}, i = 0..k
    chain[k] = t * p_out;
    let mut remainder = 1.0; // R_i = 1 - sum of shares of nests outside i
    let mut local_notes = Vec::new();
    for i in (1..=k).rev() {
        let lam = lambdas[i - 1];
        let w_next = chain[i];
        let ratio = b[i] / (remainder * lam);
        let den = (w_next / p[i]).ln();
        let sigma = if den.abs() < tol::DEGENERATE_LOG_EPS {
            local_notes.push(format!(
                "nest {i}: input and aggregate prices coincide; sigma pinned to 1 \
                 (within-share log ratio {:.3e})",
                ratio.ln()
            ));
            1.0
        } else {
            1.0 + ratio.ln() / den
        };
        if !sigma.is_finite() {
            return Backward::Infeasible;
        }
        sigmas[i - 1] = sigma;

        let inner = if (sigma - 1.0).abs() < tol::SIGMA_ONE_EPS {
            // Cobb-Douglas inversion: W_{i+1} = p^lambda W^(1-lambda).
            (w_next / p[i].powf(lam)).powf(1.0 / (1.0 - lam))
        } else {
            let om = 1.0 - sigma;
            let rad = (w_next.powf(om) - lam * p[i].powf(om)) / (1.0 - lam);
            if rad.is_nan() || rad <= 0.0 {
                return Backward::Infeasible;
            }
            rad.powf(1.0 / om)
        };
        // Overflow to +inf is allowed to propagate: it still carries a usable
        // residual sign for bracketing. Only NaN and non-positive values are
        // genuinely infeasible.
        if inner.is_nan() || inner <= 0.0 {
            return Backward::Infeasible;
        }
        chain[i - 1] = inner;
        remainder -= b[i];
    }
    if let Some(sink) = notes {
        sink.extend(local_notes);
    }
    Backward::Done(chain[0], sigmas, chain)
}

/// Calibrate one sector's technology from its two observed share columns.
///
/// The share weights come straight from the reference column. The
/// productivity scalar is the root of `W_1(t) = p_0`: the residual is scanned
/// on a geometric grid (widening from the base window up to
/// `[ROOT_T_MIN, ROOT_T_MAX]` if needed), the first sign change is bisected
/// to f64 resolution, and the elasticities are read off the recursion at the
/// root. Trials where a nest inversion fails count as infeasible and simply
/// cannot host the bracket.
pub fn calibrate_sector(obs: &SectorObservation) -> Result<CalibratedSector> {
    let fail = |reason: String| Error::Calibration {
        sector: obs.id.clone(),
        reason,
    };
    let k = obs.inputs.len();
    if k == 0 {
        return Err(fail("sector has no intermediate inputs".into()));
    }
    if obs.a.len() != k + 1 || obs.b.len() != k + 1 || obs.p.len() != k + 1 {
        return Err(fail(format!(
            "expected {} shares and prices (primary + {} inputs), got a={}, b={}, p={}",
            k + 1,
            k,
            obs.a.len(),
            obs.b.len(),
            obs.p.len()
        )));
    }
    for (i, &v) in obs.p.iter().enumerate() {
        if !v.is_finite() || v <= 0.0 {
            return Err(fail(format!("price {i} must be positive, got {v}")));
        }
    }
    if !obs.p_out.is_finite() || obs.p_out <= 0.0 {
        return Err(fail(format!("output price must be positive, got {}", obs.p_out)));
    }
    for i in 1..=k {
        match (obs.a[i] > 0.0, obs.b[i] > 0.0) {
            (true, true) => {}
            (false, false) => {
                return Err(fail(format!(
                    "input {} has zero share in both states; drop it before calibrating",
                    i - 1
                )))
            }
            _ => {
                return Err(fail(format!(
                    "input {} appears in only one state; incidence patterns must match",
                    i - 1
                )))
            }
        }
    }
    let lambdas = calibrate_lambdas(&obs.a).map_err(|e| fail(e.to_string()))?;
    validate_share_column(&obs.b, "current").map_err(|e| fail(e.to_string()))?;

    let p0 = obs.p[0];
    let residual_at = |t: f64| -> Option<f64> {
        match backward_sweep(t, &obs.b, &obs.p, obs.p_out, &lambdas, None) {
            Backward::Done(w1, _, _) => {
                let r = w1 - p0;
                if r.is_nan() {
                    None
                } else {
                    Some(r)
                }
            }
            Backward::Infeasible => None,
        }
    };

    let mut notes = Vec::new();
    let (mut lo, mut hi, mut flo, mut fhi) =
        find_bracket(&residual_at, &mut notes).ok_or_else(|| {
            fail("no sign change of the primary-price residual in any trial window".into())
        })?;

    // Bisection to f64 resolution. Infeasible midpoints (over/underflow deep
    // in a bracket) are pushed toward the endpoint with the larger residual
    // magnitude, i.e. away from the saturating branch that hosts the root.
    let mut iterations = 0usize;
    while hi - lo > f64::EPSILON * lo.max(1.0) && iterations < tol::ROOT_MAX_ITER {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let fm = residual_at(mid).unwrap_or(if fhi.abs() >= flo.abs() { fhi } else { flo });
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            flo = 0.0;
            fhi = 0.0;
            break;
        }
        if (fm > 0.0) == (fhi > 0.0) {
            hi = mid;
            fhi = fm;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    let theta = if flo.abs() <= fhi.abs() { lo } else { hi };

    let (w1, sigmas, _) =
        match backward_sweep(theta, &obs.b, &obs.p, obs.p_out, &lambdas, Some(&mut notes)) {
            Backward::Done(w1, s, c) => (w1, s, c),
            Backward::Infeasible => {
                return Err(fail("accepted root became infeasible on re-evaluation".into()))
            }
        };

    let nests = obs
        .inputs
        .iter()
        .zip(lambdas.iter().zip(sigmas.iter()))
        .map(|(&input, (&lambda, &sigma))| Nest {
            input,
            lambda,
            sigma,
        })
        .collect();

    Ok(CalibratedSector {
        tech: SectorTechnology {
            id: obs.id.clone(),
            nests,
            theta,
        },
        diagnostics: CalibrationDiagnostics {
            residual: w1 - p0,
            iterations,
            notes,
        },
    })
}

/// Scan geometric grids for a sign change of the residual, widening the
/// window when the base one fails. Returns the first bracketing pair.
fn find_bracket(
    residual_at: &dyn Fn(f64) -> Option<f64>,
    notes: &mut Vec<String>,
) -> Option<(f64, f64, f64, f64)> {
    let (mut lo, mut hi) = (tol::ROOT_WINDOW_LO, tol::ROOT_WINDOW_HI);
    loop {
        // Grid density scales with the window's width in decades.
        let decades = (hi / lo).log10();
        let points = ((48.0 * decades).ceil() as usize).clamp(64, 512);
        let step = (hi / lo).powf(1.0 / (points - 1) as f64);
        let mut prev: Option<(f64, f64)> = None;
        let mut bracket = None;
        let mut extra_changes = 0usize;
        let mut t = lo;
        for i in 0..points {
            if let Some(f) = residual_at(t) {
                if f == 0.0 {
                    return Some((t, t, 0.0, 0.0));
                }
                if let Some((pt, pf)) = prev {
                    if pf.signum() != f.signum() {
                        if bracket.is_none() {
                            bracket = Some((pt, t, pf, f));
                        } else {
                            extra_changes += 1;
                        }
                    }
                }
                prev = Some((t, f));
            } else {
                prev = None;
            }
            t = if i + 2 == points { hi } else { t * step };
        }
        if extra_changes > 0 {
            notes.push(format!(
                "{extra_changes} additional sign change(s) in [{lo:.3e}, {hi:.3e}]; \
                 the root closest to the lower end was kept"
            ));
        }
        if bracket.is_some() {
            return bracket;
        }
        if lo <= tol::ROOT_T_MIN && hi >= tol::ROOT_T_MAX {
            return None;
        }
        lo = (lo * 0.25).max(tol::ROOT_T_MIN);
        hi = (hi * 4.0).min(tol::ROOT_T_MAX);
    }
}

/// Törnqvist productivity index (log form) for one sector's observation:
/// the output price drop not explained by input prices, with shares averaged
/// across the two states. Exponentiate for the level.
pub fn tornqvist(obs: &SectorObservation) -> f64 {
    let mut acc = -obs.p_out.ln();
    for i in 0..obs.p.len() {
        acc += 0.5 * (obs.a[i] + obs.b[i]) * obs.p[i].ln();
    }
    acc
}
