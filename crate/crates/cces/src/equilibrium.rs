//! Economy assembly, the price fixed point, and state replication checks.
//!
//! The economy-wide price map evaluates every sector's dual cost cascade at
//! a candidate price vector: `H_j(w, w0)` is sector j's outermost aggregate
//! price. An equilibrium under productivity shocks `z` (>= 1, acting as
//! Hicks-neutral multipliers on top of the calibrated thetas) is the fixed
//! point
//!
//! ```text
//! w_j = H_j(w, p0) / (theta_j z_j)
//! ```
//!
//! Starting from the observed current prices, the natural Jacobi iteration
//! is monotone non-increasing and contracts for z >= 1, so plain sweeping to
//! a sup-norm tolerance is both fast and safe.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{
    calibrate_sector, cost_shares, gross_dual, CalibrationDiagnostics, SectorObservation,
    SectorTechnology,
};
use crate::error::{Error, Result};
use crate::ingest::TwoStateData;
use crate::mat::Mat;
use crate::stream::StreamOrder;
use crate::tol;

/// A fully calibrated economy: one cascaded technology per sector plus the
/// current price situation it was calibrated against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Economy {
    pub n: usize,
    pub ids: Vec<String>,
    pub technologies: Vec<SectorTechnology>,
    /// Current numeraire (primary-factor) price.
    pub p0: f64,
    /// Current sector prices (the reference state is all ones).
    pub p: Vec<f64>,
}

impl Economy {
    pub fn theta(&self) -> Vec<f64> {
        self.technologies.iter().map(|t| t.theta).collect()
    }
}

/// Which observed (or projected) situation a coefficient matrix describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateLabel {
    Reference,
    Current,
    Projected,
}

impl std::fmt::Display for StateLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StateLabel::Reference => "reference",
            StateLabel::Current => "current",
            StateLabel::Projected => "projected",
        };
        f.write_str(s)
    }
}

/// Prices plus the cost-share (direct-requirement) matrix they imply,
/// primary row first — the same layout as [`TwoStateData`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumState {
    pub label: StateLabel,
    pub prices: Vec<f64>,
    pub numeraire: f64,
    pub shares: Mat,
}

impl EquilibriumState {
    /// The n x n intermediate block (shares with the primary row dropped).
    pub fn intermediate_block(&self) -> Mat {
        let n = self.prices.len();
        let mut s = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                s.set(i, j, self.shares.get(i + 1, j));
            }
        }
        s
    }

    /// The primary-factor share row.
    pub fn primary_row(&self) -> Vec<f64> {
        self.shares.row(0).to_vec()
    }
}

/// Fixed-point solve outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub prices: Vec<f64>,
    pub iterations: usize,
    /// Relative sup-norm residual of the fixed-point equation at the
    /// returned prices.
    pub residual: f64,
}

/// Build per-sector calibration observations from the two-state dataset.
///
/// A sector's inputs are the nonzero rows of its share column; they become
/// nests ordered by stream position, most upstream innermost. (Both share
/// matrices have the same zero pattern, so either one defines the inputs.)
pub fn observations(data: &TwoStateData, order: &StreamOrder) -> Result<Vec<SectorObservation>> {
    if order.order.len() != data.n {
        return Err(Error::Validation(format!(
            "stream order covers {} sectors but the dataset has {}",
            order.order.len(),
            data.n
        )));
    }
    let mut out = Vec::with_capacity(data.n);
    for j in 0..data.n {
        let mut inputs: Vec<usize> = (0..data.n).filter(|&i| data.b.get(i + 1, j) > 0.0).collect();
        inputs.sort_by_key(|&i| order.position[i]);
        let mut a = vec![data.a.get(0, j)];
        let mut b = vec![data.b.get(0, j)];
        let mut p = vec![data.p0];
        for &i in &inputs {
            a.push(data.a.get(i + 1, j));
            b.push(data.b.get(i + 1, j));
            p.push(data.p[i]);
        }
        out.push(SectorObservation {
            id: data.ids[j].clone(),
            inputs,
            a,
            b,
            p,
            p_out: data.p[j],
        });
    }
    Ok(out)
}

/// Calibrate every sector (in parallel) and assemble the economy.
///
/// Returns the economy plus per-sector diagnostics in sector order. Sector
/// failures abort with the lowest-indexed failing sector's error so runs are
/// reproducible regardless of thread scheduling.
pub fn calibrate_economy(
    data: &TwoStateData,
    order: &StreamOrder,
) -> Result<(Economy, Vec<CalibrationDiagnostics>)> {
    let obs = observations(data, order)?;
    let results: Vec<_> = obs.par_iter().map(calibrate_sector).collect();
    let mut technologies = Vec::with_capacity(data.n);
    let mut diagnostics = Vec::with_capacity(data.n);
    for r in results {
        let cal = r?;
        technologies.push(cal.tech);
        diagnostics.push(cal.diagnostics);
    }
    Ok((
        Economy {
            n: data.n,
            ids: data.ids.clone(),
            technologies,
            p0: data.p0,
            p: data.p.clone(),
        },
        diagnostics,
    ))
}

/// One Jacobi sweep of the price map: `H_j(w, p0) / (theta_j z_j)`.
pub fn price_update(econ: &Economy, w: &[f64], z: &[f64]) -> Vec<f64> {
    econ.technologies
        .iter()
        .zip(z)
        .map(|(tech, &zj)| gross_dual(tech, w, econ.p0) / (tech.theta * zj))
        .collect()
}

/// Solve the shocked price fixed point.
///
/// `start` defaults to the observed current prices. Shocks must be >= 1:
/// that is the regime where the iteration is provably a monotone
/// contraction. Convergence is a sup-norm relative step below
/// [`tol::FIXED_POINT_TOL`]; the result is additionally verified by an
/// explicit residual check.
pub fn solve_equilibrium(econ: &Economy, z: &[f64], start: Option<&[f64]>) -> Result<Solution> {
    if z.len() != econ.n {
        return Err(Error::Validation(format!(
            "shock vector has length {}, expected {}",
            z.len(),
            econ.n
        )));
    }
    for (j, &zj) in z.iter().enumerate() {
        if !zj.is_finite() || zj < 1.0 {
            return Err(Error::Validation(format!(
                "shock for sector '{}' must be finite and >= 1, got {zj}",
                econ.ids[j]
            )));
        }
    }
    let mut w: Vec<f64> = match start {
        Some(s) => {
            if s.len() != econ.n {
                return Err(Error::Validation(format!(
                    "start vector has length {}, expected {}",
                    s.len(),
                    econ.n
                )));
            }
            s.to_vec()
        }
        None => econ.p.clone(),
    };
    let mut trace: Vec<f64> = Vec::new();
    let tail = |trace: &[f64]| trace.iter().rev().take(5).copied().collect::<Vec<_>>();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < tol::FIXED_POINT_MAX_ITER {
        iterations += 1;
        let next = price_update(econ, &w, z);
        // A diverging iteration overflows long before the sweep cap; treat
        // any non-finite or non-positive iterate as non-convergence rather
        // than letting NaNs poison the sup-norm test.
        if next.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            trace.push(f64::INFINITY);
            return Err(Error::NonConvergence {
                iterations,
                trace_tail: tail(&trace),
            });
        }
        let mut delta: f64 = 0.0;
        for j in 0..econ.n {
            delta = delta.max((next[j] - w[j]).abs() / w[j].abs().max(1e-300));
        }
        trace.push(delta);
        if delta < tol::FIXED_POINT_TOL {
            // The current iterate already maps to itself within tolerance;
            // keep it rather than stepping once more, so a warm start at an
            // equilibrium comes back untouched.
            converged = true;
            break;
        }
        w = next;
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            trace_tail: tail(&trace),
        });
    }
    // Independent residual check on the accepted prices.
    let check = price_update(econ, &w, z);
    let mut residual: f64 = 0.0;
    for j in 0..econ.n {
        residual = residual.max((check[j] - w[j]).abs() / w[j].abs().max(1e-300));
    }
    if residual > tol::EQUILIBRIUM_RESIDUAL_TOL {
        return Err(Error::NonConvergence {
            iterations,
            trace_tail: tail(&trace),
        });
    }
    Ok(Solution {
        prices: w,
        iterations,
        residual,
    })
}

/// Cost-share matrix implied by the calibrated technologies at arbitrary
/// prices, assembled in the [`TwoStateData`] layout.
pub fn coefficients(
    econ: &Economy,
    prices: &[f64],
    numeraire: f64,
    label: StateLabel,
) -> EquilibriumState {
    let n = econ.n;
    let mut shares = Mat::zeros(n + 1, n);
    for (j, tech) in econ.technologies.iter().enumerate() {
        let s = cost_shares(tech, prices, numeraire);
        shares.set(0, j, s[0]);
        for (k, nest) in tech.nests.iter().enumerate() {
            shares.set(nest.input + 1, j, s[k + 1]);
        }
    }
    EquilibriumState {
        label,
        prices: prices.to_vec(),
        numeraire,
        shares,
    }
}

/// One named replication check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationCheck {
    pub name: String,
    pub max_abs_residual: f64,
    pub worst_sector: String,
}

/// How faithfully the calibrated economy reproduces the two observed states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub checks: Vec<ReplicationCheck>,
}

impl ReplicationReport {
    pub fn max_residual(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.max_abs_residual)
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_residual() <= tolerance
    }
}

/// Verify that the calibrated technologies replicate both observed states:
/// unit costs hit the observed prices and the implied share matrices equal
/// the observed ones, in both the reference and the current state.
pub fn verify_replication(econ: &Economy, data: &TwoStateData) -> ReplicationReport {
    let n = econ.n;
    let ones = vec![1.0; n];
    let mut checks = Vec::new();

    // Productivity is normalized to 1 in the reference period; the
    // calibrated theta is the change realized by the current period.
    let mut price_check = |name: &str, w: &[f64], w0: f64, target: &[f64], use_theta: bool| {
        let mut worst = (0.0f64, 0usize);
        for (j, tech) in econ.technologies.iter().enumerate() {
            let theta = if use_theta { tech.theta } else { 1.0 };
            let c = gross_dual(tech, w, w0) / theta;
            let r = (c - target[j]).abs() / target[j].abs().max(1e-300);
            if r > worst.0 {
                worst = (r, j);
            }
        }
        checks.push(ReplicationCheck {
            name: name.into(),
            max_abs_residual: worst.0,
            worst_sector: econ.ids[worst.1].clone(),
        });
    };
    price_check("reference_unit_cost", &ones, 1.0, &ones, false);
    price_check("current_unit_cost", &econ.p, econ.p0, &econ.p, true);

    let mut share_check = |name: &str, state: &EquilibriumState, target: &Mat| {
        let mut worst = (0.0f64, 0usize);
        for j in 0..n {
            for r in 0..=n {
                let d = (state.shares.get(r, j) - target.get(r, j)).abs();
                if d > worst.0 {
                    worst = (d, j);
                }
            }
        }
        checks.push(ReplicationCheck {
            name: name.into(),
            max_abs_residual: worst.0,
            worst_sector: econ.ids[worst.1].clone(),
        });
    };
    let ref_state = coefficients(econ, &ones, 1.0, StateLabel::Reference);
    share_check("reference_shares", &ref_state, &data.a);
    let cur_state = coefficients(econ, &econ.p, econ.p0, StateLabel::Current);
    share_check("current_shares", &cur_state, &data.b);

    ReplicationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::Nest;
    use approx::assert_relative_eq;

    /// Hand-built two-sector economy with a cross-input cycle.
    fn toy_economy() -> Economy {
        Economy {
            n: 2,
            ids: vec!["a".into(), "b".into()],
            technologies: vec![
                SectorTechnology {
                    id: "a".into(),
                    nests: vec![Nest {
                        input: 1,
                        lambda: 0.4,
                        sigma: 0.5,
                    }],
                    theta: 0.9,
                },
                SectorTechnology {
                    id: "b".into(),
                    nests: vec![Nest {
                        input: 0,
                        lambda: 0.3,
                        sigma: 2.0,
                    }],
                    theta: 1.1,
                },
            ],
            p0: 1.0,
            p: vec![1.0, 1.0], // placeholder until solved below
        }
    }

    fn solved_toy() -> Economy {
        let mut econ = toy_economy();
        let sol = solve_equilibrium(&econ, &[1.0, 1.0], Some(&[1.0, 1.0])).unwrap();
        econ.p = sol.prices;
        econ
    }

    #[test]
    fn unshocked_solve_is_a_fixed_point() {
        let econ = solved_toy();
        let h = price_update(&econ, &econ.p, &[1.0, 1.0]);
        for j in 0..2 {
            assert_relative_eq!(h[j], econ.p[j], max_relative = 1e-11);
        }
        // Solving again from the solved prices must not drift beyond the
        // solver's own stopping tolerance.
        let sol = solve_equilibrium(&econ, &[1.0, 1.0], None).unwrap();
        for j in 0..2 {
            assert!((sol.prices[j] - econ.p[j]).abs() / econ.p[j] < 1e-11);
        }
    }

    #[test]
    fn self_loop_sector_matches_scalar_bisection() {
        // One sector consuming itself: the fixed point solves
        // (l x^(1-s) + (1-l) p0^(1-s))^(1/(1-s)) = theta z x, which a scalar
        // bisection can pin down independently.
        let (l, s, theta, z) = (0.25, 0.5, 0.9, 1.2);
        let econ = Economy {
            n: 1,
            ids: vec!["loop".into()],
            technologies: vec![SectorTechnology {
                id: "loop".into(),
                nests: vec![Nest {
                    input: 0,
                    lambda: l,
                    sigma: s,
                }],
                theta,
            }],
            p0: 1.0,
            p: vec![1.0],
        };
        let sol = solve_equilibrium(&econ, &[z], None).unwrap();

        let f = |x: f64| {
            (l * x.powf(1.0 - s) + (1.0 - l)).powf(1.0 / (1.0 - s)) - theta * z * x
        };
        let (mut lo, mut hi) = (1e-6, 10.0);
        assert!(f(lo) > 0.0 && f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_relative_eq!(sol.prices[0], 0.5 * (lo + hi), max_relative = 1e-10);
    }

    #[test]
    fn shocked_iteration_is_monotone_from_current_prices() {
        let econ = solved_toy();
        for z in [[1.05, 1.0], [1.0, 1.17], [1.2, 1.2]] {
            let mut w = econ.p.clone();
            for _ in 0..50 {
                let next = price_update(&econ, &w, &z);
                for j in 0..2 {
                    assert!(
                        next[j] <= w[j] * (1.0 + 1e-12),
                        "iterate increased under shock {z:?}"
                    );
                }
                w = next;
            }
            let sol = solve_equilibrium(&econ, &z, None).unwrap();
            for j in 0..2 {
                assert!(sol.prices[j] <= econ.p[j] * (1.0 + 1e-12));
                assert!(sol.prices[j] > 0.0);
            }
        }
    }

    #[test]
    fn shocks_below_one_are_rejected() {
        let econ = solved_toy();
        assert!(matches!(
            solve_equilibrium(&econ, &[0.99, 1.0], None),
            Err(Error::Validation(_))
        ));
        assert!(solve_equilibrium(&econ, &[1.0], None).is_err()); // wrong length
    }

    #[test]
    fn coefficient_columns_are_stochastic() {
        let econ = solved_toy();
        let st = coefficients(&econ, &econ.p, econ.p0, StateLabel::Current);
        for j in 0..2 {
            assert_relative_eq!(st.shares.col_sum(j), 1.0, max_relative = 1e-12);
        }
        let block = st.intermediate_block();
        assert_eq!(block.get(1, 0), st.shares.get(2, 0));
        assert_eq!(st.primary_row().len(), 2);
    }

    #[test]
    fn replication_on_constructed_data() {
        // Build the dataset the economy itself implies, then verify the
        // round trip is exact.
        let econ = solved_toy();
        let ref_state = coefficients(&econ, &[1.0, 1.0], 1.0, StateLabel::Reference);
        let cur_state = coefficients(&econ, &econ.p, econ.p0, StateLabel::Current);
        let data = TwoStateData {
            n: 2,
            ids: econ.ids.clone(),
            a: ref_state.shares.clone(),
            b: cur_state.shares.clone(),
            p: econ.p.clone(),
            p0: econ.p0,
            final_demand: vec![10.0, 20.0],
        };
        let report = verify_replication(&econ, &data);
        assert_eq!(report.checks.len(), 4);
        assert!(report.passes(1e-10), "max residual {}", report.max_residual());
    }

    #[test]
    fn nonconvergence_reports_trace_tail() {
        // theta z < feasibility: a self-loop sector with sigma > 1 and a
        // huge lambda has no fixed point when theta is tiny; the iteration
        // must give up rather than spin forever.
        let econ = Economy {
            n: 1,
            ids: vec!["x".into()],
            technologies: vec![SectorTechnology {
                id: "x".into(),
                nests: vec![Nest {
                    input: 0,
                    lambda: 0.9,
                    sigma: 0.0,
                }],
                theta: 0.5,
            }],
            p0: 1.0,
            p: vec![1.0],
        };
        // w <- (0.9 w + 0.1) / 0.5 diverges.
        let err = solve_equilibrium(&econ, &[1.0], None).unwrap_err();
        match err {
            Error::NonConvergence { trace_tail, .. } => assert!(!trace_tail.is_empty()),
            other => panic!("expected non-convergence, got {other}"),
        }
    }
}
