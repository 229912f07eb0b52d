//! Welfare accounting for productivity shocks, under the calibrated
//! technologies and under a no-substitution (fixed-proportions) baseline.
//!
//! Quantities are recovered from the nominal accounts through standard
//! Leontief algebra on cost-share matrices. With `B` the current
//! intermediate share block, `b0` the primary row, `f` nominal final
//! demand, and a projected state `(M, m0)` whose prices are `pi` *relative
//! to current prices*, the uniform final-demand scaling that keeps the
//! primary factor fully employed is
//!
//! ```text
//! delta* = b0 (I-B)^{-1} f  /  m0 (I-M)^{-1} <pi> f
//! ```
//!
//! The induced redistribution of primary income across final-demand
//! destinations is `delta_v = b0 (I-B)^{-1} <f> - m0 (I-M)^{-1} <pi> <f>
//! delta*` (it sums to zero by construction), and the aggregate real
//! final-demand change is `sum(f) (delta* - 1)`. Because both share
//! matrices are column-stochastic, `delta*` also equals
//! `sum(f) / sum(pi f)`; the solves are kept explicit and that identity is
//! used as a cross-check in the tests.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{EquilibriumState, StateLabel};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mat::Mat;

/// Which projected technology produced a welfare report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Calibrated cascaded-CES technologies.
    Cces,
    /// Fixed-proportions technologies pinned to the current state.
    Leontief,
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BaselineKind::Cces => "cces",
            BaselineKind::Leontief => "leontief",
        })
    }
}

/// Sectoral productivity shocks, multiplicative and >= 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockScenario {
    pub z: Vec<f64>,
}

impl ShockScenario {
    pub fn uniform(n: usize) -> Self {
        ShockScenario { z: vec![1.0; n] }
    }

    pub fn single(n: usize, sector: usize, z: f64) -> Self {
        let mut s = Self::uniform(n);
        s.z[sector] = z;
        s
    }
}

/// Full welfare accounts for one projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareReport {
    pub baseline: BaselineKind,
    /// Uniform real final-demand scaling consistent with full employment of
    /// the primary factor.
    pub delta_star: f64,
    /// Aggregate change in real final demand, in current currency.
    pub delta_f: f64,
    /// Redistribution of primary income across final-demand destinations;
    /// sums to zero.
    pub delta_v: Vec<f64>,
    /// Current gross outputs and primary (value-added) payments.
    pub gross_output_current: Vec<f64>,
    pub value_added_current: Vec<f64>,
    /// Projected gross outputs and primary payments after the shock.
    pub gross_output_projected: Vec<f64>,
    pub value_added_projected: Vec<f64>,
}

fn diag_scale(v: &[f64], w: &[f64]) -> Vec<f64> {
    v.iter().zip(w).map(|(a, b)| a * b).collect()
}

/// Welfare accounts comparing the current state against a projected one.
///
/// `pi_rel` must be the projected prices expressed relative to current
/// prices (so an unshocked projection has `pi_rel = 1` everywhere), and `f`
/// the current nominal final-demand column. The projected state's shares are
/// consumed as-is, so this works for any technology that produced them.
pub fn welfare(
    current: &EquilibriumState,
    projected: &EquilibriumState,
    pi_rel: &[f64],
    f: &[f64],
    baseline: BaselineKind,
) -> Result<WelfareReport> {
    let n = f.len();
    if current.prices.len() != n || projected.prices.len() != n || pi_rel.len() != n {
        return Err(Error::Validation(
            "welfare inputs disagree on the number of sectors".into(),
        ));
    }
    if f.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Validation(
            "final demand must be nonnegative and finite".into(),
        ));
    }
    let b = current.intermediate_block();
    let b0 = current.primary_row();
    let m = projected.intermediate_block();
    let m0 = projected.primary_row();
    linalg::require_neumann(&b, "current share block")?;
    linalg::require_neumann(&m, "projected share block")?;

    // Current accounts.
    let y_cur = linalg::solve_i_minus(&b, f, "current quantity system")?;
    let v_cur = diag_scale(&b0, &y_cur);

    // Row solves for the scaling and the redistribution profile.
    let q_b = linalg::solve_i_minus_transpose(&b, &b0, "current value system")?;
    let q_m = linalg::solve_i_minus_transpose(&m, &m0, "projected value system")?;
    let pif = diag_scale(pi_rel, f);
    let numer: f64 = q_b.iter().zip(f).map(|(q, fi)| q * fi).sum();
    let denom: f64 = q_m.iter().zip(&pif).map(|(q, g)| q * g).sum();
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::Singular(format!(
            "projected value of final demand is not positive ({denom})"
        )));
    }
    let delta_star = numer / denom;

    let delta_v: Vec<f64> = (0..n)
        .map(|j| q_b[j] * f[j] - q_m[j] * pif[j] * delta_star)
        .collect();
    let total_f: f64 = f.iter().sum();
    let delta_f = total_f * (delta_star - 1.0);

    // Projected accounts: scaled real demand at projected prices.
    let g: Vec<f64> = pif.iter().map(|v| v * delta_star).collect();
    let y_proj = linalg::solve_i_minus(&m, &g, "projected quantity system")?;
    let v_proj = diag_scale(&m0, &y_proj);

    Ok(WelfareReport {
        baseline,
        delta_star,
        delta_f,
        delta_v,
        gross_output_current: y_cur,
        value_added_current: v_cur,
        gross_output_projected: y_proj,
        value_added_projected: v_proj,
    })
}

/// Fixed-proportions projection of the current state under shocks `z`.
///
/// With physical coefficients pinned to the current shares, shocked prices
/// relative to current ones solve `rho (z I - B) = b0` and the projected
/// share matrix reweights the current one by those price ratios. Returns the
/// projected state (absolute prices, shares) plus its relative prices.
pub fn leontief_baseline(
    current: &EquilibriumState,
    z: &[f64],
) -> Result<(EquilibriumState, Vec<f64>)> {
    let n = current.prices.len();
    if z.len() != n {
        return Err(Error::Validation(format!(
            "shock vector has length {}, expected {n}",
            z.len()
        )));
    }
    for &zj in z {
        if !zj.is_finite() || zj < 1.0 {
            return Err(Error::Validation(format!(
                "shocks must be finite and >= 1, got {zj}"
            )));
        }
    }
    let b = current.intermediate_block();
    let b0 = current.primary_row();
    // rho (zI - B) = b0  <=>  (rho <z>) (I - <z>^{-1} B) = b0, so the block
    // is scaled by the supplying sector's shock.
    let mut b_scaled = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            b_scaled.set(i, j, b.get(i, j) / z[i]);
        }
    }
    linalg::require_neumann(&b_scaled, "no-substitution price system")?;
    let rho_scaled = linalg::solve_i_minus_transpose(&b_scaled, &b0, "no-substitution prices")?;
    let rho: Vec<f64> = rho_scaled.iter().zip(z).map(|(r, zj)| r / zj).collect();
    if rho.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::Singular(
            "no-substitution price ratios are not positive".into(),
        ));
    }

    let mut shares = Mat::zeros(n + 1, n);
    for j in 0..n {
        let scale = rho[j] * z[j];
        shares.set(0, j, b0[j] / scale);
        for i in 0..n {
            shares.set(i + 1, j, b.get(i, j) * rho[i] / scale);
        }
    }
    let prices: Vec<f64> = rho.iter().zip(&current.prices).map(|(r, p)| r * p).collect();
    Ok((
        EquilibriumState {
            label: StateLabel::Projected,
            prices,
            numeraire: current.numeraire,
            shares,
        },
        rho,
    ))
}

/// A sector's entry in the redistribution profile: the log of the absolute
/// primary-income shift, or `None` for an exactly zero shift (so plots can
/// flag it instead of taking log of zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub sector: usize,
    pub ln_abs: Option<f64>,
    pub sign: i8,
}

/// The redistribution profile `ln |delta_v|` arranged in stream order
/// (`order[k]` = sector at stream position k).
pub fn primary_redistribution_profile(delta_v: &[f64], order: &[usize]) -> Vec<ProfileEntry> {
    order
        .iter()
        .map(|&sector| {
            let v = delta_v[sector];
            ProfileEntry {
                sector,
                ln_abs: if v == 0.0 { None } else { Some(v.abs().ln()) },
                sign: if v > 0.0 {
                    1
                } else if v < 0.0 {
                    -1
                } else {
                    0
                },
            }
        })
        .collect()
}
