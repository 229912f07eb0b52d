//! Numeric policy for the whole pipeline.
//!
//! Every tolerance that decides a branch, a convergence exit, or a
//! validation failure lives here with a note on why that magnitude. Keeping
//! them in one place makes the accuracy contract auditable and keeps tests
//! and library code pinned to the same numbers.

/// Below this distance from 1, an elasticity is treated as exactly 1 and the
/// Cobb-Douglas limit of the CES aggregator is used. The CES formulas lose
/// roughly half their significant digits as `|1 - sigma|` shrinks (the
/// exponent `1/(1-sigma)` blows up), and 1e-9 is where the closed-form limit
/// is already more accurate than the general branch in f64.
pub const SIGMA_ONE_EPS: f64 = 1e-9;

/// `|ln(W/p)|` below this cannot identify an elasticity from the share
/// relation (the regressor is numerically zero); calibration falls back to
/// sigma = 1 and records a diagnostic instead of failing.
pub const DEGENERATE_LOG_EPS: f64 = 1e-12;

/// Cost-share columns must sum to 1 within this bound before calibration
/// will accept them. Ingestion renormalizes exactly, so anything beyond
/// rounding noise indicates corrupted input.
pub const SHARE_SUM_TOL: f64 = 1e-8;

/// Relative balance slack allowed in raw linked tables (row totals vs
/// column totals). Published tables carry rounding of this order.
pub const BALANCE_TOL_DEFAULT: f64 = 1e-6;

/// Fixed-point iteration stops when the largest relative price change in a
/// sweep falls below this.
pub const FIXED_POINT_TOL: f64 = 1e-12;

/// Hard cap on fixed-point sweeps before reporting non-convergence.
pub const FIXED_POINT_MAX_ITER: usize = 10_000;

/// After the fixed point exits, the residual `|w - H(w)/(theta z)|`
/// (relative, sup-norm) must be below this or the solve is rejected.
pub const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-10;

/// Productivity root search: initial bracket for theta, expanded
/// geometrically up to [`ROOT_T_MIN`], [`ROOT_T_MAX`] when the residual has
/// no sign change inside. Productivity ratios live near 1 in practice.
pub const ROOT_WINDOW_LO: f64 = 0.25;
pub const ROOT_WINDOW_HI: f64 = 4.0;
pub const ROOT_T_MIN: f64 = 1e-3;
pub const ROOT_T_MAX: f64 = 1e3;

/// Bisection iteration cap for the productivity root. 200 halvings exceed
/// f64 resolution on any bracket by a wide margin; the loop exits earlier on
/// the width test.
pub const ROOT_MAX_ITER: usize = 200;

/// Spectral-radius safety margin: Neumann-based solves require the iteration
/// matrix to have spectral radius strictly below 1; the power-iteration
/// estimate must stay below this.
pub const SPECTRAL_RADIUS_MAX: f64 = 1.0 - 1e-10;

/// Power-iteration sweeps used for the spectral-radius estimate.
pub const POWER_ITERATIONS: usize = 200;

/// Hard cap on the number of sectors. Dense n x n linear algebra and the
/// all-pairs distance matrix stay comfortably interactive below this.
pub const MAX_SECTORS: usize = 2_000;
