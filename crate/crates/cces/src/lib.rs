//! Cascaded-CES production networks: calibration, counterfactuals, and
//! network diagnostics for input–output data.
//!
//! The crate implements a pipeline for economies in which each sector
//! combines a primary factor and intermediate inputs through a cascade of
//! nested CES aggregators, one nest per input, ordered by the economy's
//! processing sequence:
//!
//! 1. [`ingest`] — read linked input–output tables and deflators, average
//!    them into two observed states, and extract share columns and relative
//!    prices.
//! 2. [`stream`] — order sectors by weighted connectivity ratios so that
//!    deliveries flow mostly forward, and measure how linear the resulting
//!    incidence is.
//! 3. [`cascade`] — calibrate each sector's nest weights, elasticities, and
//!    productivity from the two states, exactly reproducing both.
//! 4. [`equilibrium`] — solve for equilibrium prices under productivity
//!    shocks by fixed-point iteration on the unit-cost map.
//! 5. [`propagation`] — translate projected prices into factor-requirement
//!    and welfare changes, against either the calibrated technology or a
//!    fixed-proportions baseline.
//! 6. [`network`] — net-multiplier distances and hierarchical clustering of
//!    sectors.
//! 7. [`synth`] — generators for synthetic economies with known ground
//!    truth, used heavily by the test suite.
//!
//! Numeric conventions shared across modules (tolerances, iteration caps,
//! search windows) live in [`tol`].

pub mod cascade;
pub mod equilibrium;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod mat;
pub mod network;
pub mod propagation;
pub mod stream;
pub mod synth;
pub mod tol;

pub use cascade::{CalibratedSector, CalibrationDiagnostics, Nest, SectorObservation, SectorTechnology};
pub use equilibrium::{Economy, EquilibriumState, ReplicationReport, Solution, StateLabel};
pub use error::{Error, Result};
pub use ingest::{IncidenceMatrix, LinkedTables, MergedStates, TwoStateData};
pub use mat::Mat;
pub use network::{Dendrogram, Linkage};
pub use propagation::{BaselineKind, ShockScenario, WelfareReport};
pub use stream::StreamOrder;
pub use synth::{GeneratorConfig, SyntheticEconomy};
