//! Simulation and analysis of the steering-based four-state preparation.
//!
//! A bipartite source is shared between two boxes. Measuring the first box
//! with one of two binary measurements steers the second box into one of
//! four labeled conditional states. This crate computes those states
//! exactly, checks that the choice of measurement cannot be seen in the
//! second box, and certifies that four pure steered states always span a
//! space of dimension at most two.
//!
//! Modules, bottom up:
//!
//! - [`numerics`]: dense complex matrices, partial trace, rank, eigen and
//!   singular spectra.
//! - [`quantum`]: validated states and two-outcome measurements, plus the
//!   Bell state, BB84 bases and noise models.
//! - [`protocol`]: the preparation procedure itself.
//! - [`analysis`]: no-signaling residual, span reconstruction, rank and
//!   unambiguous-discrimination verdicts.
//! - [`harness`]: scenario files, reports and parameter sweeps.

pub mod analysis;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod protocol;
pub mod quantum;

pub use analysis::{analyze, DimensionReport, Tolerances};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use numerics::{ComplexMatrix, RankResult};
pub use protocol::{run_preparation, BranchLabel, PreparationScenario, SteeredEnsemble};
pub use quantum::{DensityOperator, PureState, TwoOutcomeMeasurement};
