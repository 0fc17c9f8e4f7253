//! Symbol-level directional-modulation precoding for M-QAM MIMO links.
//!
//! The transmitter redesigns its antenna weights `w` for every frame of `Nr`
//! symbols so that the noiseless received samples `H w` land inside the
//! detection region of each intended symbol. Outer constellation points get
//! *extended* regions (they may move away from the origin as long as the
//! standard minimum distance is kept); inner points of 16- and 32-QAM may
//! optionally be *relaxed* into a small square of half-width `d0`.
//!
//! The crate is organised bottom-up:
//!
//! - [`constellation`]: the four lattices (M = 4, 8, 16, 32), Gray labels,
//!   set classification and nearest-point detection.
//! - [`regions`]: per-symbol linear region constraints on the received sample.
//! - [`assembly`]: stacking of region constraints into the real-valued
//!   standard form `A w ≥ a`, `B w = b`.
//! - [`solver`]: a barrier path-following interior-point method for the
//!   total-power and spatial peak-power programs, plus an enumerating
//!   active-set oracle used for verification.
//! - [`sim`]: Monte Carlo link simulation with a zero-forcing benchmark.
//! - [`cli`]: configuration parsing, CSV/SVG output and batch dispatch used by
//!   the `dmqam` binary.
//!
//! ```
//! use dmqam::prelude::*;
//! use nalgebra::DMatrix;
//! use num_complex::Complex64;
//!
//! let h = DMatrix::from_row_slice(1, 1, &[Complex64::new(1.0, 0.0)]);
//! let frame = SymbolFrame::new(4, vec![0], DesignMode::Fixed, 1.0).unwrap();
//! let sys = build_system(&frame, &h).unwrap();
//! let sol = solve_total_power(&sys, &SolverConfig::tight()).unwrap();
//! assert!((sol.objective - 2.0).abs() < 1e-5);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod cli;
pub mod constellation;
pub mod error;
pub mod regions;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};

/// Commonly used items.
pub mod prelude {
    pub use crate::assembly::{build_system, realify, ConstraintSystem, DesignMode, SymbolFrame};
    pub use crate::constellation::{Constellation, SetLabel};
    pub use crate::regions::{extended_region, relaxed_region, RegionConstraints};
    pub use crate::sim::{run_scenario, MetricsRecord, ScenarioConfig};
    pub use crate::solver::{
        active_set_oracle, active_set_oracle_hinted, solve_peak_power, solve_total_power,
        ProblemKind, Solution, SolverConfig, Status, StepMode,
    };
    pub use crate::{Error, Result};
}
