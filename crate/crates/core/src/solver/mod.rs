//! Interior-point path-following solver for the total-power QP and the
//! spatial peak-power min–max program, plus an enumerating active-set oracle.
//!
//! Both programs share one barrier machinery (see [`barrier`]): a phase-I
//! search for a strictly feasible start, a least-squares estimate of the
//! initial barrier weight, then centering by equality-constrained Newton
//! steps with backtracking, multiplying `t` by `μ` until the barrier gap
//! `count/t` drops below `eps1`.

pub mod barrier;
mod ipm;
pub mod linalg;
mod oracle;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use ipm::{
    backtrack, init_params, kkt_residual, newton_decrement, newton_direction, outer_loop, phase1,
    solve_peak_power, solve_total_power, KktResiduals, NewtonStep, Phase1Outcome,
};
pub use oracle::{active_set_oracle, active_set_oracle_hinted, dykstra_min_norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProblemKind {
    /// `min ‖w‖²`
    TotalPower,
    /// `min max_k |w_k|²` in epigraph form.
    PeakPower,
}

/// How a Newton direction is turned into an update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepMode {
    /// One step length on the joint direction `(Δw, Δz)`.
    JointNewton,
    /// `Δw` and `Δz` are normalized separately before the line search.
    BlockNormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Barrier weight multiplier.
    pub mu: f64,
    /// Outer tolerance on the barrier gap `count/t`.
    pub eps1: f64,
    /// Centering tolerance on the Newton decrement.
    pub eps2: f64,
    /// Initial Hessian regularization.
    pub eps0: f64,
    pub bt_alpha: f64,
    pub bt_beta: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub step_mode: StepMode,
    /// Record one [`TraceRow`] per Newton step.
    pub trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mu: 5.0,
            eps1: 6e-2,
            eps2: 6e-2,
            eps0: 0.0,
            bt_alpha: 0.01,
            bt_beta: 0.5,
            max_outer: 100,
            max_inner: 200,
            step_mode: StepMode::JointNewton,
            trace: false,
        }
    }
}

impl SolverConfig {
    /// Tight tolerances used for verification runs.
    pub fn tight() -> Self {
        Self {
            mu: 10.0,
            eps1: 1e-6,
            eps2: 1e-6,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("solver config: {what}")));
        if !(self.mu > 1.0) {
            return bad("mu must exceed 1");
        }
        if !(self.eps1 > 0.0) || !(self.eps2 > 0.0) {
            return bad("eps1 and eps2 must be positive");
        }
        if !(self.eps0 >= 0.0) {
            return bad("eps0 must be non-negative");
        }
        if !(self.bt_alpha > 0.0 && self.bt_alpha < 0.5) {
            return bad("bt_alpha must lie in (0, 0.5)");
        }
        if !(self.bt_beta > 0.0 && self.bt_beta < 1.0) {
            return bad("bt_beta must lie in (0, 1)");
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return bad("iteration caps must be positive");
        }
        Ok(())
    }
}

/// One Newton step of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub phase: &'static str,
    pub outer: usize,
    pub inner: usize,
    pub t: f64,
    pub kappa: f64,
    pub objective: f64,
    pub min_slack: f64,
    pub alpha: f64,
}

/// Tab-separated rendering of a trace, with a header line.
pub fn trace_to_tsv(rows: &[TraceRow]) -> String {
    let mut out = String::from("phase\touter\tinner\tt\tkappa\tobjective\tmin_slack\talpha\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{:.6e}\t{:.6e}\t{:.12e}\t{:.6e}\t{:.6e}\n",
            r.phase, r.outer, r.inner, r.t, r.kappa, r.objective, r.min_slack, r.alpha
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub kind: ProblemKind,
    pub status: Status,
    pub w: Vec<Complex64>,
    /// `w̃ = [Re(w); Im(w)]`.
    pub x: DVector<f64>,
    /// Epigraph variable; `max_k |w_k|²` for either kind.
    pub z: f64,
    pub objective: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub kkt_stationarity: f64,
    pub kkt_feasibility: f64,
    pub kkt_complementarity: f64,
    /// Multipliers of `A w̃ ≥ a` (non-negative).
    pub nu: DVector<f64>,
    /// Multipliers of `B w̃ = b`.
    pub lambda: DVector<f64>,
    /// Multipliers of `|w_k|² ≤ z` (peak kind only).
    pub rho: DVector<f64>,
    /// Final barrier weight (infinite for oracle solutions).
    pub t: f64,
    pub trace: Vec<TraceRow>,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn total_power(&self) -> f64 {
        self.x.norm_squared()
    }

    pub fn peak_power(&self) -> f64 {
        peak_of(&self.x)
    }
}

pub(crate) fn peak_of(x: &DVector<f64>) -> f64 {
    let nt = x.len() / 2;
    (0..nt)
        .map(|k| x[k] * x[k] + x[nt + k] * x[nt + k])
        .fold(0.0, f64::max)
}
