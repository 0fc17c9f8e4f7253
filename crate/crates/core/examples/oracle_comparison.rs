//! Compares the interior-point solver with the active-set oracle over a
//! batch of random frames for every order, mode and program.
//!
//! cargo run --release --example oracle_comparison -- [instances-per-case]

use dmqam::prelude::*;
use dmqam::sim::{gen_channel, trial_rng};
use rand::Rng;

fn main() -> Result<()> {
    let per_case: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(25);
    let cfg = SolverConfig::tight();
    println!(
        "{:>3} {:>8} {:>6} {:>10} {:>10} {:>10}",
        "M", "mode", "kind", "worst rel", "mean rel", "stat"
    );
    for m in [4, 8, 16, 32] {
        let modes: &[DesignMode] = if m >= 16 {
            &[DesignMode::Fixed, DesignMode::Relaxed { d0: 0.3 }]
        } else {
            &[DesignMode::Fixed]
        };
        for &mode in modes {
            for kind in [ProblemKind::TotalPower, ProblemKind::PeakPower] {
                let (mut worst, mut sum, mut stat) = (0.0f64, 0.0, 0.0f64);
                for trial in 0..per_case {
                    let mut rng = trial_rng(m as u64, trial);
                    let nt = rng.gen_range(2..=5);
                    let nr = rng.gen_range(1..=nt.min(3));
                    let h = gen_channel(nr, nt, &mut rng)?;
                    let symbols = (0..nr).map(|_| rng.gen_range(0..m)).collect();
                    let frame = SymbolFrame::new(m, symbols, mode, 10.0)?;
                    let sys = build_system(&frame, &h)?;
                    let sol = match kind {
                        ProblemKind::TotalPower => solve_total_power(&sys, &cfg)?,
                        ProblemKind::PeakPower => solve_peak_power(&sys, &cfg)?,
                    };
                    let oracle = active_set_oracle_hinted(&sys, kind, &sol)?;
                    let rel = (sol.objective - oracle.objective).abs()
                        / oracle.objective.abs().max(1e-12);
                    worst = worst.max(rel);
                    sum += rel;
                    stat = stat.max(sol.kkt_stationarity);
                }
                let mode = match mode {
                    DesignMode::Fixed => "fixed",
                    DesignMode::Relaxed { .. } => "relaxed",
                };
                let kind = match kind {
                    ProblemKind::TotalPower => "total",
                    ProblemKind::PeakPower => "peak",
                };
                println!(
                    "{m:>3} {mode:>8} {kind:>6} {worst:>10.2e} {:>10.2e} {stat:>10.2e}",
                    sum / per_case as f64
                );
            }
        }
    }
    Ok(())
}
