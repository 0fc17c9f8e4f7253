//! Solves the spatial peak-power program with the solver trace enabled and
//! prints the barrier path, once per step mode.
//!
//! cargo run --example peak_power_trace

use dmqam::prelude::*;
use dmqam::sim::{gen_channel, trial_rng};
use dmqam::solver::trace_to_tsv;
use rand::Rng;

fn main() -> Result<()> {
    let (m, nt, nr) = (32, 5, 3);
    let mut rng = trial_rng(3, 0);
    let h = gen_channel(nr, nt, &mut rng)?;
    let symbols: Vec<usize> = (0..nr).map(|_| rng.gen_range(0..m)).collect();
    let frame = SymbolFrame::new(
        m,
        symbols,
        DesignMode::Fixed,
        SymbolFrame::gamma_from_snr_db(15.0),
    )?;
    let sys = build_system(&frame, &h)?;

    for mode in [StepMode::JointNewton, StepMode::BlockNormalized] {
        let cfg = SolverConfig {
            trace: true,
            step_mode: mode,
            ..SolverConfig::tight()
        };
        let sol = solve_peak_power(&sys, &cfg)?;
        println!("== {mode:?}: {:?}, z = {:.6}", sol.status, sol.z);
        let per_antenna: Vec<String> = sol
            .w
            .iter()
            .map(|w| format!("{:.3}", w.norm_sqr()))
            .collect();
        println!("|w_k|^2 = [{}]", per_antenna.join(", "));
        println!(
            "{} outer / {} inner iterations; last rows of the trace:",
            sol.outer_iters, sol.inner_iters
        );
        let tsv = trace_to_tsv(&sol.trace);
        let lines: Vec<&str> = tsv.lines().collect();
        println!("{}", lines[0]);
        for line in &lines[lines.len().saturating_sub(8).max(1)..] {
            println!("{line}");
        }
        println!();
    }

    let total = solve_total_power(&sys, &SolverConfig::tight())?;
    println!(
        "the total-power design on the same frame peaks at {:.6}",
        total.peak_power()
    );
    Ok(())
}
