//! Draws the noiseless received samples of many designed frames on top of
//! the scaled constellation, showing how outer points spread outward into
//! their extended regions while inner points stay pinned or inside their
//! relaxed squares.
//!
//! cargo run --release --example constellation_svg -- [out.svg]

use dmqam::cli::plot::constellation_chart;
use dmqam::prelude::*;
use dmqam::sim::{gen_channel, trial_rng};
use num_complex::Complex64;
use rand::Rng;

fn main() -> Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "constellation.svg".into());
    let (m, n) = (16, 4);
    let gamma = SymbolFrame::gamma_from_snr_db(8.0);
    let spec = Constellation::new(m)?;
    let mut received = Vec::new();
    for trial in 0..150 {
        let mut rng = trial_rng(99, trial);
        let h = gen_channel(n, n, &mut rng)?;
        let symbols: Vec<usize> = (0..n).map(|_| rng.gen_range(0..m)).collect();
        let frame = SymbolFrame::new(m, symbols, DesignMode::Relaxed { d0: 0.5 }, gamma)?;
        let sol = solve_total_power(&build_system(&frame, &h)?, &SolverConfig::default())?;
        if !sol.is_optimal() {
            continue;
        }
        for r in 0..n {
            received.push((0..n).map(|k| h[(r, k)] * sol.w[k]).sum::<Complex64>());
        }
    }
    let lattice: Vec<Complex64> = spec.points().iter().map(|p| p * gamma.sqrt()).collect();
    let svg = constellation_chart(&lattice, &received, "16-QAM, relaxed d0 = 0.5, SNR 8 dB")?;
    std::fs::write(&out, svg)?;
    println!("{} samples drawn to {out}", received.len());
    Ok(())
}
