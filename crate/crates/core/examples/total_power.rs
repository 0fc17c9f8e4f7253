//! Designs one frame with the total-power program and checks the result
//! against the enumerating oracle and the zero-forcing benchmark.
//!
//! cargo run --example total_power -- [seed]

use dmqam::prelude::*;
use dmqam::sim::{gen_channel, trial_rng, zf_precoder, zf_signal};
use rand::Rng;

fn main() -> Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let (m, nt, nr, snr_db) = (16, 4, 4, 10.0);
    let mut rng = trial_rng(seed, 0);
    let h = gen_channel(nr, nt, &mut rng)?;
    let symbols: Vec<usize> = (0..nr).map(|_| rng.gen_range(0..m)).collect();
    let gamma = SymbolFrame::gamma_from_snr_db(snr_db);
    let frame = SymbolFrame::new(m, symbols.clone(), DesignMode::Fixed, gamma)?;
    let sys = build_system(&frame, &h)?;
    println!(
        "symbols {symbols:?}: {} inequalities, {} equalities",
        sys.r_a(),
        sys.r_b()
    );

    let sol = solve_total_power(&sys, &SolverConfig::tight())?;
    println!(
        "interior point: {:?}, power {:.6}, {} outer / {} inner iterations",
        sol.status, sol.objective, sol.outer_iters, sol.inner_iters
    );
    println!(
        "  KKT stationarity {:.1e}, feasibility {:.1e}",
        sol.kkt_stationarity, sol.kkt_feasibility
    );

    let oracle = active_set_oracle(&sys, ProblemKind::TotalPower)?;
    println!(
        "oracle: power {:.6} (relative difference {:.1e})",
        oracle.objective,
        (sol.objective - oracle.objective).abs() / oracle.objective
    );

    let x = zf_signal(&zf_precoder(&h)?, &frame)?;
    let zf_power: f64 = x.iter().map(|c| c.norm_sqr()).sum();
    println!(
        "zero-forcing: power {zf_power:.6} ({:.2} dB above)",
        10.0 * (zf_power / sol.objective).log10()
    );

    // the noiseless received samples land in their detection regions
    let spec = Constellation::new(m)?;
    for (n, &s) in symbols.iter().enumerate() {
        let y: num_complex::Complex64 = (0..nt).map(|k| h[(n, k)] * sol.w[k]).sum();
        println!(
            "  antenna {n}: sent {s:2}, received {y:.3}, detected {}",
            spec.detect(y, gamma)?
        );
    }
    Ok(())
}
