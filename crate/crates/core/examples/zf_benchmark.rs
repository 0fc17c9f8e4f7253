//! Average transmit power of the extended-region designs relative to
//! zero-forcing, over random channels with Nt = Nr.
//!
//! cargo run --release --example zf_benchmark

use dmqam::prelude::*;
use dmqam::sim::{gen_channel, trial_rng, zf_precoder, zf_signal};
use rand::Rng;

fn main() -> Result<()> {
    let channels = 200;
    let gamma = SymbolFrame::gamma_from_snr_db(10.0);
    let cfg = SolverConfig::default();
    println!(
        "{:>3} {:>3} {:>12} {:>12} {:>12}",
        "M", "N", "ZF", "DM total", "gain dB"
    );
    for m in [4, 16, 32] {
        for n in [2, 4, 6] {
            let (mut zf, mut dm) = (0.0, 0.0);
            for trial in 0..channels {
                let mut rng = trial_rng(n as u64, trial);
                let h = gen_channel(n, n, &mut rng)?;
                let symbols = (0..n).map(|_| rng.gen_range(0..m)).collect();
                let frame = SymbolFrame::new(m, symbols, DesignMode::Fixed, gamma)?;
                let x = zf_signal(&zf_precoder(&h)?, &frame)?;
                zf += x.iter().map(|c| c.norm_sqr()).sum::<f64>();
                dm += solve_total_power(&build_system(&frame, &h)?, &cfg)?.objective;
            }
            println!(
                "{m:>3} {n:>3} {:>12.3} {:>12.3} {:>12.2}",
                zf / channels as f64,
                dm / channels as f64,
                10.0 * (zf / dm).log10()
            );
        }
    }
    Ok(())
}
