//! Runs one Monte Carlo scenario through the library API and prints the
//! per-point metrics: SER against the genie baseline, power and goodput.
//!
//! cargo run --release --example monte_carlo

use dmqam::prelude::*;
use dmqam::sim::{Benchmark, Design};

fn main() -> Result<()> {
    // one scenario per design; both share the same channel and noise draws
    let mut records = Vec::new();
    for (design, benchmark) in [
        (Design::Total, Benchmark::Zf),
        (Design::Peak, Benchmark::None),
    ] {
        let cfg = ScenarioConfig {
            trials: 40,
            frames: 25,
            seed: 2024,
            design,
            benchmark,
            ..ScenarioConfig::new("mc", 16, 4, 4, vec![4.0, 8.0, 12.0, 16.0])
        };
        records.extend(run_scenario(&cfg)?);
    }
    println!(
        "{:>5} {:>6} {:>10} {:>10} {:>9} {:>9} {:>9} {:>9}",
        "snr", "design", "power", "peak", "ser", "±ci", "genie", "goodput"
    );
    for r in &records {
        println!(
            "{:>5} {:>6} {:>10.2} {:>10.2} {:>9.5} {:>9.5} {:>9.5} {:>9.2e}",
            r.snr_db,
            r.design.to_string(),
            r.avg_total_power,
            r.avg_peak_power,
            r.ser,
            r.ci_ser,
            r.genie_ser,
            r.goodput
        );
    }
    Ok(())
}
