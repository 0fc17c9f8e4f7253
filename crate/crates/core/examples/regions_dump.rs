//! Writes the region polygons of a constellation as CSV, the same table the
//! `dmqam regions dump` command produces.
//!
//! cargo run --example regions_dump -- [M] [gamma] [d0]

use dmqam::cli::regions_dump;
use dmqam::Result;

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let m = args.first().and_then(|s| s.parse().ok()).unwrap_or(8);
    let gamma = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(4.0);
    let d0 = args.get(2).and_then(|s| s.parse().ok());
    print!("{}", regions_dump(m, gamma, d0)?);
    Ok(())
}
