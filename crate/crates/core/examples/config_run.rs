//! Parses a scenario file and runs it the way the `dmqam run` command does,
//! writing the CSV, the SVG chart and the manifest to a directory.
//!
//! cargo run --release --example config_run -- [config] [out-dir]

use std::path::PathBuf;

use dmqam::cli::{parse_config, run_config_file, RunRequest};
use dmqam::Result;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let config_path =
        PathBuf::from(args.next().unwrap_or_else(|| {
            concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/quick.cfg").into()
        }));
    let out_dir = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("dmqam-config-run"));

    let scenarios = parse_config(&std::fs::read_to_string(&config_path)?)?;
    for s in &scenarios {
        println!(
            "{}: M={} nt={} nr={} snr={:?} d0={:?} designs={:?}",
            s.name, s.order, s.nt, s.nr, s.snr_db, s.d0, s.design
        );
    }

    let summary = run_config_file(&RunRequest {
        config_path,
        out_dir: out_dir.clone(),
        seed: None,
        parallel: false,
        trace_solver: false,
    })?;
    println!(
        "{} records, {} failed scenarios",
        summary.records.len(),
        summary.failures.len()
    );
    for entry in std::fs::read_dir(&out_dir)? {
        println!("  {}", entry?.path().display());
    }
    Ok(())
}
