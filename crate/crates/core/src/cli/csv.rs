//! CSV tables of [`MetricsRecord`]s.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::sim::MetricsRecord;
use crate::{Error, Result};

pub const HEADER: &str = "scenario,key,M,nt,nr,snr_db,d0,design,avg_total_power,avg_peak_power,ser,ber,goodput,ci_ser,infeasible_count";

/// Twelve significant digits in scientific notation.
fn num(x: f64) -> String {
    format!("{x:.11e}")
}

/// One data line, without the terminator.
pub fn csv_row(r: &MetricsRecord) -> String {
    [
        r.scenario.clone(),
        r.key.clone(),
        r.order.to_string(),
        r.nt.to_string(),
        r.nr.to_string(),
        num(r.snr_db),
        num(r.d0),
        r.design.to_string(),
        num(r.avg_total_power),
        num(r.avg_peak_power),
        num(r.ser),
        num(r.ber),
        num(r.goodput),
        num(r.ci_ser),
        r.infeasible_count.to_string(),
    ]
    .join(",")
}

pub fn to_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

pub fn emit_csv(records: &[MetricsRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to write".into()));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(to_csv(records).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Precoder;

    fn record() -> MetricsRecord {
        MetricsRecord {
            scenario: "s".into(),
            key: "s/snr=10/d0=0/total".into(),
            order: 16,
            nt: 4,
            nr: 2,
            snr_db: 10.0,
            d0: 0.0,
            design: Precoder::Total,
            avg_total_power: std::f64::consts::PI * 1e3,
            avg_peak_power: 1.0 / 3.0,
            ser: 0.0123,
            ber: 0.004,
            goodput: 4.0 * (1.0 - 0.0123) / (std::f64::consts::PI * 1e3),
            ci_ser: 1e-3,
            infeasible_count: 2,
            frames: 10,
            symbols: 20,
            genie_ser: 0.0,
            genie_ci: 0.0,
        }
    }

    #[test]
    fn one_record_two_lines() {
        let text = to_csv(&[record()]);
        assert_eq!(text.matches('\n').count(), 2);
        assert!(!text.contains('\r'));
        for line in text.lines() {
            assert_eq!(line.split(',').count(), 15);
        }
    }

    #[test]
    fn round_trip_at_twelve_digits() {
        let r = record();
        let text = to_csv(std::slice::from_ref(&r));
        let cols: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        let back: f64 = cols[8].parse().unwrap();
        assert_eq!(
            format!("{back:.11e}"),
            format!("{:.11e}", r.avg_total_power)
        );
        assert!(((back - r.avg_total_power) / r.avg_total_power).abs() < 5e-12);
        let g: f64 = cols[12].parse().unwrap();
        let ser: f64 = cols[10].parse().unwrap();
        let p: f64 = cols[8].parse().unwrap();
        assert!((g - 4.0 * (1.0 - ser) / p).abs() <= 1e-11 * g);
    }

    #[test]
    fn empty_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_csv(&[], &dir.path().join("x.csv")).is_err());
    }
}
