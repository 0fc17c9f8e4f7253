//! Prints the four lattices with their Gray labels and region classes, then
//! the linear rows of one extended and one relaxed detection region.
//!
//! cargo run --example constellation_regions

use dmqam::prelude::*;
use num_complex::Complex64;

fn main() -> Result<()> {
    for m in [4, 8, 16, 32] {
        let spec = Constellation::new(m)?;
        println!("{m}-QAM ({} bits/symbol)", spec.bits_per_symbol());
        for i in 0..m {
            println!(
                "  {i:2}  {:>+3.0}{:+.0}j  {}  {:?}",
                spec.points()[i].re,
                spec.points()[i].im,
                spec.gray_bits(i)?,
                spec.classify(i)?
            );
        }
    }

    let spec = Constellation::new(16)?;
    let gamma = 10.0;
    let corner = spec.index_of(3, 3).expect("16-QAM corner");
    let inner = spec.index_of(1, 1).expect("16-QAM inner point");

    let show = |title: &str, rc: &RegionConstraints| {
        println!(
            "\n{title}: set {:?}, {} quarter turns",
            rc.set, rc.quarter_turns
        );
        let rows = rc
            .equalities
            .iter()
            .map(|r| (r, "="))
            .chain(rc.inequalities.iter().map(|r| (r, ">=")));
        for ((kind, row), rel) in rows {
            println!(
                "  {:<12} {:+.3}·Re + {:+.3}·Im {rel} {:.3}",
                format!("{kind:?}"),
                row.c_re,
                row.c_im,
                row.rhs
            );
        }
    };
    show(
        "extended region of the corner point",
        &extended_region(&spec, corner, gamma)?,
    );
    let relaxed = relaxed_region(&spec, inner, gamma, 0.5)?;
    show("relaxed region of an inner point (d0 = 0.5)", &relaxed);

    // membership of a few received samples
    let s = spec.points()[inner] * gamma.sqrt();
    for p in [
        s,
        s + Complex64::new(0.4, -0.4),
        s + Complex64::new(0.6, 0.0),
    ] {
        println!("  {p:.3} inside: {}", relaxed.contains(p, 1e-12));
    }
    Ok(())
}
