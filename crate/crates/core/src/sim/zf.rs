//! Zero-forcing benchmark: `W = Hᴴ(HHᴴ)⁻¹`, transmit `x = √γ·W·s`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::assembly::SymbolFrame;
use crate::{Error, Result};

/// Largest channel condition number accepted for inversion.
pub const MAX_CONDITION: f64 = 1e12;

/// Ratio of extreme singular values; infinite for a rank-deficient matrix.
pub fn condition_number(h: &DMatrix<Complex64>) -> f64 {
    let sv = h.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

pub fn zf_precoder(h: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let (nr, nt) = h.shape();
    if nr == 0 || nr > nt {
        return Err(Error::DimensionMismatch(format!(
            "zero forcing needs 1 <= Nr <= Nt, got {nr}x{nt}"
        )));
    }
    let cond = condition_number(h);
    if !(cond < MAX_CONDITION) {
        return Err(Error::RankDeficient(cond));
    }
    let hh = h.adjoint();
    let gram = h * &hh;
    let inv = gram.try_inverse().ok_or(Error::RankDeficient(cond))?;
    Ok(hh * inv)
}

/// `x = √γ·W·s` for the frame's symbols.
pub fn zf_signal(w: &DMatrix<Complex64>, frame: &SymbolFrame) -> Result<Vec<Complex64>> {
    if w.ncols() != frame.nr() {
        return Err(Error::DimensionMismatch(format!(
            "precoder has {} columns but the frame has {} symbols",
            w.ncols(),
            frame.nr()
        )));
    }
    let s = nalgebra::DVector::from_vec(frame.scaled_symbols());
    Ok((w * s).iter().cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::DesignMode;
    use crate::regions::extended_region;
    use crate::sim::channel::{gen_channel, trial_rng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_channel() {
        let h = DMatrix::<Complex64>::identity(3, 3);
        let w = zf_precoder(&h).unwrap();
        assert!((w - &h).camax() < 1e-15);
        let frame = SymbolFrame::new(16, vec![0, 5, 15], DesignMode::Fixed, 4.0).unwrap();
        let x = zf_signal(&h, &frame).unwrap();
        for (xi, si) in x.iter().zip(frame.scaled_symbols()) {
            assert_eq!(*xi, si);
        }
    }

    #[test]
    fn random_wide_channel_inverts() {
        let mut rng = trial_rng(1, 0);
        for _ in 0..50 {
            let h = gen_channel(2, 4, &mut rng).unwrap();
            let w = zf_precoder(&h).unwrap();
            let err = (&h * &w - DMatrix::identity(2, 2)).camax();
            assert!(err <= 1e-10, "{err}");
        }
    }

    #[test]
    fn rejects_tall_and_singular() {
        let tall = DMatrix::from_element(3, 2, c(1.0, 0.0));
        assert!(matches!(
            zf_precoder(&tall),
            Err(Error::DimensionMismatch(_))
        ));
        let singular =
            DMatrix::from_row_slice(2, 2, &[c(1.0, 1.0), c(2.0, 2.0), c(0.5, 0.5), c(1.0, 1.0)]);
        assert!(matches!(
            zf_precoder(&singular),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn induced_points_sit_in_extended_regions() {
        let mut rng = trial_rng(9, 0);
        for m in [4, 8, 16, 32] {
            let h = gen_channel(3, 5, &mut rng).unwrap();
            let w = zf_precoder(&h).unwrap();
            let frame =
                SymbolFrame::new(m, vec![0, m / 2, m - 1], DesignMode::Fixed, 10.0).unwrap();
            let x = zf_signal(&w, &frame).unwrap();
            let y = &h * nalgebra::DVector::from_vec(x.clone());
            for (n, &s) in frame.symbols.iter().enumerate() {
                let rc = extended_region(&frame.constellation, s, frame.gamma).unwrap();
                assert!(rc.contains(y[n], 1e-9));
            }
            // power scales linearly in γ
            let f2 = SymbolFrame {
                gamma: 40.0,
                ..frame.clone()
            };
            let x2 = zf_signal(&w, &f2).unwrap();
            let p = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
            assert!((p(&x2) / p(&x) - 4.0).abs() < 1e-12);
        }
    }
}
