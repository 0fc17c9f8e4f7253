//! Random channel and noise draws.
//!
//! Every trial owns one ChaCha8 substream: the scenario seed picks the key,
//! the trial index picks the stream, so trial `i` sees the same draws no
//! matter which thread runs it or in which order.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// RNG substream for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// One `CN(0, σ²)` draw.
fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, sigma2: f64) -> Complex64 {
    let s = (0.5 * sigma2).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// `Nr × Nt` Rayleigh channel with i.i.d. `CN(0, 1)` entries.
pub fn gen_channel<R: Rng + ?Sized>(
    nr: usize,
    nt: usize,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    if nr == 0 || nt == 0 {
        return Err(Error::InvalidArgument(format!(
            "channel dimensions must be positive, got {nr}x{nt}"
        )));
    }
    // row-major draw order, independent of nalgebra's storage layout
    let mut h = DMatrix::zeros(nr, nt);
    for i in 0..nr {
        for j in 0..nt {
            h[(i, j)] = complex_gaussian(rng, 1.0);
        }
    }
    Ok(h)
}

/// `Nr` i.i.d. `CN(0, σ²)` noise samples.
pub fn gen_noise<R: Rng + ?Sized>(
    nr: usize,
    sigma2: f64,
    rng: &mut R,
) -> Result<DVector<Complex64>> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be positive and finite, got {sigma2}"
        )));
    }
    Ok(DVector::from_fn(nr, |_, _| complex_gaussian(rng, sigma2)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_moments() {
        let mut rng = trial_rng(7, 0);
        let n = 100_000;
        let h = gen_channel(1, n, &mut rng).unwrap();
        let mean: Complex64 = h.iter().sum::<Complex64>() / n as f64;
        let var = h.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
        // per-part std of the mean is sqrt(0.5/n)
        let bound = 5.0 * (0.5 / n as f64).sqrt();
        assert!(mean.re.abs() < bound && mean.im.abs() < bound, "{mean}");
        assert!((var - 1.0).abs() < 0.02, "{var}");
        let re_var = h.iter().map(|v| v.re * v.re).sum::<f64>() / n as f64;
        assert!((re_var - 0.5).abs() < 0.01, "{re_var}");
    }

    #[test]
    fn noise_moments_and_independence() {
        let mut rng = trial_rng(11, 3);
        let n = 100_000;
        let sigma2 = 2.5;
        let mut var = [0.0; 2];
        let mut cross = Complex64::new(0.0, 0.0);
        for _ in 0..n {
            let w = gen_noise(2, sigma2, &mut rng).unwrap();
            var[0] += w[0].norm_sqr();
            var[1] += w[1].norm_sqr();
            cross += w[0] * w[1].conj();
        }
        for v in var {
            assert!((v / n as f64 / sigma2 - 1.0).abs() < 0.02);
        }
        let corr = cross.norm() / n as f64 / sigma2;
        assert!(corr <= 3.0 / (n as f64).sqrt(), "{corr}");
    }

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let a = gen_channel(2, 3, &mut trial_rng(5, 1)).unwrap();
        let b = gen_channel(2, 3, &mut trial_rng(5, 1)).unwrap();
        let c = gen_channel(2, 3, &mut trial_rng(5, 2)).unwrap();
        let d = gen_channel(2, 3, &mut trial_rng(6, 1)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = trial_rng(0, 0);
        assert!(gen_noise(2, 0.0, &mut rng).is_err());
        assert!(gen_noise(2, f64::NAN, &mut rng).is_err());
        assert!(gen_channel(0, 2, &mut rng).is_err());
    }
}
