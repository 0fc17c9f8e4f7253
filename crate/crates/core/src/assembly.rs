//! Real-valued standard form of the per-frame design constraints.
//!
//! With `w̃ = [Re(w); Im(w)]` and a channel row `h`, the received sample
//! satisfies `Re(hᵀw) = [Re(h), −Im(h)]·w̃` and `Im(hᵀw) = [Im(h), Re(h)]·w̃`,
//! so every region row becomes one row of `A w̃ ≥ a` or `B w̃ = b`.
//!
//! Rows are grouped in blocks by set and constraint kind, with receive
//! antennas in increasing order inside each block:
//!
//! ```text
//! A: S1 Re, S1 Im, S2 Im, S3 Re, [S4 Re-low, Im-low, Re-high, Im-high],
//!    S5 diagonal, S5 floor, S6 diagonal, S6 floor
//! B: S2 Re, S3 Im, [S4 Re, S4 Im]
//! ```
//!
//! The bracketed S4 blocks appear in `A` for the relaxed design and in `B`
//! for the fixed design.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, SetLabel};
use crate::regions::{extended_region, relaxed_region, rotate_quarter, LinearRow, RowKind};
use crate::{Error, Result};

/// Placement rule for inner (`S4`) points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DesignMode {
    /// Inner points are pinned to their scaled lattice position.
    Fixed,
    /// Inner points may move inside a square of half-width `d0`.
    Relaxed { d0: f64 },
}

impl DesignMode {
    pub fn d0(&self) -> f64 {
        match self {
            DesignMode::Fixed => 0.0,
            DesignMode::Relaxed { d0 } => *d0,
        }
    }
}

/// The symbols of one frame, one per receive antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub constellation: Constellation,
    pub symbols: Vec<usize>,
    pub mode: DesignMode,
    pub gamma: f64,
}

impl SymbolFrame {
    pub fn new(order: usize, symbols: Vec<usize>, mode: DesignMode, gamma: f64) -> Result<Self> {
        Self::with_constellation(Constellation::new(order)?, symbols, mode, gamma)
    }

    pub fn with_constellation(
        constellation: Constellation,
        symbols: Vec<usize>,
        mode: DesignMode,
        gamma: f64,
    ) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gamma must be positive and finite, got {gamma}"
            )));
        }
        for &s in &symbols {
            if s >= constellation.order() {
                return Err(Error::IndexOutOfRange {
                    index: s,
                    order: constellation.order(),
                });
            }
        }
        if let DesignMode::Relaxed { d0 } = mode {
            if !constellation.has_inner_points() {
                return Err(Error::RelaxedUnsupported(constellation.order()));
            }
            if !(d0 >= 0.0) || !d0.is_finite() {
                return Err(Error::InvalidArgument(format!("d0 must be >= 0, got {d0}")));
            }
        }
        Ok(Self {
            constellation,
            symbols,
            mode,
            gamma,
        })
    }

    /// Required amplification from an SNR in dB: `γ = 10^(SNR/10)`.
    pub fn gamma_from_snr_db(snr_db: f64) -> f64 {
        10f64.powf(snr_db / 10.0)
    }

    pub fn nr(&self) -> usize {
        self.symbols.len()
    }

    /// The `√γ`-scaled target points.
    pub fn scaled_symbols(&self) -> Vec<Complex64> {
        let g = self.gamma.sqrt();
        self.symbols
            .iter()
            .map(|&s| self.constellation.points()[s] * g)
            .collect()
    }
}

/// Provenance of one row of `A` or `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RowTag {
    /// Receive antenna (position in the frame).
    pub symbol: usize,
    pub set: SetLabel,
    pub kind: RowKind,
}

/// `A w̃ ≥ a`, `B w̃ = b` over `w̃ ∈ R^{2 Nt}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    pub a_mat: DMatrix<f64>,
    pub a_vec: DVector<f64>,
    pub b_mat: DMatrix<f64>,
    pub b_vec: DVector<f64>,
    pub nt: usize,
    pub ineq_tags: Vec<RowTag>,
    pub eq_tags: Vec<RowTag>,
}

impl ConstraintSystem {
    /// Builds a system directly from matrices, without provenance tags.
    pub fn from_parts(
        a_mat: DMatrix<f64>,
        a_vec: DVector<f64>,
        b_mat: DMatrix<f64>,
        b_vec: DVector<f64>,
    ) -> Result<Self> {
        let n = a_mat.ncols().max(b_mat.ncols());
        if !n.is_multiple_of(2) {
            return Err(Error::DimensionMismatch(format!(
                "column count {n} is not 2·Nt"
            )));
        }
        let a_mat = if a_mat.nrows() == 0 {
            DMatrix::zeros(0, n)
        } else {
            a_mat
        };
        let b_mat = if b_mat.nrows() == 0 {
            DMatrix::zeros(0, n)
        } else {
            b_mat
        };
        if a_mat.ncols() != n || b_mat.ncols() != n {
            return Err(Error::DimensionMismatch(
                "A and B column counts differ".into(),
            ));
        }
        if a_mat.nrows() != a_vec.len() || b_mat.nrows() != b_vec.len() {
            return Err(Error::DimensionMismatch("row/rhs length mismatch".into()));
        }
        Ok(Self {
            a_mat,
            a_vec,
            b_mat,
            b_vec,
            nt: n / 2,
            ineq_tags: Vec::new(),
            eq_tags: Vec::new(),
        })
    }

    /// Number of real unknowns, `2 Nt`.
    pub fn n(&self) -> usize {
        2 * self.nt
    }

    pub fn r_a(&self) -> usize {
        self.a_mat.nrows()
    }

    pub fn r_b(&self) -> usize {
        self.b_mat.nrows()
    }

    /// Numerical rank of `B`.
    pub fn equality_rank(&self) -> usize {
        if self.r_b() == 0 {
            return 0;
        }
        let svd = self.b_mat.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let tol = smax * 1e-12 * self.r_b().max(self.n()) as f64;
        svd.singular_values.iter().filter(|&&s| s > tol).count()
    }

    pub fn has_full_row_rank(&self) -> bool {
        self.equality_rank() == self.r_b()
    }

    /// `A w̃ − a`.
    pub fn slacks(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a_mat * x - &self.a_vec
    }

    /// `B w̃ − b`.
    pub fn eq_residual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.b_mat * x - &self.b_vec
    }

    /// Largest violation of `A w̃ ≥ a` and `B w̃ = b` (zero when feasible).
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let ineq = self.slacks(x).iter().fold(0.0f64, |m, &s| m.max(-s));
        let eq = self.eq_residual(x).amax();
        ineq.max(eq)
    }

    pub fn is_feasible(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.slacks(x).iter().all(|&s| s >= -tol) && self.eq_residual(x).amax() <= tol
    }
}

/// `w̃ = [Re(w); Im(w)]`.
pub fn to_real(w: &[Complex64]) -> DVector<f64> {
    let nt = w.len();
    DVector::from_fn(2 * nt, |i, _| if i < nt { w[i].re } else { w[i - nt].im })
}

/// Inverse of [`to_real`].
pub fn to_complex(x: &DVector<f64>) -> Vec<Complex64> {
    let nt = x.len() / 2;
    (0..nt).map(|k| Complex64::new(x[k], x[nt + k])).collect()
}

/// Splits a complex `r × Nt` matrix into `Ha = [Re H, −Im H]` and
/// `Hb = [Im H, Re H]`, so that `Ha w̃ = Re(H w)` and `Hb w̃ = Im(H w)`.
pub fn realify(h: &DMatrix<Complex64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (r, nt) = h.shape();
    let ha = DMatrix::from_fn(r, 2 * nt, |i, j| {
        if j < nt {
            h[(i, j)].re
        } else {
            -h[(i, j - nt)].im
        }
    });
    let hb = DMatrix::from_fn(r, 2 * nt, |i, j| {
        if j < nt {
            h[(i, j)].im
        } else {
            h[(i, j - nt)].re
        }
    });
    (ha, hb)
}

/// `hᵀ e^{iφ}` for `φ` a multiple of `π/2`.
pub fn rotate_row(h: &RowDVector<Complex64>, phi: f64) -> Result<RowDVector<Complex64>> {
    let k = (phi / FRAC_PI_2).round();
    if (phi - k * FRAC_PI_2).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "rotation {phi} is not a multiple of pi/2"
        )));
    }
    Ok(h.map(|v| rotate_quarter(v, k as i32)))
}

fn ineq_block(set: SetLabel, kind: RowKind) -> usize {
    match (set, kind) {
        (SetLabel::S1, RowKind::ReOutward) => 0,
        (SetLabel::S1, _) => 1,
        (SetLabel::S2, _) => 2,
        (SetLabel::S3, _) => 3,
        (_, RowKind::BoxReLow) => 4,
        (_, RowKind::BoxImLow) => 5,
        (_, RowKind::BoxReHigh) => 6,
        (_, RowKind::BoxImHigh) => 7,
        (_, RowKind::WedgeS5Diagonal) => 8,
        (_, RowKind::WedgeS5Floor) => 9,
        (_, RowKind::WedgeS6Diagonal) => 10,
        _ => 11,
    }
}

fn eq_block(set: SetLabel, kind: RowKind) -> usize {
    match (set, kind) {
        (SetLabel::S2, _) => 0,
        (SetLabel::S3, _) => 1,
        (_, RowKind::RePinned) => 2,
        _ => 3,
    }
}

/// Stacks the region constraints of every symbol in `frame` against the
/// channel rows of `h` (`Nr × Nt`).
pub fn build_system(frame: &SymbolFrame, h: &DMatrix<Complex64>) -> Result<ConstraintSystem> {
    let (nr, nt) = h.shape();
    if nr != frame.nr() {
        return Err(Error::DimensionMismatch(format!(
            "frame has {} symbols but the channel has {nr} rows",
            frame.nr()
        )));
    }
    if nt == 0 {
        return Err(Error::DimensionMismatch("channel has no columns".into()));
    }
    if let DesignMode::Relaxed { .. } = frame.mode {
        if !frame.constellation.has_inner_points() {
            return Err(Error::RelaxedUnsupported(frame.constellation.order()));
        }
    }
    let spec = &frame.constellation;
    let mut ineq: Vec<(usize, RowTag, RowDVector<f64>, f64)> = Vec::new();
    let mut eq: Vec<(usize, RowTag, RowDVector<f64>, f64)> = Vec::new();

    for (n, &sym) in frame.symbols.iter().enumerate() {
        let set = spec.classify(sym)?;
        let rc = match (frame.mode, set) {
            (DesignMode::Relaxed { d0 }, SetLabel::S4) => {
                relaxed_region(spec, sym, frame.gamma, d0)?
            }
            _ => extended_region(spec, sym, frame.gamma)?,
        };
        let h_row = h.row(n).clone_owned();
        let rotated = h_row.map(|v| rotate_quarter(v, rc.quarter_turns));
        let (ha, hb) = realify(&DMatrix::from_row_slice(1, nt, rotated.as_slice()));
        let to_row = |r: &LinearRow| -> RowDVector<f64> {
            (ha.row(0) * r.c_re + hb.row(0) * r.c_im).clone_owned()
        };
        for (kind, r) in &rc.inequalities {
            let tag = RowTag {
                symbol: n,
                set,
                kind: *kind,
            };
            ineq.push((ineq_block(set, *kind), tag, to_row(r), r.rhs));
        }
        for (kind, r) in &rc.equalities {
            let tag = RowTag {
                symbol: n,
                set,
                kind: *kind,
            };
            eq.push((eq_block(set, *kind), tag, to_row(r), r.rhs));
        }
    }
    ineq.sort_by_key(|(block, tag, _, _)| (*block, tag.symbol));
    eq.sort_by_key(|(block, tag, _, _)| (*block, tag.symbol));

    let stack = |rows: &[(usize, RowTag, RowDVector<f64>, f64)]| {
        let mat = DMatrix::from_fn(rows.len(), 2 * nt, |i, j| rows[i].2[j]);
        let rhs = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.3));
        let tags = rows.iter().map(|r| r.1).collect::<Vec<_>>();
        (mat, rhs, tags)
    };
    let (a_mat, a_vec, ineq_tags) = stack(&ineq);
    let (b_mat, b_vec, eq_tags) = stack(&eq);
    let sys = ConstraintSystem {
        a_mat,
        a_vec,
        b_mat,
        b_vec,
        nt,
        ineq_tags,
        eq_tags,
    };
    if sys
        .a_mat
        .iter()
        .chain(sys.b_mat.iter())
        .any(|v| !v.is_finite())
        || sys
            .a_vec
            .iter()
            .chain(sys.b_vec.iter())
            .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidArgument(
            "channel contains non-finite entries".into(),
        ));
    }
    Ok(sys)
}
