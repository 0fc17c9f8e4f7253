//! Detection-region constraints for a single symbol.
//!
//! A region is a set of linear rows on the (possibly rotated) received
//! sample `p̃ = p · e^{iφ}`, where `p = h_nᵀ w` and `φ` is a multiple of
//! `π/2` that is non-zero only for the 32-QAM wedge sets. Inequalities are
//! kept in `c_re·Re(p̃) + c_im·Im(p̃) ≥ rhs` form.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::Serialize;

use crate::constellation::{to_first_quadrant, Constellation, SetLabel, S5_ANCHOR, S6_ANCHOR};
use crate::{Error, Result};

/// One linear row `c_re·Re(p̃) + c_im·Im(p̃)  (= or ≥)  rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearRow {
    pub c_re: f64,
    pub c_im: f64,
    pub rhs: f64,
}

impl LinearRow {
    pub const fn new(c_re: f64, c_im: f64, rhs: f64) -> Self {
        Self { c_re, c_im, rhs }
    }

    /// `c·p − rhs`.
    pub fn eval(&self, p: Complex64) -> f64 {
        self.c_re * p.re + self.c_im * p.im - self.rhs
    }
}

/// Which part of a region a row encodes. Used for row provenance in the
/// assembled system and for the block ordering of `A` and `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RowKind {
    /// `Re(s)·Re(p) ≥ √γ·Re²(s)`
    ReOutward,
    /// `Im(s)·Im(p) ≥ √γ·Im²(s)`
    ImOutward,
    /// `Re(p) = √γ·Re(s)`
    RePinned,
    /// `Im(p) = √γ·Im(s)`
    ImPinned,
    /// `Re(p) ≥ √γ·Re(s) − d0`
    BoxReLow,
    /// `Im(p) ≥ √γ·Im(s) − d0`
    BoxImLow,
    /// `−Re(p) ≥ −√γ·Re(s) − d0`
    BoxReHigh,
    /// `−Im(p) ≥ −√γ·Im(s) − d0`
    BoxImHigh,
    /// S5: `Re(p̃) − Im(p̃) ≥ 2√γ`
    WedgeS5Diagonal,
    /// S5: `Im(p̃) ≥ 3√γ`
    WedgeS5Floor,
    /// S6: `Im(p̃) − Re(p̃) ≥ 2√γ`
    WedgeS6Diagonal,
    /// S6: `Re(p̃) ≥ 3√γ`
    WedgeS6Floor,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionConstraints {
    pub set: SetLabel,
    /// Counter-clockwise quarter turns applied to `p` before evaluating rows,
    /// in `-1..=2`.
    pub quarter_turns: i32,
    pub equalities: Vec<(RowKind, LinearRow)>,
    pub inequalities: Vec<(RowKind, LinearRow)>,
}

impl RegionConstraints {
    /// Rotation phase `φ` in radians.
    pub fn rotation_phi(&self) -> f64 {
        self.quarter_turns as f64 * FRAC_PI_2
    }

    /// Maps a received sample into the frame the rows are written in.
    pub fn to_region_frame(&self, p: Complex64) -> Complex64 {
        rotate_quarter(p, self.quarter_turns)
    }

    /// Membership test: equalities within `tol`, inequalities within `-tol`.
    pub fn contains(&self, p: Complex64, tol: f64) -> bool {
        let q = self.to_region_frame(p);
        self.equalities.iter().all(|(_, r)| r.eval(q).abs() <= tol)
            && self.inequalities.iter().all(|(_, r)| r.eval(q) >= -tol)
    }

    /// Clips the region to the square `[-bound, bound]²` and returns the
    /// vertices in the unrotated received plane. Equality rows collapse the
    /// polygon to a segment or a point.
    pub fn polygon(&self, bound: f64) -> Vec<Complex64> {
        let mut poly = vec![
            Complex64::new(-bound, -bound),
            Complex64::new(bound, -bound),
            Complex64::new(bound, bound),
            Complex64::new(-bound, bound),
        ];
        let mut half_planes: Vec<LinearRow> = self.inequalities.iter().map(|(_, r)| *r).collect();
        for (_, r) in &self.equalities {
            half_planes.push(*r);
            half_planes.push(LinearRow::new(-r.c_re, -r.c_im, -r.rhs));
        }
        // The box is rotation invariant, so clipping in the region frame is fine.
        for hp in half_planes {
            poly = clip(&poly, &hp);
            if poly.is_empty() {
                break;
            }
        }
        poly.into_iter()
            .map(|q| rotate_quarter(q, -self.quarter_turns))
            .collect()
    }
}

/// Multiplies `p` by `i^k` exactly.
pub fn rotate_quarter(p: Complex64, k: i32) -> Complex64 {
    match k.rem_euclid(4) {
        0 => p,
        1 => Complex64::new(-p.im, p.re),
        2 => Complex64::new(-p.re, -p.im),
        _ => Complex64::new(p.im, -p.re),
    }
}

fn check_gamma(gamma: f64) -> Result<f64> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(gamma.sqrt())
    } else {
        Err(Error::InvalidArgument(format!(
            "gamma must be positive and finite, got {gamma}"
        )))
    }
}

fn normalize_turns(k: i32) -> i32 {
    let k = k.rem_euclid(4);
    if k == 3 {
        -1
    } else {
        k
    }
}

/// Extended detection region of point `index` at amplification `gamma`.
pub fn extended_region(
    spec: &Constellation,
    index: usize,
    gamma: f64,
) -> Result<RegionConstraints> {
    let g = check_gamma(gamma)?;
    let set = spec.classify(index)?;
    let s = spec.point(index)?;
    let (sr, si) = (s.re, s.im);
    let mut rc = RegionConstraints {
        set,
        quarter_turns: 0,
        equalities: Vec::new(),
        inequalities: Vec::new(),
    };
    let re_out = (RowKind::ReOutward, LinearRow::new(sr, 0.0, g * sr * sr));
    let im_out = (RowKind::ImOutward, LinearRow::new(0.0, si, g * si * si));
    let re_pin = (RowKind::RePinned, LinearRow::new(1.0, 0.0, g * sr));
    let im_pin = (RowKind::ImPinned, LinearRow::new(0.0, 1.0, g * si));
    match set {
        SetLabel::S1 => rc.inequalities.extend([re_out, im_out]),
        SetLabel::S2 => {
            rc.equalities.push(re_pin);
            rc.inequalities.push(im_out);
        }
        SetLabel::S3 => {
            rc.inequalities.push(re_out);
            rc.equalities.push(im_pin);
        }
        SetLabel::S4 => rc.equalities.extend([re_pin, im_pin]),
        SetLabel::S5 | SetLabel::S6 => {
            let (x, y) = spec.lattice()[index];
            let (k, q) = to_first_quadrant(x, y);
            let anchor = if set == SetLabel::S5 {
                S5_ANCHOR
            } else {
                S6_ANCHOR
            };
            debug_assert_eq!(q, anchor);
            rc.quarter_turns = normalize_turns(k);
            if set == SetLabel::S5 {
                rc.inequalities.extend([
                    (RowKind::WedgeS5Diagonal, LinearRow::new(1.0, -1.0, 2.0 * g)),
                    (RowKind::WedgeS5Floor, LinearRow::new(0.0, 1.0, 3.0 * g)),
                ]);
            } else {
                rc.inequalities.extend([
                    (RowKind::WedgeS6Diagonal, LinearRow::new(-1.0, 1.0, 2.0 * g)),
                    (RowKind::WedgeS6Floor, LinearRow::new(1.0, 0.0, 3.0 * g)),
                ]);
            }
        }
    }
    Ok(rc)
}

/// Relaxed square region of half-width `d0` around an inner point.
///
/// `d0 = 0` degenerates to the two pinning equalities of the fixed design.
pub fn relaxed_region(
    spec: &Constellation,
    index: usize,
    gamma: f64,
    d0: f64,
) -> Result<RegionConstraints> {
    let g = check_gamma(gamma)?;
    let set = spec.classify(index)?;
    if set != SetLabel::S4 {
        return Err(Error::NotInnerPoint(format!(
            "{} of {}-QAM is {set}",
            spec.point(index)?,
            spec.order()
        )));
    }
    if !(d0 >= 0.0) || !d0.is_finite() {
        return Err(Error::InvalidArgument(format!("d0 must be >= 0, got {d0}")));
    }
    if d0 >= g {
        return Err(Error::InvalidArgument(format!(
            "d0 = {d0} must stay below sqrt(gamma) = {g}"
        )));
    }
    if d0 == 0.0 {
        return extended_region(spec, index, gamma);
    }
    let s = spec.point(index)?;
    let (cr, ci) = (g * s.re, g * s.im);
    Ok(RegionConstraints {
        set,
        quarter_turns: 0,
        equalities: Vec::new(),
        inequalities: vec![
            (RowKind::BoxReLow, LinearRow::new(1.0, 0.0, cr - d0)),
            (RowKind::BoxImLow, LinearRow::new(0.0, 1.0, ci - d0)),
            (RowKind::BoxReHigh, LinearRow::new(-1.0, 0.0, -cr - d0)),
            (RowKind::BoxImHigh, LinearRow::new(0.0, -1.0, -ci - d0)),
        ],
    })
}

/// Free-function form of [`RegionConstraints::contains`].
pub fn contains(rc: &RegionConstraints, p: Complex64, tol: f64) -> bool {
    rc.contains(p, tol)
}

// Sutherland-Hodgman against the half-plane `hp.eval(p) >= 0`.
fn clip(poly: &[Complex64], hp: &LinearRow) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let cur = poly[i];
        let prev = poly[(i + poly.len() - 1) % poly.len()];
        let (fc, fp) = (hp.eval(cur), hp.eval(prev));
        if fc >= 0.0 {
            if fp < 0.0 {
                out.push(prev + (cur - prev) * (fp / (fp - fc)));
            }
            out.push(cur);
        } else if fp >= 0.0 {
            out.push(prev + (cur - prev) * (fp / (fp - fc)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::SUPPORTED_ORDERS;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rows(v: &[(RowKind, LinearRow)]) -> Vec<LinearRow> {
        v.iter().map(|(_, r)| *r).collect()
    }

    #[test]
    fn qam4_first_quadrant() {
        let spec = Constellation::new(4).unwrap();
        let rc = extended_region(&spec, spec.index_of(1, 1).unwrap(), 1.0).unwrap();
        assert!(rc.equalities.is_empty());
        assert_eq!(
            rows(&rc.inequalities),
            vec![LinearRow::new(1.0, 0.0, 1.0), LinearRow::new(0.0, 1.0, 1.0)]
        );
        assert!(rc.contains(c(1.0, 1.0), 1e-12));
        assert!(!rc.contains(c(0.9, 1.0), 1e-12));
    }

    #[test]
    fn qam4_third_quadrant_sign_handling() {
        let spec = Constellation::new(4).unwrap();
        let rc = extended_region(&spec, spec.index_of(-1, -1).unwrap(), 4.0).unwrap();
        assert_eq!(
            rows(&rc.inequalities),
            vec![
                LinearRow::new(-1.0, 0.0, 2.0),
                LinearRow::new(0.0, -1.0, 2.0)
            ]
        );
    }

    #[test]
    fn qam32_wedge_anchor() {
        let spec = Constellation::new(32).unwrap();
        let rc = extended_region(&spec, spec.index_of(5, 3).unwrap(), 1.0).unwrap();
        assert_eq!(rc.rotation_phi(), 0.0);
        let mut r = rows(&rc.inequalities);
        r.sort_by(|a, b| a.rhs.partial_cmp(&b.rhs).unwrap());
        assert_eq!(
            r,
            vec![
                LinearRow::new(1.0, -1.0, 2.0),
                LinearRow::new(0.0, 1.0, 3.0)
            ]
        );
        assert!(rc.contains(c(4.0 + 1.0, 3.0), 1e-12));
        assert!(rc.contains(c(5.0, 3.0), 1e-12));
        assert!(rc.contains(c(6.0, 3.5), 1e-12));
        assert!(!rc.contains(c(4.0, 3.5), 1e-12));
    }

    #[test]
    fn direct_wedge_evaluation() {
        // Im ≥ 3 and Re − Im ≥ 2 at γ = 1
        let spec = Constellation::new(32).unwrap();
        let rc = extended_region(&spec, spec.index_of(5, 3).unwrap(), 1.0).unwrap();
        let inside = |p: Complex64| p.im >= 3.0 && p.re - p.im >= 2.0;
        assert_eq!(rc.contains(c(4.0, 3.0), 0.0), inside(c(4.0, 3.0)));
        assert!(!inside(c(4.0, 3.0)));
        assert_eq!(rc.contains(c(4.0, 3.5), 0.0), inside(c(4.0, 3.5)));
    }

    #[test]
    fn qam32_rotated_wedge() {
        let spec = Constellation::new(32).unwrap();
        let i = spec.index_of(-3, 5).unwrap();
        let rc = extended_region(&spec, i, 1.0).unwrap();
        assert_eq!(rc.set, SetLabel::S5);
        assert!((rc.rotation_phi() + FRAC_PI_2).abs() < 1e-15);
        let anchor = extended_region(&spec, spec.index_of(5, 3).unwrap(), 1.0).unwrap();
        assert_eq!(rows(&rc.inequalities), rows(&anchor.inequalities));
        // the rotated region is the first-quadrant wedge turned by +90°
        for re in -8..=8 {
            for im in -8..=8 {
                let p = c(re as f64 * 0.75, im as f64 * 0.75);
                let turned_back = rotate_quarter(p, -1);
                assert_eq!(rc.contains(p, 0.0), anchor.contains(turned_back, 0.0));
            }
        }
    }

    #[test]
    fn rotation_phase_matches_argument_difference() {
        let spec = Constellation::new(32).unwrap();
        for i in 0..32 {
            let rc = extended_region(&spec, i, 1.0).unwrap();
            let s = spec.points()[i];
            let anchor = match rc.set {
                SetLabel::S5 => c(5.0, 3.0),
                SetLabel::S6 => c(3.0, 5.0),
                _ => {
                    assert_eq!(rc.quarter_turns, 0);
                    continue;
                }
            };
            let mut diff = anchor.arg() - s.arg();
            while diff <= -std::f64::consts::PI {
                diff += 2.0 * std::f64::consts::PI;
            }
            while diff > std::f64::consts::PI {
                diff -= 2.0 * std::f64::consts::PI;
            }
            assert!((diff - rc.rotation_phi()).abs() < 1e-12, "{s}");
            assert_eq!(rc.to_region_frame(s), anchor);
        }
    }

    #[test]
    fn relaxed_examples() {
        let spec = Constellation::new(16).unwrap();
        let i = spec.index_of(1, 1).unwrap();
        let rc0 = relaxed_region(&spec, i, 1.0, 0.0).unwrap();
        assert_eq!(rc0.equalities.len(), 2);
        assert!(rc0.inequalities.is_empty());
        let rc = relaxed_region(&spec, i, 4.0, 0.5).unwrap();
        assert_eq!(
            rows(&rc.inequalities),
            vec![
                LinearRow::new(1.0, 0.0, 1.5),
                LinearRow::new(0.0, 1.0, 1.5),
                LinearRow::new(-1.0, 0.0, -2.5),
                LinearRow::new(0.0, -1.0, -2.5),
            ]
        );
        let s32 = Constellation::new(32).unwrap();
        let j = s32.index_of(-3, -1).unwrap();
        let rc = relaxed_region(&s32, j, 1.0, 0.1).unwrap();
        let in_box = |p: Complex64| (-3.1..=-2.9).contains(&p.re) && (-1.1..=-0.9).contains(&p.im);
        for a in 0..=40 {
            for b in 0..=40 {
                let p = c(-3.2 + a as f64 * 0.01, -1.2 + b as f64 * 0.01);
                let margin = (p.re + 3.1)
                    .abs()
                    .min((p.re + 2.9).abs())
                    .min((p.im + 1.1).abs())
                    .min((p.im + 0.9).abs());
                if margin > 1e-9 {
                    assert_eq!(rc.contains(p, 0.0), in_box(p), "{p}");
                }
            }
        }
    }

    #[test]
    fn relaxed_errors() {
        let spec = Constellation::new(16).unwrap();
        let outer = spec.index_of(3, 3).unwrap();
        assert!(matches!(
            relaxed_region(&spec, outer, 1.0, 0.5),
            Err(Error::NotInnerPoint(_))
        ));
        let inner = spec.index_of(1, 1).unwrap();
        assert!(relaxed_region(&spec, inner, 1.0, -0.1).is_err());
        assert!(relaxed_region(&spec, inner, 1.0, 1.0).is_err());
        assert!(extended_region(&spec, inner, 0.0).is_err());
        assert!(extended_region(&spec, inner, -1.0).is_err());
    }

    #[test]
    fn row_counts_per_set() {
        for m in SUPPORTED_ORDERS {
            let spec = Constellation::new(m).unwrap();
            for i in 0..m {
                let rc = extended_region(&spec, i, 2.0).unwrap();
                let counts = (rc.equalities.len(), rc.inequalities.len());
                let expect = match rc.set {
                    SetLabel::S1 | SetLabel::S5 | SetLabel::S6 => (0, 2),
                    SetLabel::S2 | SetLabel::S3 => (1, 1),
                    SetLabel::S4 => (2, 0),
                };
                assert_eq!(counts, expect);
                if rc.set == SetLabel::S4 {
                    let r = relaxed_region(&spec, i, 2.0, 0.3).unwrap();
                    assert_eq!((r.equalities.len(), r.inequalities.len()), (0, 4));
                }
            }
        }
    }

    #[test]
    fn fixed_region_is_a_single_point() {
        let spec = Constellation::new(16).unwrap();
        let g: f64 = 9.0;
        let i = spec.index_of(-1, 1).unwrap();
        let rc = extended_region(&spec, i, g).unwrap();
        for (j, p) in spec.points().iter().enumerate() {
            assert_eq!(rc.contains(p * g.sqrt(), 1e-12), i == j);
        }
    }

    #[test]
    fn anchors_and_rhs_scaling() {
        for m in SUPPORTED_ORDERS {
            let spec = Constellation::new(m).unwrap();
            for i in 0..m {
                for g in [1.0f64, 10.0, 100.0] {
                    let rc = extended_region(&spec, i, g).unwrap();
                    assert!(rc.contains(spec.points()[i] * g.sqrt(), 1e-9));
                    let base = extended_region(&spec, i, 1.0).unwrap();
                    for ((_, a), (_, b)) in rc.inequalities.iter().zip(&base.inequalities) {
                        assert!((a.rhs - g.sqrt() * b.rhs).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn polygon_clipping() {
        let spec = Constellation::new(32).unwrap();
        let rc = extended_region(&spec, spec.index_of(5, 3).unwrap(), 1.0).unwrap();
        let poly = rc.polygon(10.0);
        assert!(poly.len() >= 3);
        for p in &poly {
            assert!(rc.contains(*p, 1e-9));
        }
        let rc4 = extended_region(&spec, spec.index_of(1, 1).unwrap(), 1.0).unwrap();
        let pt = rc4.polygon(10.0);
        assert!(pt.iter().all(|p| (p - c(1.0, 1.0)).norm() < 1e-9));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn relaxed_boxes_nest(d0 in 0.0f64..0.9, extra in 0.0f64..0.09, re in -4.0f64..4.0, im in -4.0f64..4.0) {
                let spec = Constellation::new(16).unwrap();
                let i = spec.index_of(-1, 1).unwrap();
                let small = relaxed_region(&spec, i, 1.0, d0).unwrap();
                let large = relaxed_region(&spec, i, 1.0, d0 + extra).unwrap();
                let p = Complex64::new(re, im);
                if small.contains(p, 0.0) {
                    prop_assert!(large.contains(p, 0.0));
                }
            }

            #[test]
            fn rotation_consistency(k in 0usize..32, re in -10.0f64..10.0, im in -10.0f64..10.0) {
                let spec = Constellation::new(32).unwrap();
                let rc = extended_region(&spec, k, 1.0).unwrap();
                if matches!(rc.set, SetLabel::S5 | SetLabel::S6) {
                    let anchor = if rc.set == SetLabel::S5 { (5, 3) } else { (3, 5) };
                    let q1 = extended_region(&spec, spec.index_of(anchor.0, anchor.1).unwrap(), 1.0).unwrap();
                    let p = Complex64::new(re, im);
                    let phi = rc.rotation_phi();
                    let turned = p * Complex64::from_polar(1.0, phi);
                    let near_edge = q1.inequalities.iter().any(|(_, r)| r.eval(turned).abs() < 1e-9);
                    if !near_edge {
                        prop_assert_eq!(rc.contains(p, 0.0), q1.contains(turned, 0.0));
                    }
                }
            }
        }
    }
}
