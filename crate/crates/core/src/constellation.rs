//! M-QAM constellations on the odd-integer lattice.
//!
//! Points sit at odd integer coordinates, so lattice neighbours are exactly
//! 2 apart. Every point is assigned to one of the sets `S1..S6`, which decide
//! the shape of its detection region (see [`crate::regions`]).

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Region set of a constellation point.
///
/// - `S1`: corner-like point, free to move outward in both directions.
/// - `S2`: real part pinned between columns, imaginary part free outward.
/// - `S3`: imaginary part pinned between rows, real part free outward.
/// - `S4`: inner point with all four lattice neighbours.
/// - `S5`, `S6`: 32-QAM concave-corner points (rotations of `5+3i` and `3+5i`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SetLabel {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
}

impl fmt::Display for SetLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SetLabel::S1 => "S1",
            SetLabel::S2 => "S2",
            SetLabel::S3 => "S3",
            SetLabel::S4 => "S4",
            SetLabel::S5 => "S5",
            SetLabel::S6 => "S6",
        };
        f.write_str(s)
    }
}

pub const SUPPORTED_ORDERS: [usize; 4] = [4, 8, 16, 32];

/// Wedge anchor of the `S5` set.
pub const S5_ANCHOR: (i32, i32) = (5, 3);
/// Wedge anchor of the `S6` set.
pub const S6_ANCHOR: (i32, i32) = (3, 5);

/// Cross 32-QAM admits no labelling in which every pair of lattice
/// neighbours differs in one bit. This table keeps 50 of the 52 neighbour
/// pairs at Hamming distance 1; the pairs (±3, 1)-(±3, 3) differ in 3 bits.
const QAM32_LABELS: [((i32, i32), u32); 32] = [
    ((-3, 5), 0b11111),
    ((-1, 5), 0b01111),
    ((1, 5), 0b00111),
    ((3, 5), 0b10111),
    ((-5, 3), 0b11001),
    ((-3, 3), 0b11011),
    ((-1, 3), 0b01011),
    ((1, 3), 0b00011),
    ((3, 3), 0b10011),
    ((5, 3), 0b10001),
    ((-5, 1), 0b01001),
    ((-3, 1), 0b01000),
    ((-1, 1), 0b01010),
    ((1, 1), 0b00010),
    ((3, 1), 0b00000),
    ((5, 1), 0b00001),
    ((-5, -1), 0b01101),
    ((-3, -1), 0b01100),
    ((-1, -1), 0b01110),
    ((1, -1), 0b00110),
    ((3, -1), 0b00100),
    ((5, -1), 0b00101),
    ((-5, -3), 0b11101),
    ((-3, -3), 0b11100),
    ((-1, -3), 0b11110),
    ((1, -3), 0b10110),
    ((3, -3), 0b10100),
    ((5, -3), 0b10101),
    ((-3, -5), 0b11000),
    ((-1, -5), 0b11010),
    ((1, -5), 0b10010),
    ((3, -5), 0b10000),
];

/// An M-QAM constellation with Gray labels and set classification.
///
/// Immutable once built; cheap to clone and safe to share between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    lattice: Vec<(i32, i32)>,
    points: Vec<Complex64>,
    labels: Vec<u32>,
    sets: Vec<SetLabel>,
}

impl Constellation {
    /// Builds the constellation of the given order (4, 8, 16 or 32).
    ///
    /// Points are ordered row-major: imaginary part descending, then real
    /// part ascending.
    pub fn new(order: usize) -> Result<Self> {
        let lattice = lattice_points(order)?;
        let points = lattice
            .iter()
            .map(|&(re, im)| Complex64::new(re as f64, im as f64))
            .collect();
        let labels = gray_labels(order, &lattice);
        let sets = (0..lattice.len())
            .map(|i| classify_point(&lattice, i))
            .collect();
        Ok(Self {
            order,
            lattice,
            points,
            labels,
            sets,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.order.trailing_zeros()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn lattice(&self) -> &[(i32, i32)] {
        &self.lattice
    }

    pub fn point(&self, index: usize) -> Result<Complex64> {
        self.check(index)?;
        Ok(self.points[index])
    }

    /// Index of the point at integer lattice coordinates, if present.
    pub fn index_of(&self, re: i32, im: i32) -> Option<usize> {
        self.lattice.iter().position(|&p| p == (re, im))
    }

    /// Set label of the point at `index`.
    pub fn classify(&self, index: usize) -> Result<SetLabel> {
        self.check(index)?;
        Ok(self.sets[index])
    }

    pub fn set_labels(&self) -> &[SetLabel] {
        &self.sets
    }

    /// Whether the constellation has inner (`S4`) points, i.e. supports the
    /// relaxed design.
    pub fn has_inner_points(&self) -> bool {
        self.sets.contains(&SetLabel::S4)
    }

    /// Gray label as an integer of `bits_per_symbol()` bits.
    pub fn gray_label(&self, index: usize) -> Result<u32> {
        self.check(index)?;
        Ok(self.labels[index])
    }

    /// Gray label as a bit string, most significant bit first.
    pub fn gray_bits(&self, index: usize) -> Result<String> {
        let label = self.gray_label(index)?;
        let width = self.bits_per_symbol() as usize;
        Ok(format!("{label:0width$b}"))
    }

    /// Number of differing bits between the labels of two points.
    pub fn bit_errors(&self, sent: usize, detected: usize) -> Result<u32> {
        Ok((self.gray_label(sent)? ^ self.gray_label(detected)?).count_ones())
    }

    /// Minimum-distance detection of a received sample against the
    /// `sqrt(gamma)`-scaled constellation. Ties go to the lower index.
    pub fn detect(&self, received: Complex64, gamma: f64) -> Result<usize> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gamma must be positive and finite, got {gamma}"
            )));
        }
        if !received.re.is_finite() || !received.im.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "received sample is not finite: {received}"
            )));
        }
        let scale = gamma.sqrt();
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (received - p * scale).norm_sqr();
            if d < best_dist {
                best_dist = d;
                best = i;
            }
        }
        Ok(best)
    }

    fn check(&self, index: usize) -> Result<()> {
        if index < self.order {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index,
                order: self.order,
            })
        }
    }
}

fn lattice_points(order: usize) -> Result<Vec<(i32, i32)>> {
    let (re_levels, im_levels): (&[i32], &[i32]) = match order {
        4 => (&[-1, 1], &[-1, 1]),
        8 => (&[-3, -1, 1, 3], &[-1, 1]),
        16 => (&[-3, -1, 1, 3], &[-3, -1, 1, 3]),
        32 => (&[-5, -3, -1, 1, 3, 5], &[-5, -3, -1, 1, 3, 5]),
        other => return Err(Error::UnsupportedOrder(other)),
    };
    let mut points = Vec::with_capacity(order);
    for &im in im_levels.iter().rev() {
        for &re in re_levels {
            if order == 32 && re.abs() == 5 && im.abs() == 5 {
                continue;
            }
            points.push((re, im));
        }
    }
    Ok(points)
}

fn reflected_gray(n: u32) -> u32 {
    n ^ (n >> 1)
}

fn level_index(level: i32, levels: usize) -> u32 {
    // Levels -L+1, ..., L-1 in steps of 2 map to 0..levels.
    ((level + levels as i32 - 1) / 2) as u32
}

fn gray_labels(order: usize, lattice: &[(i32, i32)]) -> Vec<u32> {
    if order == 32 {
        let table: HashMap<(i32, i32), u32> = QAM32_LABELS.iter().copied().collect();
        return lattice.iter().map(|p| table[p]).collect();
    }
    let (re_levels, im_levels) = match order {
        4 => (2, 2),
        8 => (4, 2),
        _ => (4, 4),
    };
    let im_bits = (im_levels as u32).trailing_zeros();
    lattice
        .iter()
        .map(|&(re, im)| {
            let gi = reflected_gray(level_index(re, re_levels));
            let gq = reflected_gray(level_index(im, im_levels));
            (gi << im_bits) | gq
        })
        .collect()
}

fn classify_point(lattice: &[(i32, i32)], index: usize) -> SetLabel {
    let has = |p: (i32, i32)| lattice.contains(&p);
    let (x, y) = lattice[index];
    let sx = x.signum();
    let sy = y.signum();
    let re_free = !has((x + 2 * sx, y));
    let im_free = !has((x, y + 2 * sy));
    match (re_free, im_free) {
        (false, false) => SetLabel::S4,
        (false, true) => SetLabel::S2,
        (true, false) => SetLabel::S3,
        (true, true) => {
            let concave = has((x - 2 * sx, y + 2 * sy)) || has((x + 2 * sx, y - 2 * sy));
            if !concave {
                SetLabel::S1
            } else {
                let (_, (qx, qy)) = to_first_quadrant(x, y);
                if qx > qy {
                    SetLabel::S5
                } else {
                    SetLabel::S6
                }
            }
        }
    }
}

/// Rotates `(x, y)` by quarter turns into the open first quadrant.
///
/// Returns the number of counter-clockwise quarter turns applied and the
/// rotated point. Both coordinates must be non-zero.
pub(crate) fn to_first_quadrant(x: i32, y: i32) -> (i32, (i32, i32)) {
    let mut p = (x, y);
    for k in 0..4 {
        if p.0 > 0 && p.1 > 0 {
            return (k, p);
        }
        p = (-p.1, p.0);
    }
    unreachable!("odd lattice points are never on an axis")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neighbours(c: &Constellation, i: usize) -> Vec<usize> {
        let (x, y) = c.lattice()[i];
        [(2, 0), (-2, 0), (0, 2), (0, -2)]
            .iter()
            .filter_map(|(dx, dy)| c.index_of(x + dx, y + dy))
            .collect()
    }

    #[test]
    fn unsupported_order_names_supported_ones() {
        let err = Constellation::new(64).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("4, 8, 16 and 32"), "{msg}");
    }

    #[test]
    fn qam4_points_and_sets() {
        let c = Constellation::new(4).unwrap();
        let mut pts: Vec<_> = c.lattice().to_vec();
        pts.sort();
        assert_eq!(pts, vec![(-1, -1), (-1, 1), (1, -1), (1, 1)]);
        assert!(c.set_labels().iter().all(|&s| s == SetLabel::S1));
        // row-major, Im descending then Re ascending
        assert_eq!(c.lattice(), &[(-1, 1), (1, 1), (-1, -1), (1, -1)]);
    }

    #[test]
    fn qam32_is_cross() {
        let c = Constellation::new(32).unwrap();
        assert_eq!(c.points().len(), 32);
        assert!(c.index_of(5, 5).is_none());
        assert!(c.index_of(-5, -5).is_none());
        assert!(c.index_of(5, 3).is_some());
    }

    #[test]
    fn set_cardinalities() {
        let count = |m: usize, s: SetLabel| {
            Constellation::new(m)
                .unwrap()
                .set_labels()
                .iter()
                .filter(|&&l| l == s)
                .count()
        };
        assert_eq!(count(4, SetLabel::S1), 4);
        assert_eq!((count(8, SetLabel::S1), count(8, SetLabel::S2)), (4, 4));
        for s in [SetLabel::S1, SetLabel::S2, SetLabel::S3, SetLabel::S4] {
            assert_eq!(count(16, s), 4, "{s}");
        }
        assert_eq!(count(32, SetLabel::S1), 0);
        assert_eq!(count(32, SetLabel::S2), 4);
        assert_eq!(count(32, SetLabel::S3), 4);
        assert_eq!(count(32, SetLabel::S4), 16);
        assert_eq!(count(32, SetLabel::S5), 4);
        assert_eq!(count(32, SetLabel::S6), 4);
    }

    #[test]
    fn inner_points_by_neighbour_enumeration() {
        for m in SUPPORTED_ORDERS {
            let c = Constellation::new(m).unwrap();
            for i in 0..m {
                let inner = neighbours(&c, i).len() == 4;
                assert_eq!(
                    inner,
                    c.classify(i).unwrap() == SetLabel::S4,
                    "M={m} {:?}",
                    c.lattice()[i]
                );
            }
        }
        let c = Constellation::new(16).unwrap();
        let mut inner: Vec<_> = (0..16)
            .filter(|&i| c.classify(i).unwrap() == SetLabel::S4)
            .map(|i| c.lattice()[i])
            .collect();
        inner.sort();
        assert_eq!(inner, vec![(-1, -1), (-1, 1), (1, -1), (1, 1)]);
    }

    #[test]
    fn classify_examples() {
        let c16 = Constellation::new(16).unwrap();
        assert_eq!(
            c16.classify(c16.index_of(3, 3).unwrap()).unwrap(),
            SetLabel::S1
        );
        assert_eq!(
            c16.classify(c16.index_of(1, 3).unwrap()).unwrap(),
            SetLabel::S2
        );
        assert_eq!(
            c16.classify(c16.index_of(3, 1).unwrap()).unwrap(),
            SetLabel::S3
        );
        let c32 = Constellation::new(32).unwrap();
        assert_eq!(
            c32.classify(c32.index_of(5, 3).unwrap()).unwrap(),
            SetLabel::S5
        );
        assert_eq!(
            c32.classify(c32.index_of(3, 5).unwrap()).unwrap(),
            SetLabel::S6
        );
        assert_eq!(
            c32.classify(c32.index_of(-3, 5).unwrap()).unwrap(),
            SetLabel::S5
        );
        assert_eq!(
            c32.classify(c32.index_of(1, 5).unwrap()).unwrap(),
            SetLabel::S2
        );
        assert_eq!(
            c32.classify(c32.index_of(5, -1).unwrap()).unwrap(),
            SetLabel::S3
        );
        let c8 = Constellation::new(8).unwrap();
        assert_eq!(
            c8.classify(c8.index_of(1, 1).unwrap()).unwrap(),
            SetLabel::S2
        );
        assert_eq!(
            c8.classify(c8.index_of(-3, -1).unwrap()).unwrap(),
            SetLabel::S1
        );
        assert!(c8.classify(8).is_err());
    }

    #[test]
    fn lattice_spacing() {
        for m in SUPPORTED_ORDERS {
            let c = Constellation::new(m).unwrap();
            let mut min = f64::INFINITY;
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        min = min.min((c.points()[i] - c.points()[j]).norm());
                    }
                }
                for j in neighbours(&c, i) {
                    assert_eq!((c.points()[i] - c.points()[j]).norm(), 2.0);
                }
            }
            assert_eq!(min, 2.0);
        }
    }

    #[test]
    fn gray_adjacency() {
        for m in [4, 8, 16] {
            let c = Constellation::new(m).unwrap();
            for i in 0..m {
                for j in neighbours(&c, i) {
                    assert_eq!(c.bit_errors(i, j).unwrap(), 1, "M={m}");
                }
            }
        }
        let c = Constellation::new(32).unwrap();
        let mut penalty = Vec::new();
        for i in 0..32 {
            for j in neighbours(&c, i) {
                if i < j {
                    penalty.push(c.bit_errors(i, j).unwrap());
                }
            }
        }
        assert_eq!(penalty.len(), 52);
        assert_eq!(penalty.iter().filter(|&&d| d == 1).count(), 50);
    }

    #[test]
    fn gray_labels_are_bijective() {
        for m in SUPPORTED_ORDERS {
            let c = Constellation::new(m).unwrap();
            let mut labels: Vec<_> = (0..m).map(|i| c.gray_label(i).unwrap()).collect();
            labels.sort();
            labels.dedup();
            assert_eq!(labels.len(), m);
            assert!(labels.iter().all(|&l| l < m as u32));
        }
        let c4 = Constellation::new(4).unwrap();
        let mut bits: Vec<_> = (0..4).map(|i| c4.gray_bits(i).unwrap()).collect();
        bits.sort();
        assert_eq!(bits, vec!["00", "01", "10", "11"]);
        let c16 = Constellation::new(16).unwrap();
        let a = c16.index_of(1, 1).unwrap();
        let b = c16.index_of(1, 3).unwrap();
        assert_eq!(c16.bit_errors(a, b).unwrap(), 1);
        assert_eq!(c16.gray_bits(0).unwrap().len(), 4);
    }

    #[test]
    fn detect_examples() {
        let c4 = Constellation::new(4).unwrap();
        let g: f64 = 7.0;
        let i11 = c4.index_of(1, 1).unwrap();
        assert_eq!(
            c4.detect(Complex64::new(1.0, 1.0) * g.sqrt(), g).unwrap(),
            i11
        );

        let c16 = Constellation::new(16).unwrap();
        let got = c16.detect(Complex64::new(2.2, 2.2), 1.0).unwrap();
        assert_eq!(got, c16.index_of(3, 3).unwrap());

        let c32 = Constellation::new(32).unwrap();
        let y = Complex64::new(4.9, 3.1) * 2.0;
        let brute = (0..32)
            .min_by(|&a, &b| {
                let da = (y - c32.points()[a] * 2.0).norm();
                let db = (y - c32.points()[b] * 2.0).norm();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        assert_eq!(c32.detect(y, 4.0).unwrap(), brute);
        assert_eq!(brute, c32.index_of(5, 3).unwrap());
    }

    #[test]
    fn detect_rejects_bad_input() {
        let c = Constellation::new(4).unwrap();
        assert!(c.detect(Complex64::new(f64::NAN, 0.0), 1.0).is_err());
        assert!(c.detect(Complex64::new(0.0, f64::INFINITY), 1.0).is_err());
        assert!(c.detect(Complex64::new(0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn detect_tie_goes_to_lower_index() {
        let c = Constellation::new(4).unwrap();
        assert_eq!(c.detect(Complex64::new(0.0, 0.0), 1.0).unwrap(), 0);
    }

    #[test]
    fn detect_noiseless_identity() {
        for m in SUPPORTED_ORDERS {
            let c = Constellation::new(m).unwrap();
            for gamma in [1.0f64, 10.0, 100.0] {
                for (i, p) in c.points().iter().enumerate() {
                    assert_eq!(c.detect(p * gamma.sqrt(), gamma).unwrap(), i);
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn detect_is_scale_consistent(
                m_idx in 0usize..4,
                re in -20.0f64..20.0,
                im in -20.0f64..20.0,
                gamma in 0.1f64..200.0,
            ) {
                let c = Constellation::new(SUPPORTED_ORDERS[m_idx]).unwrap();
                let y = Complex64::new(re, im);
                let a = c.detect(y, gamma).unwrap();
                let b = c.detect(y / gamma.sqrt(), 1.0).unwrap();
                if a != b {
                    // only allowed on a numerical tie
                    let s = gamma.sqrt();
                    let da = (y - c.points()[a] * s).norm();
                    let db = (y - c.points()[b] * s).norm();
                    prop_assert!((da - db).abs() <= 1e-9 * (1.0 + da));
                }
            }
        }
    }
}
