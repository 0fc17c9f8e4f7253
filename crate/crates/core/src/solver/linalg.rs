//! Dense kernels for the Newton systems: a Bunch–Kaufman `LDLᵀ`
//! factorization for symmetric indefinite matrices and an SVD least-squares
//! fallback.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Growth-bounding pivot threshold `(1 + √17)/8`.
const BK_ALPHA: f64 = 0.640_388_203_202_208;

/// `P A Pᵀ = L D Lᵀ` with unit lower-triangular `L` and block-diagonal `D`
/// (1×1 and 2×2 blocks).
#[derive(Debug, Clone)]
pub struct Ldlt {
    n: usize,
    /// Strictly lower part holds `L`; the diagonal blocks hold `D`.
    lu: DMatrix<f64>,
    /// `swaps[k] = p` means rows/columns `k` and `p` were exchanged at step `k`.
    swaps: Vec<usize>,
    /// Size (1 or 2) of the block starting at each step; 0 for the second
    /// row of a 2×2 block.
    block: Vec<u8>,
}

impl Ldlt {
    /// Factorizes a symmetric matrix. Only the lower triangle is read.
    ///
    /// Fails when a pivot is below `tol · max|A|`, which flags numerical
    /// singularity to the caller.
    pub fn factor(a: &DMatrix<f64>, tol: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(
                "LDLt needs a square matrix".into(),
            ));
        }
        let mut m = a.clone();
        for j in 0..n {
            for i in 0..j {
                m[(i, j)] = m[(j, i)];
            }
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let tiny = tol * scale;
        let mut swaps = vec![0usize; n];
        let mut block = vec![0u8; n];
        let mut k = 0;
        while k < n {
            let akk = m[(k, k)].abs();
            let (mut r, mut colmax) = (k, 0.0);
            for i in k + 1..n {
                if m[(i, k)].abs() > colmax {
                    colmax = m[(i, k)].abs();
                    r = i;
                }
            }
            if akk.max(colmax) <= tiny {
                return Err(Error::SingularKkt(format!("zero pivot column at step {k}")));
            }
            let (kp, size) = if akk >= BK_ALPHA * colmax {
                (k, 1)
            } else {
                let mut rowmax = 0.0f64;
                for j in k..n {
                    if j != r {
                        rowmax = rowmax.max(m[(r, j)].abs());
                    }
                }
                if akk * rowmax >= BK_ALPHA * colmax * colmax {
                    (k, 1)
                } else if m[(r, r)].abs() >= BK_ALPHA * rowmax {
                    (r, 1)
                } else {
                    (r, 2)
                }
            };
            let target = k + size - 1;
            if kp != target {
                m.swap_rows(target, kp);
                m.swap_columns(target, kp);
            }
            swaps[k] = kp;
            block[k] = size as u8;

            if size == 1 {
                let d = m[(k, k)];
                if d.abs() <= tiny {
                    return Err(Error::SingularKkt(format!("pivot {d:e} at step {k}")));
                }
                for i in k + 1..n {
                    m[(i, k)] /= d;
                }
                for j in k + 1..n {
                    let ljd = m[(j, k)] * d;
                    for i in j..n {
                        let v = m[(i, j)] - m[(i, k)] * ljd;
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
            } else {
                let (d11, d21, d22) = (m[(k, k)], m[(k + 1, k)], m[(k + 1, k + 1)]);
                let det = d11 * d22 - d21 * d21;
                if det.abs() <= tiny * tiny {
                    return Err(Error::SingularKkt(format!("2x2 pivot at step {k}")));
                }
                // rows below the block: [l0 l1] = [a0 a1] D⁻¹
                let mut l = Vec::with_capacity(n);
                for i in k + 2..n {
                    let (a0, a1) = (m[(i, k)], m[(i, k + 1)]);
                    l.push(((a0 * d22 - a1 * d21) / det, (a1 * d11 - a0 * d21) / det));
                }
                for (jj, j) in (k + 2..n).enumerate() {
                    let (a0, a1) = (m[(j, k)], m[(j, k + 1)]);
                    for (ii, i) in (j..n).enumerate() {
                        let (l0, l1) = l[jj + ii];
                        let v = m[(i, j)] - (l0 * a0 + l1 * a1);
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
                for (ii, i) in (k + 2..n).enumerate() {
                    m[(i, k)] = l[ii].0;
                    m[(i, k + 1)] = l[ii].1;
                }
                swaps[k + 1] = k + 1;
            }
            k += size;
        }
        Ok(Self {
            n,
            lu: m,
            swaps,
            block,
        })
    }

    /// Number of negative eigenvalues of `D` (the inertia of `A`).
    pub fn negative_eigenvalues(&self) -> usize {
        let mut count = 0;
        let mut k = 0;
        while k < self.n {
            if self.block[k] == 1 {
                count += (self.lu[(k, k)] < 0.0) as usize;
                k += 1;
            } else {
                let (a, b, c) = (
                    self.lu[(k, k)],
                    self.lu[(k + 1, k)],
                    self.lu[(k + 1, k + 1)],
                );
                let det = a * c - b * b;
                count += if det < 0.0 {
                    1
                } else if a + c < 0.0 {
                    2
                } else {
                    0
                };
                k += 2;
            }
        }
        count
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut x = rhs.clone();
        // forward: apply P (all swaps, in order), then L⁻¹
        let starts: Vec<usize> = (0..n).filter(|&k| self.block[k] != 0).collect();
        for &k in &starts {
            x.swap_rows(k + self.block[k] as usize - 1, self.swaps[k]);
        }
        for &k in &starts {
            let size = self.block[k] as usize;
            for c in k..k + size {
                let xc = x[c];
                for i in k + size..n {
                    x[i] -= self.lu[(i, c)] * xc;
                }
            }
        }
        // D⁻¹
        let mut k = 0;
        while k < n {
            if self.block[k] == 1 {
                x[k] /= self.lu[(k, k)];
                k += 1;
            } else {
                let (a, b, c) = (
                    self.lu[(k, k)],
                    self.lu[(k + 1, k)],
                    self.lu[(k + 1, k + 1)],
                );
                let det = a * c - b * b;
                let (y0, y1) = (x[k], x[k + 1]);
                x[k] = (c * y0 - b * y1) / det;
                x[k + 1] = (a * y1 - b * y0) / det;
                k += 2;
            }
        }
        // backward: L⁻ᵀ, then Pᵀ
        for &k in starts.iter().rev() {
            let size = self.block[k] as usize;
            for c in k..k + size {
                let mut acc = x[c];
                for i in k + size..n {
                    acc -= self.lu[(i, c)] * x[i];
                }
                x[c] = acc;
            }
        }
        for &k in starts.iter().rev() {
            x.swap_rows(k + self.block[k] as usize - 1, self.swaps[k]);
        }
        x
    }
}

/// Minimum-norm least-squares solution of `A x ≈ b` via SVD.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DVector::zeros(a.ncols());
    }
    // the SVD iteration does not terminate on non-finite input
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return DVector::from_element(a.ncols(), f64::NAN);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * f64::EPSILON * a.nrows().max(a.ncols()) as f64;
    svd.solve(b, eps)
        .unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Symmetric Ruiz equilibration: returns `D` such that every row of
/// `D K D` has max-norm close to one.
pub fn ruiz_scaling(k: &DMatrix<f64>, sweeps: usize) -> DVector<f64> {
    let n = k.nrows();
    let mut d = DVector::from_element(n, 1.0);
    let mut m = k.clone();
    for _ in 0..sweeps {
        let r = DVector::from_fn(n, |i, _| {
            let mx = m.row(i).amax();
            if mx > 0.0 {
                1.0 / mx.sqrt()
            } else {
                1.0
            }
        });
        if r.iter().all(|v| (v - 1.0).abs() < 1e-3) {
            break;
        }
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] *= r[i] * r[j];
            }
        }
        d.component_mul_assign(&r);
    }
    d
}

/// Solves the bordered Newton system
///
/// ```text
/// [ H + εI  Eᵀ ] [d]   [r1]
/// [ E       0  ] [λ] = [r2]
/// ```
///
/// after symmetric equilibration, trying the (scaled) shift `ε` from `eps0`
/// upwards and falling back to least squares when every factorization
/// breaks down. Returns `(d, λ, ε)`.
pub fn solve_bordered(
    h: &DMatrix<f64>,
    e: &DMatrix<f64>,
    r1: &DVector<f64>,
    r2: &DVector<f64>,
    eps0: f64,
) -> Result<(DVector<f64>, DVector<f64>, f64)> {
    let n = h.nrows();
    let m = e.nrows();
    if h.iter().chain(r1.iter()).any(|v| !v.is_finite()) {
        return Err(Error::SingularKkt("non-finite Newton system".into()));
    }
    let mut kkt = DMatrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(h);
    if m > 0 {
        kkt.view_mut((n, 0), (m, n)).copy_from(e);
        kkt.view_mut((0, n), (n, m)).copy_from(&e.transpose());
    }
    let scale = ruiz_scaling(&kkt, 20);
    let mut scaled = kkt.clone();
    for i in 0..n + m {
        for j in 0..n + m {
            scaled[(i, j)] *= scale[i] * scale[j];
        }
    }
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(r1);
    rhs.rows_mut(n, m).copy_from(r2);
    let rhs_s = rhs.component_mul(&scale);
    let rhs_norm = rhs_s.amax().max(1e-300);
    let shifted = |eps: f64| {
        let mut k = scaled.clone();
        for i in 0..n {
            k[(i, i)] += eps;
        }
        k
    };
    let unscale = |y: &DVector<f64>| y.component_mul(&scale);

    let mut schedule = vec![eps0.max(0.0)];
    schedule.extend([1e-10, 1e-8, 1e-6].iter().filter(|&&e| e > eps0));
    for &eps in &schedule {
        let k = shifted(eps);
        let Ok(f) = Ldlt::factor(&k, 1e-14) else {
            continue;
        };
        // a positive definite H on the null space of E gives exactly m
        // negative eigenvalues
        if f.negative_eigenvalues() != m {
            continue;
        }
        let mut y = f.solve(&rhs_s);
        // one step of iterative refinement
        let res = &rhs_s - &k * &y;
        y += f.solve(&res);
        if y.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let res = (&k * &y - &rhs_s).amax();
        if res <= 1e-8 * (rhs_norm + k.amax() * y.amax()) {
            let sol = unscale(&y);
            let d = restore_affine(e, r2, sol.rows(0, n).into_owned());
            return Ok((d, sol.rows(n, m).into_owned(), eps));
        }
    }
    let eps = schedule.last().copied().unwrap_or(0.0);
    let y = lstsq(&shifted(eps), &rhs_s);
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularKkt("least-squares fallback failed".into()));
    }
    let sol = unscale(&y);
    let d = restore_affine(e, r2, sol.rows(0, n).into_owned());
    Ok((d, sol.rows(n, m).into_owned(), eps))
}

/// Removes the error in `E d = r2` left by an ill-conditioned solve with the
/// minimum-norm correction `Eᵀ(EEᵀ)⁻¹(r2 − E d)`.
pub(crate) fn restore_affine(e: &DMatrix<f64>, r2: &DVector<f64>, d: DVector<f64>) -> DVector<f64> {
    if e.nrows() == 0 {
        return d;
    }
    let miss = r2 - e * &d;
    let y = match (e * e.transpose()).cholesky() {
        Some(chol) => chol.solve(&miss),
        None => lstsq(&(e * e.transpose()), &miss),
    };
    d + e.tr_mul(&y)
}
