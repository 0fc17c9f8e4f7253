//! Log-barrier objective `f(v) = t·obj(v) + F(v)` for the three programs the
//! path-following method handles.
//!
//! | program  | variables `v` | `obj`  | barrier terms                                   |
//! |----------|---------------|--------|-------------------------------------------------|
//! | total    | `w̃`           | `‖w̃‖²` | `−Σ ln(A_k w̃ − a_k)`                            |
//! | peak     | `(w̃, z)`      | `z`    | `−Σ ln(z − w̃ᵀẼ_k w̃) − Σ ln(A_k w̃ − a_k)`      |
//! | phase I  | `(w̃, s)`      | `s`    | `−Σ ln(A_k w̃ − a_k + s)`                        |
//!
//! Phase I may add a proximal term `η‖w̃ − c‖²` to its objective.
//!
//! `Ẽ_k` has ones on diagonal entries `k` and `Nt + k`, so `w̃ᵀẼ_k w̃ = |w_k|²`.

use nalgebra::{DMatrix, DVector};

use crate::assembly::ConstraintSystem;

use super::ProblemKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Program {
    Total,
    Peak,
    PhaseOne,
}

impl From<ProblemKind> for Program {
    fn from(kind: ProblemKind) -> Self {
        match kind {
            ProblemKind::TotalPower => Program::Total,
            ProblemKind::PeakPower => Program::Peak,
        }
    }
}

/// A barrier problem over `v`, with linear slacks `G v − h` and the
/// equality rows `E v = b`.
#[derive(Debug, Clone)]
pub struct BarrierProblem {
    pub program: Program,
    pub nt: usize,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub e: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Phase I only: `η‖w̃ − c‖²` added to the objective.
    pub prox: Option<(f64, DVector<f64>)>,
}

impl BarrierProblem {
    pub fn new(sys: &ConstraintSystem, program: Program) -> Self {
        let n = sys.n();
        let nv = if program == Program::Total { n } else { n + 1 };
        let mut g = DMatrix::zeros(sys.r_a(), nv);
        g.view_mut((0, 0), (sys.r_a(), n)).copy_from(&sys.a_mat);
        if program == Program::PhaseOne {
            g.column_mut(n).fill(1.0);
        }
        let mut e = DMatrix::zeros(sys.r_b(), nv);
        e.view_mut((0, 0), (sys.r_b(), n)).copy_from(&sys.b_mat);
        Self {
            program,
            nt: sys.nt,
            g,
            h: sys.a_vec.clone(),
            e,
            b: sys.b_vec.clone(),
            prox: None,
        }
    }

    /// Phase-I program with the extra row `s ≥ −floor` and an optional
    /// proximal term `η‖w̃ − c‖²`.
    pub fn phase_one(
        sys: &ConstraintSystem,
        floor: f64,
        prox: Option<(f64, DVector<f64>)>,
    ) -> Self {
        let mut p = Self::new(sys, Program::PhaseOne);
        p.prox = prox;
        let (r, nv) = p.g.shape();
        p.g = p.g.insert_row(r, 0.0);
        p.g[(r, nv - 1)] = 1.0;
        p.h = p.h.insert_row(r, -floor);
        p
    }

    pub fn n_vars(&self) -> usize {
        self.g.ncols()
    }

    fn n(&self) -> usize {
        2 * self.nt
    }

    fn has_epigraph(&self) -> bool {
        self.program == Program::Peak
    }

    /// Number of barrier terms (the duality-gap numerator).
    pub fn barrier_count(&self) -> usize {
        self.g.nrows() + if self.has_epigraph() { self.nt } else { 0 }
    }

    pub fn objective(&self, v: &DVector<f64>) -> f64 {
        match self.program {
            Program::Total => v.norm_squared(),
            _ => v[self.n()] + self.prox_value(v),
        }
    }

    fn prox_value(&self, v: &DVector<f64>) -> f64 {
        match &self.prox {
            Some((eta, c)) => eta * (v.rows(0, self.n()) - c).norm_squared(),
            None => 0.0,
        }
    }

    pub fn objective_gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        match self.program {
            Program::Total => v * 2.0,
            _ => {
                let mut g = DVector::zeros(v.len());
                g[self.n()] = 1.0;
                if let Some((eta, c)) = &self.prox {
                    let n = self.n();
                    g.rows_mut(0, n)
                        .copy_from(&((v.rows(0, n) - c) * (2.0 * eta)));
                }
                g
            }
        }
    }

    /// Linear slacks `G v − h`.
    pub fn linear_slacks(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.g * v - &self.h
    }

    /// Epigraph slacks `z − |w_k|²` (empty unless peak).
    pub fn epigraph_slacks(&self, v: &DVector<f64>) -> DVector<f64> {
        if !self.has_epigraph() {
            return DVector::zeros(0);
        }
        let nt = self.nt;
        let z = v[2 * nt];
        DVector::from_fn(nt, |k, _| z - v[k] * v[k] - v[nt + k] * v[nt + k])
    }

    /// Smallest barrier argument; positive iff `v` is strictly feasible for
    /// the inequality part.
    pub fn min_slack(&self, v: &DVector<f64>) -> f64 {
        let lin = self
            .linear_slacks(v)
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let epi = self
            .epigraph_slacks(v)
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        lin.min(epi)
    }

    /// `F(v)`, or `+∞` outside the strict interior.
    pub fn barrier(&self, v: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for s in self
            .linear_slacks(v)
            .iter()
            .chain(self.epigraph_slacks(v).iter())
        {
            if !(*s > 0.0) {
                return f64::INFINITY;
            }
            acc -= s.ln();
        }
        acc
    }

    /// `t·obj(v) + F(v)`.
    pub fn value(&self, v: &DVector<f64>, t: f64) -> f64 {
        let f = self.barrier(v);
        if f.is_infinite() {
            return f;
        }
        t * self.objective(v) + f
    }

    pub fn barrier_gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        let s = self.linear_slacks(v);
        let inv = s.map(|x| -1.0 / x);
        let mut grad = self.g.tr_mul(&inv);
        if self.has_epigraph() {
            let nt = self.nt;
            for (k, u) in self.epigraph_slacks(v).iter().enumerate() {
                // ∇u = (−2 Ẽ_k w̃, 1)
                grad[k] += 2.0 * v[k] / u;
                grad[nt + k] += 2.0 * v[nt + k] / u;
                grad[2 * nt] -= 1.0 / u;
            }
        }
        grad
    }

    pub fn gradient(&self, v: &DVector<f64>, t: f64) -> DVector<f64> {
        self.objective_gradient(v) * t + self.barrier_gradient(v)
    }

    pub fn barrier_hessian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let s = self.linear_slacks(v);
        let mut scaled = self.g.clone();
        for (k, sk) in s.iter().enumerate() {
            scaled.row_mut(k).scale_mut(1.0 / sk);
        }
        let mut hess = scaled.tr_mul(&scaled);
        if self.has_epigraph() {
            let nt = self.nt;
            let iz = 2 * nt;
            for (k, u) in self.epigraph_slacks(v).iter().enumerate() {
                // (1/u²) ∇u ∇uᵀ + (2/u) Ẽ_k
                let idx = [k, nt + k, iz];
                let du = [-2.0 * v[k], -2.0 * v[nt + k], 1.0];
                let u2 = u * u;
                for a in 0..3 {
                    for b in 0..3 {
                        hess[(idx[a], idx[b])] += du[a] * du[b] / u2;
                    }
                }
                hess[(k, k)] += 2.0 / u;
                hess[(nt + k, nt + k)] += 2.0 / u;
            }
        }
        hess
    }

    pub fn hessian(&self, v: &DVector<f64>, t: f64) -> DMatrix<f64> {
        let mut hess = self.barrier_hessian(v);
        let (curv, dims) = match (&self.program, &self.prox) {
            (Program::Total, _) => (2.0 * t, v.len()),
            (_, Some((eta, _))) => (2.0 * eta * t, self.n()),
            _ => (0.0, 0),
        };
        for i in 0..dims {
            hess[(i, i)] += curv;
        }
        hess
    }

    /// `f(v + α d) − f(v)`, computed from slack ratios to avoid
    /// cancellation. `+∞` when the trial point leaves the interior.
    pub fn value_change(&self, v: &DVector<f64>, d: &DVector<f64>, alpha: f64, t: f64) -> f64 {
        let d_obj = match self.program {
            Program::Total => 2.0 * alpha * v.dot(d) + alpha * alpha * d.norm_squared(),
            _ => {
                let mut step = alpha * d[self.n()];
                if let Some((eta, c)) = &self.prox {
                    let n = self.n();
                    let dx = d.rows(0, n);
                    step += eta
                        * (2.0 * alpha * (v.rows(0, n) - c).dot(&dx)
                            + alpha * alpha * dx.norm_squared());
                }
                step
            }
        };
        let mut acc = t * d_obj;
        let s = self.linear_slacks(v);
        let ds = &self.g * d * alpha;
        for (sk, dk) in s.iter().zip(ds.iter()) {
            let r = dk / sk;
            if !(1.0 + r > 0.0) {
                return f64::INFINITY;
            }
            acc -= r.ln_1p();
        }
        if self.has_epigraph() {
            let nt = self.nt;
            for (k, u) in self.epigraph_slacks(v).iter().enumerate() {
                let (a, b) = (d[k] * alpha, d[nt + k] * alpha);
                let du =
                    alpha * d[2 * nt] - (2.0 * v[k] * a + a * a) - (2.0 * v[nt + k] * b + b * b);
                let r = du / u;
                if !(1.0 + r > 0.0) {
                    return f64::INFINITY;
                }
                acc -= r.ln_1p();
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(rng: &mut ChaCha8Rng, program: Program) -> (BarrierProblem, DVector<f64>) {
        let nt = 3;
        let ra = 4;
        let a = DMatrix::from_fn(ra, 2 * nt, |_, _| rng.gen_range(-1.0..1.0));
        let x = DVector::from_fn(2 * nt, |_, _| rng.gen_range(-1.0..1.0));
        // rhs placed below A x so x is strictly interior
        let a_vec = &a * &x - DVector::from_fn(ra, |_, _| rng.gen_range(0.1..1.0));
        let sys =
            ConstraintSystem::from_parts(a, a_vec, DMatrix::zeros(0, 2 * nt), DVector::zeros(0))
                .unwrap();
        let p = BarrierProblem::new(&sys, program);
        let mut v = DVector::zeros(p.n_vars());
        v.rows_mut(0, 2 * nt).copy_from(&x);
        if program != Program::Total {
            let peak = (0..nt)
                .map(|k| x[k] * x[k] + x[nt + k] * x[nt + k])
                .fold(0.0, f64::max);
            v[2 * nt] = peak + rng.gen_range(0.1..1.0);
        }
        (p, v)
    }

    #[test]
    fn gradient_and_hessian_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for program in [Program::Total, Program::Peak, Program::PhaseOne] {
            for _ in 0..20 {
                let (p, v) = problem(&mut rng, program);
                let t = rng.gen_range(0.5..5.0);
                let g = p.gradient(&v, t);
                let hm = p.hessian(&v, t);
                let h = 1e-6;
                for i in 0..v.len() {
                    let mut vp = v.clone();
                    let mut vm = v.clone();
                    vp[i] += h;
                    vm[i] -= h;
                    let fd = (p.value(&vp, t) - p.value(&vm, t)) / (2.0 * h);
                    assert!(
                        (fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()),
                        "{program:?}"
                    );
                    let col = (p.gradient(&vp, t) - p.gradient(&vm, t)) / (2.0 * h);
                    for j in 0..v.len() {
                        assert!((col[j] - hm[(j, i)]).abs() <= 1e-5 * (1.0 + hm[(j, i)].abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn proximal_phase_one_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let (p0, v) = problem(&mut rng, Program::PhaseOne);
        let c = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
        let sys = ConstraintSystem::from_parts(
            p0.g.columns(0, 6).into_owned(),
            p0.h.clone(),
            DMatrix::zeros(0, 6),
            DVector::zeros(0),
        )
        .unwrap();
        let p = BarrierProblem::phase_one(&sys, 50.0, Some((0.3, c)));
        let (g, hm) = (p.gradient(&v, 2.0), p.hessian(&v, 2.0));
        let h = 1e-6;
        for i in 0..v.len() {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[i] += h;
            vm[i] -= h;
            let fd = (p.value(&vp, 2.0) - p.value(&vm, 2.0)) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()));
            let col = (p.gradient(&vp, 2.0) - p.gradient(&vm, 2.0)) / (2.0 * h);
            assert!((col - hm.column(i)).amax() <= 1e-5 * (1.0 + hm.column(i).amax()));
        }
        let d = DVector::from_fn(v.len(), |_, _| rng.gen_range(-0.01..0.01));
        let direct = p.value(&(&v + &d), 2.0) - p.value(&v, 2.0);
        assert!((p.value_change(&v, &d, 1.0, 2.0) - direct).abs() < 1e-10);
    }

    #[test]
    fn value_change_matches_direct_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for program in [Program::Total, Program::Peak] {
            let (p, v) = problem(&mut rng, program);
            let d = DVector::from_fn(v.len(), |_, _| rng.gen_range(-0.01..0.01));
            let direct = p.value(&(&v + &d * 0.5), 2.0) - p.value(&v, 2.0);
            assert!((p.value_change(&v, &d, 0.5, 2.0) - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn infinite_outside_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (p, v) = problem(&mut rng, Program::Peak);
        let mut out = v.clone();
        out[6] = -1.0;
        assert!(p.barrier(&out).is_infinite());
        assert!(p.barrier(&v).is_finite());
        assert_eq!(p.barrier_count(), 4 + 3);
    }
}
