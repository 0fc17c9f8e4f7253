use nalgebra::{DMatrix, DVector};

use crate::assembly::{to_complex, ConstraintSystem};
use crate::{Error, Result};

use super::barrier::{BarrierProblem, Program};
use super::linalg::{lstsq, restore_affine, solve_bordered};
use super::{peak_of, ProblemKind, Solution, SolverConfig, Status, StepMode, TraceRow};

/// Smallest accepted backtracking step.
const ALPHA_MIN: f64 = 1e-16;
/// Newton-decrement target of the final centering pass.
const POLISH_KAPPA: f64 = 1e-15;
/// Proximal phase-I rounds and the factor applied to `η` between them.
const PHASE1_ROUNDS: usize = 6;
const PHASE1_SHRINK: f64 = 1e-2;
const POLISH_STEPS: usize = 50;
/// A step may shrink no slack below this fraction of its current value.
/// Full Newton steps linearize the epigraph rows and can land orders of
/// magnitude off the central path, from where damped Newton only crawls.
const BOUNDARY_FRACTION: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub enum Phase1Outcome {
    /// Strictly feasible `w̃₀` (and `z₀` for the peak kind).
    Feasible { x: DVector<f64>, z: Option<f64> },
    /// Certificate: a lower bound on the smallest achievable violation
    /// `s⋆ > 0`, or the residual of an inconsistent `B w̃ = b`.
    Infeasible { certificate: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub d: DVector<f64>,
    pub lambda: DVector<f64>,
    pub gradient: DVector<f64>,
    /// `dᵀ ∇²f d`
    pub kappa: f64,
    /// Diagonal shift that made the factorization succeed.
    pub regularization: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
}

/// `κ = dᵀ H d`.
pub fn newton_decrement(hess: &DMatrix<f64>, d: &DVector<f64>) -> f64 {
    (hess * d).dot(d).max(0.0)
}

/// Solves `[[∇²f + ε₀I, Eᵀ], [E, 0]] [d; λ] = −[∇f; E v − b]`.
///
/// The second block is zero for an iterate on the affine set; carrying the
/// residual keeps round-off drift from accumulating.
pub fn newton_direction(
    prob: &BarrierProblem,
    v: &DVector<f64>,
    t: f64,
    eps0: f64,
) -> Result<NewtonStep> {
    let gradient = prob.gradient(v, t);
    let hess = prob.hessian(v, t);
    let r2 = &prob.b - &prob.e * v;
    let (d, lambda, regularization) = solve_bordered(&hess, &prob.e, &(-&gradient), &r2, eps0)?;
    let kappa = newton_decrement(&hess, &d);
    Ok(NewtonStep {
        d,
        lambda,
        gradient,
        kappa,
        regularization,
    })
}

/// Backtracking from `alpha0`: the largest `alpha0·β^m` that keeps every
/// slack above `BOUNDARY_FRACTION` of its current value and satisfies the
/// Armijo condition.
/// `None` when the step underflows.
pub fn backtrack(
    prob: &BarrierProblem,
    v: &DVector<f64>,
    d: &DVector<f64>,
    t: f64,
    slope: f64,
    alpha0: f64,
    cfg: &SolverConfig,
) -> Option<f64> {
    let slacks = |p: &DVector<f64>| {
        let mut s = prob.linear_slacks(p);
        let e = prob.epigraph_slacks(p);
        s.extend(e.iter().copied());
        s
    };
    let floor = slacks(v) * BOUNDARY_FRACTION;
    let mut alpha = alpha0;
    while alpha >= ALPHA_MIN {
        let trial = v + d * alpha;
        if slacks(&trial)
            .iter()
            .zip(floor.iter())
            .any(|(s, f)| !(s > f))
        {
            alpha *= cfg.bt_beta;
            continue;
        }
        let df = prob.value_change(v, d, alpha, t);
        if df.is_finite() && df <= cfg.bt_alpha * alpha * slope {
            return Some(alpha);
        }
        alpha *= cfg.bt_beta;
    }
    None
}

/// Least-squares estimate of the initial barrier weight and equality
/// multipliers: `argmin ‖t ∇obj + ∇F + Eᵀλ‖`, with `t` clamped to ≥ 1.
pub fn init_params(prob: &BarrierProblem, v: &DVector<f64>) -> (f64, DVector<f64>) {
    let nv = prob.n_vars();
    let m = prob.e.nrows();
    let mut mat = DMatrix::zeros(nv, 1 + m);
    mat.set_column(0, &prob.objective_gradient(v));
    if m > 0 {
        mat.view_mut((0, 1), (nv, m)).copy_from(&prob.e.transpose());
    }
    let sol = lstsq(&mat, &(-prob.barrier_gradient(v)));
    let t = if sol[0].is_finite() {
        sol[0].max(1.0)
    } else {
        1.0
    };
    (t, sol.rows(1, m).into_owned())
}

/// Initial barrier weight for the peak program: `init_params` evaluated on the
/// problem rescaled by `w̃ → w̃/√σ` with `σ = max(1, obj(v))`, mapped back.
///
/// Rescaling maps the central path at weight `t` onto the original one at
/// `t/σ`, so this only moves the `t ≥ 1` clamp into objective-normalized
/// units. Without it, a start with objective ~10³ (high SNR) sits thousands
/// of barrier units from the first centre and damped Newton crawls there.
fn initial_weight(sys: &ConstraintSystem, program: Program, v: &DVector<f64>) -> f64 {
    let n = sys.n();
    let prob = BarrierProblem::new(sys, program);
    let sigma = prob.objective(v).max(1.0);
    if sigma == 1.0 {
        return init_params(&prob, v).0;
    }
    let root = sigma.sqrt();
    let scaled_sys = ConstraintSystem {
        a_vec: &sys.a_vec / root,
        b_vec: &sys.b_vec / root,
        ..sys.clone()
    };
    let scaled = BarrierProblem::new(&scaled_sys, program);
    let mut vs = v.clone();
    vs.rows_mut(0, n).unscale_mut(root);
    if vs.len() > n {
        vs[n] /= sigma;
    }
    init_params(&scaled, &vs).0 / sigma
}

struct Centering {
    iters: usize,
}

#[allow(clippy::too_many_arguments)]
fn center(
    prob: &BarrierProblem,
    v: &mut DVector<f64>,
    t: f64,
    cfg: &SolverConfig,
    kappa_tol: f64,
    max_inner: usize,
    mode: StepMode,
    phase: &'static str,
    outer: usize,
    trace: &mut Vec<TraceRow>,
    stop: &dyn Fn(&DVector<f64>) -> bool,
) -> Result<Centering> {
    for inner in 0..max_inner {
        let step = newton_direction(prob, v, t, cfg.eps0)?;
        if step.kappa <= kappa_tol {
            return Ok(Centering { iters: inner });
        }
        let (dir, alpha0) = match mode {
            StepMode::JointNewton => (step.d.clone(), 1.0),
            StepMode::BlockNormalized => normalized(prob, v, &step.d),
        };
        let mut slope = step.gradient.dot(&dir);
        let (dir, alpha0) = if slope < 0.0 {
            (dir, alpha0)
        } else {
            slope = step.gradient.dot(&step.d);
            (step.d.clone(), 1.0)
        };
        if !(slope < 0.0) {
            // no descent left at working precision
            return Ok(Centering { iters: inner });
        }
        let Some(alpha) = backtrack(prob, v, &dir, t, slope, alpha0, cfg) else {
            return Ok(Centering { iters: inner });
        };
        v.axpy(alpha, &dir, 1.0);
        if cfg.trace {
            trace.push(TraceRow {
                phase,
                outer,
                inner: inner + 1,
                t,
                kappa: step.kappa,
                objective: prob.objective(v),
                min_slack: prob.min_slack(v),
                alpha,
            });
        }
        if stop(v) {
            return Ok(Centering { iters: inner + 1 });
        }
    }
    Ok(Centering { iters: max_inner })
}

/// Per-block normalization `(Δw/‖Δw‖, Δz/|Δz|)`, started from the larger of
/// the two block lengths so that a full Newton step is still reachable.
///
/// A block at rounding level is left at zero: normalizing it would blow pure
/// noise up to unit length (e.g. when the equalities pin `w̃` completely).
/// The result is projected back onto the null space of the equalities.
fn normalized(prob: &BarrierProblem, v: &DVector<f64>, d: &DVector<f64>) -> (DVector<f64>, f64) {
    let n = 2 * prob.nt;
    let noise = |x: f64| 1e-12 * (1.0 + x);
    let mut out = d.clone();
    let nw = d.rows(0, n).norm();
    let mut alpha0: f64 = 0.0;
    if nw > noise(v.rows(0, n).norm()) {
        out.rows_mut(0, n).unscale_mut(nw);
        alpha0 = alpha0.max(nw);
    } else {
        out.rows_mut(0, n).fill(0.0);
    }
    if d.len() > n {
        let nz = d[n].abs();
        if nz > noise(v[n].abs()) {
            out[n] /= nz;
            alpha0 = alpha0.max(nz);
        } else {
            out[n] = 0.0;
        }
    }
    if alpha0 == 0.0 {
        return (d.clone(), 1.0);
    }
    let out = restore_affine(&prob.e, &DVector::zeros(prob.e.nrows()), out);
    (out, alpha0)
}

/// Finds a strictly feasible start by minimizing the common violation `s`
/// in `A w̃ + s ≥ a`, `B w̃ = b`, stopping as soon as `s < 0`.
///
/// Infeasibility is declared once a centered iterate certifies `s⋆ > 0`
/// through the barrier gap bound `s⋆ ≥ s − count/t`.
pub fn phase1(
    sys: &ConstraintSystem,
    kind: ProblemKind,
    cfg: &SolverConfig,
) -> Result<Phase1Outcome> {
    cfg.validate()?;
    let n = sys.n();
    let x0 = lstsq(&sys.b_mat, &sys.b_vec);
    let eq_res = sys.eq_residual(&x0).amax();
    if eq_res > 1e-9 * (1.0 + sys.b_vec.amax()) {
        return Ok(Phase1Outcome::Infeasible {
            certificate: eq_res,
        });
    }
    let finish = |x: DVector<f64>| match kind {
        ProblemKind::TotalPower => Phase1Outcome::Feasible { x, z: None },
        ProblemKind::PeakPower => {
            let x = total_power_center(sys, x, cfg);
            let z = Some(1.1 * peak_of(&x) + 1e-3);
            Phase1Outcome::Feasible { x, z }
        }
    };
    let viol = sys
        .slacks(&x0)
        .iter()
        .fold(f64::NEG_INFINITY, |m, &s| m.max(-s));
    if viol < 0.0 {
        return Ok(finish(x0));
    }

    // Minimize `s + η‖w̃ − w̃₀‖²` subject to `A w̃ + s ≥ a`, `B w̃ = b` and
    // `s ≥ −(viol + 1)`. Without the proximal term the program is unbounded
    // whenever some direction increases every slack, and Newton drifts off
    // to huge `w̃`. A round ends as soon as `s < 0`; if instead the duality
    // bound proves the round's optimum positive, no feasible point lies
    // within `‖w̃ − w̃₀‖² < |s|/η` and `η` shrinks.
    let floor = viol + 1.0;
    let phase_cfg = SolverConfig {
        trace: false,
        ..cfg.clone()
    };
    let never = |_: &DVector<f64>| false;
    let mut trace = Vec::new();
    let mut v = DVector::zeros(n + 1);
    v.rows_mut(0, n).copy_from(&x0);
    v[n] = floor;
    let mut eta = 1.0 / floor;
    let mut bound = 0.0;
    for _round in 0..PHASE1_ROUNDS {
        let prob = BarrierProblem::phase_one(sys, floor, Some((eta, x0.clone())));
        if prob.min_slack(&v) <= 0.0 {
            v.rows_mut(0, n).copy_from(&x0);
            v[n] = floor;
        }
        let m = prob.barrier_count() as f64;
        let mut t = 1.0;
        for outer in 0..cfg.max_outer {
            center(
                &prob,
                &mut v,
                t,
                &phase_cfg,
                2.0 * cfg.eps2.min(1e-3),
                cfg.max_inner,
                StepMode::JointNewton,
                "phase1",
                outer,
                &mut trace,
                &never,
            )?;
            if v[n] < 0.0 {
                let x = v.rows(0, n).into_owned();
                if sys.slacks(&x).min() > 0.0
                    && sys.eq_residual(&x).amax() <= 1e-9 * (1.0 + sys.b_vec.amax())
                {
                    return Ok(finish(x));
                }
            }
            bound = prob.objective(&v) - m / t;
            if bound > 0.0 || m / t < 1e-12 * (1.0 + v[n].abs()) {
                break;
            }
            t *= cfg.mu;
        }
        eta *= PHASE1_SHRINK;
    }
    Ok(Phase1Outcome::Infeasible {
        certificate: bound.max(0.0),
    })
}

/// Moves a strictly feasible point to the total-power central point at the
/// least-squares initial weight. The epigraph barrier makes slow, damped
/// progress from starts with large `‖w̃‖`, whereas the strongly convex
/// total-power barrier does not; its central point gives a peak start with
/// `max|w_k|² ≤ ‖w‖²`, within a factor `Nt` of the optimum.
fn total_power_center(sys: &ConstraintSystem, x: DVector<f64>, cfg: &SolverConfig) -> DVector<f64> {
    let prob = BarrierProblem::new(sys, Program::Total);
    let mut v = x.clone();
    let (t, _) = init_params(&prob, &v);
    let never = |_: &DVector<f64>| false;
    let centered = center(
        &prob,
        &mut v,
        t,
        cfg,
        2.0 * cfg.eps2,
        cfg.max_inner,
        StepMode::JointNewton,
        "warm",
        0,
        &mut Vec::new(),
        &never,
    );
    if centered.is_ok() && prob.min_slack(&v) > 0.0 {
        v
    } else {
        x
    }
}

/// Algorithm driver: phase I, parameter initialization, then centering and
/// barrier-weight updates until `count/t ≤ eps1`.
pub fn outer_loop(
    sys: &ConstraintSystem,
    kind: ProblemKind,
    cfg: &SolverConfig,
) -> Result<Solution> {
    cfg.validate()?;
    if sys.a_mat.ncols() != sys.n() || sys.b_mat.ncols() != sys.n() {
        return Err(Error::DimensionMismatch(
            "constraint system is malformed".into(),
        ));
    }
    let n = sys.n();
    let (x0, z0) = match phase1(sys, kind, cfg)? {
        Phase1Outcome::Feasible { x, z } => (x, z),
        Phase1Outcome::Infeasible { .. } => return Ok(infeasible(sys, kind)),
    };
    let prob = BarrierProblem::new(sys, kind.into());
    let mut v = DVector::zeros(prob.n_vars());
    v.rows_mut(0, n).copy_from(&x0);
    if let Some(z) = z0 {
        v[n] = z;
    }
    // the strongly convex total-power barrier needs no rescaling, and the
    // clamp at 1 is what lets trivial instances finish in a few passes
    let mut t = match kind {
        ProblemKind::TotalPower => init_params(&prob, &v).0,
        ProblemKind::PeakPower => initial_weight(sys, Program::Peak, &v),
    };
    let count = prob.barrier_count() as f64;
    let mut trace = Vec::new();
    let mut inner_total = 0;
    let mut outer = 0;
    let never = |_: &DVector<f64>| false;
    // gap test first, then centering at the current weight, then t ← μt
    while count / t > cfg.eps1 && outer < cfg.max_outer {
        outer += 1;
        let c = center(
            &prob,
            &mut v,
            t,
            cfg,
            2.0 * cfg.eps2,
            cfg.max_inner,
            cfg.step_mode,
            "center",
            outer,
            &mut trace,
            &never,
        )?;
        inner_total += c.iters;
        t *= cfg.mu;
    }
    let converged = count / t <= cfg.eps1;
    // final centering at the terminal weight, so the gap bound count/t holds
    // and the barrier multipliers are accurate duals
    // tolerance scaled to the magnitude of `t·obj`, below which κ is noise
    let polish_tol = POLISH_KAPPA * (t * prob.objective(&v).abs()).max(1.0);
    let c = center(
        &prob,
        &mut v,
        t,
        cfg,
        polish_tol,
        POLISH_STEPS,
        StepMode::JointNewton,
        "polish",
        outer,
        &mut trace,
        &never,
    )?;
    inner_total += c.iters;

    let mut sol = finalize(sys, &prob, kind, &v, t);
    sol.status = if converged {
        Status::Optimal
    } else {
        Status::MaxIters
    };
    sol.outer_iters = outer;
    sol.inner_iters = inner_total;
    sol.trace = trace;
    Ok(sol)
}

fn infeasible(sys: &ConstraintSystem, kind: ProblemKind) -> Solution {
    let x = DVector::zeros(sys.n());
    Solution {
        kind,
        status: Status::Infeasible,
        w: to_complex(&x),
        x,
        z: f64::INFINITY,
        objective: f64::INFINITY,
        outer_iters: 0,
        inner_iters: 0,
        kkt_stationarity: f64::INFINITY,
        kkt_feasibility: f64::INFINITY,
        kkt_complementarity: f64::INFINITY,
        nu: DVector::zeros(sys.r_a()),
        lambda: DVector::zeros(sys.r_b()),
        rho: DVector::zeros(0),
        t: 0.0,
        trace: Vec::new(),
    }
}

/// Recovers duals from the central-path relations `ν = 1/(t s)`,
/// `ρ = 1/(t u)`, fits `λ` by least squares, and tightens `z`.
fn finalize(
    sys: &ConstraintSystem,
    prob: &BarrierProblem,
    kind: ProblemKind,
    v: &DVector<f64>,
    t: f64,
) -> Solution {
    let n = sys.n();
    let x = v.rows(0, n).into_owned();
    let slacks = prob.linear_slacks(v);
    let epi = prob.epigraph_slacks(v);
    let z = peak_of(&x);
    let objective = match kind {
        ProblemKind::TotalPower => x.norm_squared(),
        ProblemKind::PeakPower => z,
    };
    let mut sol = Solution {
        kind,
        status: Status::Optimal,
        w: to_complex(&x),
        x,
        z,
        objective,
        outer_iters: 0,
        inner_iters: 0,
        kkt_stationarity: 0.0,
        kkt_feasibility: 0.0,
        kkt_complementarity: 0.0,
        nu: DVector::zeros(0),
        lambda: DVector::zeros(0),
        rho: DVector::zeros(0),
        t,
        trace: Vec::new(),
    };

    // Plain central-path duals `1/(t·slack)`, and the same corrected to
    // first order by one more Newton step, which removes most of the
    // residual centering error along stiff directions. Keep the better.
    let mut candidates = vec![(slacks.map(|s| 1.0 / (t * s)), epi.map(|u| 1.0 / (t * u)))];
    if let Ok(step) = newton_direction(prob, v, t, 0.0) {
        let d = &step.d;
        let gd = prob.g.rows(0, slacks.len()) * d;
        let nu = slacks.zip_map(&gd, |s, q| ((1.0 - q / s) / (t * s)).max(0.0));
        let rho = DVector::from_fn(epi.len(), |k, _| {
            let (re, im) = (v[k], v[prob.nt + k]);
            let du = d[n] - 2.0 * (re * d[k] + im * d[prob.nt + k]);
            ((1.0 - du / epi[k]) / (t * epi[k])).max(0.0)
        });
        candidates.push((nu, rho));
    }
    let mut best = f64::INFINITY;
    for (nu, rho) in candidates {
        let partial = stationarity_without_lambda(sys, kind, &sol.x, &nu, &rho);
        let lambda = lstsq(&sys.b_mat.transpose(), &(-partial));
        let trial = Solution {
            nu,
            rho,
            lambda,
            trace: Vec::new(),
            ..sol.clone()
        };
        let r = kkt_residual(&trial, sys, kind);
        if r.stationarity < best {
            best = r.stationarity;
            sol.nu = trial.nu;
            sol.rho = trial.rho;
            sol.lambda = trial.lambda;
            sol.kkt_stationarity = r.stationarity;
            sol.kkt_feasibility = r.feasibility;
            sol.kkt_complementarity = r.complementarity;
        }
    }
    sol
}

/// `∇_w̃ L` without the `Bᵀλ` term.
fn stationarity_without_lambda(
    sys: &ConstraintSystem,
    kind: ProblemKind,
    x: &DVector<f64>,
    nu: &DVector<f64>,
    rho: &DVector<f64>,
) -> DVector<f64> {
    let nt = sys.nt;
    let mut g = -sys.a_mat.tr_mul(nu);
    match kind {
        ProblemKind::TotalPower => g += x * 2.0,
        ProblemKind::PeakPower => {
            for k in 0..nt {
                g[k] += 2.0 * rho[k] * x[k];
                g[nt + k] += 2.0 * rho[k] * x[nt + k];
            }
        }
    }
    g
}

/// KKT residuals of `sol` for the Lagrangian
/// `obj − νᵀ(A w̃ − a) + λᵀ(B w̃ − b) + Σ ρ_k (|w_k|² − z)`.
///
/// Stationarity is `‖∇L‖∞ / max(1, ‖∇obj‖∞)` together with any sign
/// violation of `ν, ρ`; feasibility is the largest primal violation;
/// complementarity is the largest `|ν_k s_k|` or `|ρ_k u_k|`.
pub fn kkt_residual(sol: &Solution, sys: &ConstraintSystem, kind: ProblemKind) -> KktResiduals {
    let x = &sol.x;
    let nt = sys.nt;
    let mut grad = stationarity_without_lambda(sys, kind, x, &sol.nu, &sol.rho);
    if sys.r_b() > 0 {
        grad += sys.b_mat.tr_mul(&sol.lambda);
    }
    let (obj_scale, z_res) = match kind {
        ProblemKind::TotalPower => ((x * 2.0).amax(), 0.0),
        ProblemKind::PeakPower => (1.0, (1.0 - sol.rho.sum()).abs()),
    };
    let sign = sol
        .nu
        .iter()
        .chain(sol.rho.iter())
        .fold(0.0f64, |m, &v| m.max(-v));
    let stationarity = grad.amax().max(z_res) / obj_scale.max(1.0) + sign;

    let slacks = sys.slacks(x);
    let mut feasibility = slacks.iter().fold(0.0f64, |m, &s| m.max(-s));
    if sys.r_b() > 0 {
        feasibility = feasibility.max(sys.eq_residual(x).amax());
    }
    let mut complementarity = slacks
        .iter()
        .zip(sol.nu.iter())
        .fold(0.0f64, |m, (s, l)| m.max((s * l).abs()));
    if kind == ProblemKind::PeakPower {
        for k in 0..nt {
            let u = sol.z - x[k] * x[k] - x[nt + k] * x[nt + k];
            feasibility = feasibility.max(-u);
            if k < sol.rho.len() {
                complementarity = complementarity.max((u * sol.rho[k]).abs());
            }
        }
    }
    KktResiduals {
        stationarity,
        feasibility,
        complementarity,
    }
}

/// `min ‖w̃‖²` s.t. `A w̃ ≥ a`, `B w̃ = b`.
pub fn solve_total_power(sys: &ConstraintSystem, cfg: &SolverConfig) -> Result<Solution> {
    outer_loop(sys, ProblemKind::TotalPower, cfg)
}

/// `min z` s.t. `|w_k|² ≤ z`, `A w̃ ≥ a`, `B w̃ = b`.
pub fn solve_peak_power(sys: &ConstraintSystem, cfg: &SolverConfig) -> Result<Solution> {
    outer_loop(sys, ProblemKind::PeakPower, cfg)
}
