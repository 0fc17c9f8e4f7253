//! Monte Carlo link simulation.
//!
//! A scenario fixes the array sizes, the constellation, the design and a
//! grid of SNR and `d0` values. For every grid point the same `trials`
//! channels are drawn (quasi-static Rayleigh, one per trial), each carrying
//! `frames` frames of `Nr` symbols. The designed signal goes through
//! `y = Hw + n` with `σ² = 1` and is detected per antenna against the
//! `√γ`-scaled lattice.
//!
//! Draws depend only on `(seed, trial)`, so every grid point and every
//! precoder sees the same channels, symbols and noise; comparisons between
//! records of one scenario are paired.

pub mod channel;
pub mod zf;

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{build_system, to_complex, DesignMode, SymbolFrame};
use crate::constellation::Constellation;
use crate::solver::{
    solve_peak_power, solve_total_power, Solution, SolverConfig, Status, TraceRow,
};
use crate::{Error, Result};

pub use channel::{gen_channel, gen_noise, trial_rng};
pub use zf::{condition_number, zf_precoder, zf_signal};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Fixed,
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    Total,
    Peak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    None,
    Zf,
}

/// What produced the transmit vector of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precoder {
    Total,
    Peak,
    Zf,
}

impl From<Design> for Precoder {
    fn from(d: Design) -> Self {
        match d {
            Design::Total => Precoder::Total,
            Design::Peak => Precoder::Peak,
        }
    }
}

impl fmt::Display for Precoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precoder::Total => "total",
            Precoder::Peak => "peak",
            Precoder::Zf => "zf",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    /// Modulation order `M`.
    pub order: usize,
    pub nt: usize,
    pub nr: usize,
    pub snr_db: Vec<f64>,
    pub mode: ModeKind,
    /// Relaxation half-widths; ignored (treated as `[0]`) in fixed mode.
    pub d0: Vec<f64>,
    pub design: Design,
    pub benchmark: Benchmark,
    /// Channel realizations.
    pub trials: usize,
    /// Frames sent over each channel.
    pub frames: usize,
    pub seed: u64,
    /// Receiver noise variance. Always 1 outside of tests.
    pub noise_var: f64,
    pub solver: SolverConfig,
}

impl ScenarioConfig {
    /// A fixed-mode total-power scenario with desk-scale defaults.
    pub fn new(name: &str, order: usize, nt: usize, nr: usize, snr_db: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            order,
            nt,
            nr,
            snr_db,
            mode: ModeKind::Fixed,
            d0: vec![0.0],
            design: Design::Total,
            benchmark: Benchmark::None,
            trials: 100,
            frames: 100,
            seed: 0,
            noise_var: 1.0,
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| {
            Err(Error::Config {
                key: key.to_string(),
                message,
            })
        };
        let spec = Constellation::new(self.order).map_err(|e| Error::Config {
            key: "M".into(),
            message: e.to_string(),
        })?;
        if self.nr == 0 {
            return bad("nr", "must be at least 1".into());
        }
        if self.nt < self.nr {
            return bad(
                "nt",
                format!("need nt >= nr, got nt = {} < nr = {}", self.nt, self.nr),
            );
        }
        if self.trials == 0 {
            return bad("trials", "must be at least 1".into());
        }
        if self.frames == 0 {
            return bad("frames", "must be at least 1".into());
        }
        if self.snr_db.is_empty() {
            return bad("snr_db", "grid is empty".into());
        }
        if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return bad("snr_db", format!("{s} is not finite"));
        }
        match self.mode {
            ModeKind::Fixed => {
                if self.d0.iter().any(|&d| d != 0.0) {
                    return bad("d0", "only meaningful with mode = relaxed".into());
                }
            }
            ModeKind::Relaxed => {
                if !spec.has_inner_points() {
                    return bad(
                        "mode",
                        format!("{}-QAM has no inner points to relax", self.order),
                    );
                }
                if self.d0.is_empty() {
                    return bad("d0", "grid is empty".into());
                }
                let min_gamma = self
                    .snr_db
                    .iter()
                    .map(|&s| SymbolFrame::gamma_from_snr_db(s))
                    .fold(f64::INFINITY, f64::min);
                for &d in &self.d0 {
                    if !(d >= 0.0) || !d.is_finite() {
                        return bad("d0", format!("{d} must be finite and >= 0"));
                    }
                    if d >= min_gamma.sqrt() {
                        return bad(
                            "d0",
                            format!(
                                "{d} must stay below sqrt(gamma) = {} at the lowest SNR",
                                min_gamma.sqrt()
                            ),
                        );
                    }
                }
            }
        }
        if !(self.noise_var > 0.0) || !self.noise_var.is_finite() {
            return bad("noise_var", "must be positive".into());
        }
        self.solver.validate()
    }

    fn d0_grid(&self) -> Vec<f64> {
        match self.mode {
            ModeKind::Fixed => vec![0.0],
            ModeKind::Relaxed => self.d0.clone(),
        }
    }

    /// `(snr_db, d0)` grid, SNR-major.
    pub fn grid(&self) -> Vec<(f64, f64)> {
        let d0 = self.d0_grid();
        self.snr_db
            .iter()
            .flat_map(|&s| d0.iter().map(move |&d| (s, d)))
            .collect()
    }

    fn design_mode(&self, d0: f64) -> DesignMode {
        match self.mode {
            ModeKind::Fixed => DesignMode::Fixed,
            ModeKind::Relaxed => DesignMode::Relaxed { d0 },
        }
    }
}

/// Per-grid-point, per-precoder averages.
///
/// The first fifteen fields are the CSV columns; the rest are diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub scenario: String,
    pub key: String,
    pub order: usize,
    pub nt: usize,
    pub nr: usize,
    pub snr_db: f64,
    pub d0: f64,
    pub design: Precoder,
    /// Mean of `‖w‖²` over designed frames.
    pub avg_total_power: f64,
    /// Mean of `max_k |w_k|²` over designed frames.
    pub avg_peak_power: f64,
    pub ser: f64,
    pub ber: f64,
    /// `log2(M)·(1 − ser)/avg_total_power`.
    pub goodput: f64,
    /// 95% normal-approximation half-width of `ser`.
    pub ci_ser: f64,
    /// Frames whose design failed and were excluded from the averages.
    pub infeasible_count: u64,
    /// Frames that entered the averages.
    pub frames: u64,
    pub symbols: u64,
    /// SER of `√γ·s + n` through an identity channel with the same noise.
    pub genie_ser: f64,
    pub genie_ci: f64,
}

/// Outcome of one designed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    /// `None` when no design exists (infeasible program or singular ZF).
    pub w: Option<Vec<Complex64>>,
    pub total_power: f64,
    pub peak_power: f64,
    pub symbol_errors: u32,
    pub bit_errors: u32,
    pub genie_errors: u32,
    pub status: Option<Status>,
    pub trace: Vec<TraceRow>,
}

impl TrialRecord {
    pub fn feasible(&self) -> bool {
        self.w.is_some()
    }
}

fn infeasible_record(status: Option<Status>, trace: Vec<TraceRow>) -> TrialRecord {
    TrialRecord {
        w: None,
        total_power: f64::NAN,
        peak_power: f64::NAN,
        symbol_errors: 0,
        bit_errors: 0,
        genie_errors: 0,
        status,
        trace,
    }
}

/// Designs the transmit vector for one frame, sends it through `y = Hw + n`
/// and counts detection errors. The noise is drawn before designing, so
/// the stream stays aligned whether or not the design succeeds.
pub fn run_trial<R: Rng + ?Sized>(
    precoder: Precoder,
    solver: &SolverConfig,
    h: &DMatrix<Complex64>,
    frame: &SymbolFrame,
    noise_var: f64,
    rng: &mut R,
) -> Result<TrialRecord> {
    let noise = gen_noise(frame.nr(), noise_var, rng)?;
    let w = match precoder {
        Precoder::Zf => match zf_precoder(h) {
            Ok(pre) => zf_signal(&pre, frame)?,
            Err(Error::RankDeficient(_)) => return Ok(infeasible_record(None, Vec::new())),
            Err(e) => return Err(e),
        },
        Precoder::Total | Precoder::Peak => {
            let sys = build_system(frame, h)?;
            let sol: Solution = match precoder {
                Precoder::Total => solve_total_power(&sys, solver)?,
                _ => solve_peak_power(&sys, solver)?,
            };
            if sol.status == Status::Infeasible {
                return Ok(infeasible_record(Some(sol.status), sol.trace));
            }
            let w = to_complex(&sol.x);
            return Ok(finish(w, h, frame, &noise, Some(sol.status), sol.trace));
        }
    };
    Ok(finish(w, h, frame, &noise, None, Vec::new()))
}

fn finish(
    w: Vec<Complex64>,
    h: &DMatrix<Complex64>,
    frame: &SymbolFrame,
    noise: &DVector<Complex64>,
    status: Option<Status>,
    trace: Vec<TraceRow>,
) -> TrialRecord {
    let spec = &frame.constellation;
    let y = h * DVector::from_column_slice(&w) + noise;
    let targets = frame.scaled_symbols();
    let (mut sym, mut bits, mut genie) = (0, 0, 0);
    for (n, &s) in frame.symbols.iter().enumerate() {
        // finite inputs and a positive γ were checked upstream
        let got = spec.detect(y[n], frame.gamma).expect("finite sample");
        if got != s {
            sym += 1;
            bits += spec.bit_errors(s, got).expect("valid indices");
        }
        if spec
            .detect(targets[n] + noise[n], frame.gamma)
            .expect("finite sample")
            != s
        {
            genie += 1;
        }
    }
    let total_power = w.iter().map(|v| v.norm_sqr()).sum();
    let peak_power = w.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    TrialRecord {
        w: Some(w),
        total_power,
        peak_power,
        symbol_errors: sym,
        bit_errors: bits,
        genie_errors: genie,
        status,
        trace,
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn value(&self) -> f64 {
        self.s + self.c
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    frames: u64,
    infeasible: u64,
    power: Sum,
    peak: Sum,
    symbol_errors: u64,
    bit_errors: u64,
    genie_errors: u64,
}

impl Tally {
    fn push(&mut self, r: &TrialRecord) {
        if !r.feasible() {
            self.infeasible += 1;
            return;
        }
        self.frames += 1;
        self.power.add(r.total_power);
        self.peak.add(r.peak_power);
        self.symbol_errors += r.symbol_errors as u64;
        self.bit_errors += r.bit_errors as u64;
        self.genie_errors += r.genie_errors as u64;
    }

    fn merge(&mut self, o: &Tally) {
        self.frames += o.frames;
        self.infeasible += o.infeasible;
        self.power.add(o.power.value());
        self.peak.add(o.peak.value());
        self.symbol_errors += o.symbol_errors;
        self.bit_errors += o.bit_errors;
        self.genie_errors += o.genie_errors;
    }
}

/// Flags that change how, not what, a scenario computes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Run the trials of a grid point on the rayon pool.
    pub parallel: bool,
    /// Keep the Newton trace of the very first design solve.
    pub trace_first_solve: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ScenarioOutput {
    pub records: Vec<MetricsRecord>,
    pub trace: Vec<TraceRow>,
}

struct TrialTallies {
    tallies: Vec<Tally>,
    trace: Vec<TraceRow>,
}

fn run_channel(
    cfg: &ScenarioConfig,
    precoders: &[Precoder],
    gamma: f64,
    mode: DesignMode,
    trial: usize,
    trace_first: bool,
) -> Result<TrialTallies> {
    let spec = Constellation::new(cfg.order)?;
    let mut rng = trial_rng(cfg.seed, trial as u64);
    let h = gen_channel(cfg.nr, cfg.nt, &mut rng)?;
    let mut tallies = vec![Tally::default(); precoders.len()];
    let mut trace = Vec::new();
    for f in 0..cfg.frames {
        let symbols = (0..cfg.nr).map(|_| rng.gen_range(0..cfg.order)).collect();
        let frame = SymbolFrame::with_constellation(spec.clone(), symbols, mode, gamma)?;
        // every precoder replays the same noise draw
        let noise_state = rng.clone();
        for (p, tally) in precoders.iter().zip(tallies.iter_mut()) {
            let mut noise_rng = noise_state.clone();
            let want_trace = trace_first && f == 0 && *p != Precoder::Zf && trace.is_empty();
            let solver = SolverConfig {
                trace: want_trace,
                ..cfg.solver.clone()
            };
            let rec = run_trial(*p, &solver, &h, &frame, cfg.noise_var, &mut noise_rng)?;
            if want_trace {
                trace = rec.trace.clone();
            }
            tally.push(&rec);
            rng = noise_rng;
        }
    }
    Ok(TrialTallies { tallies, trace })
}

fn to_record(
    cfg: &ScenarioConfig,
    precoder: Precoder,
    snr_db: f64,
    d0: f64,
    t: &Tally,
) -> MetricsRecord {
    let spec_bits = (cfg.order as f64).log2();
    let symbols = t.frames * cfg.nr as u64;
    let n = symbols as f64;
    let ser = t.symbol_errors as f64 / n;
    let ber = t.bit_errors as f64 / (n * spec_bits);
    let genie_ser = t.genie_errors as f64 / n;
    let ci = |p: f64| Z95 * (p * (1.0 - p) / n).sqrt();
    let avg_total_power = t.power.value() / t.frames as f64;
    MetricsRecord {
        scenario: cfg.name.clone(),
        key: format!("{}/snr={snr_db}/d0={d0}/{precoder}", cfg.name),
        order: cfg.order,
        nt: cfg.nt,
        nr: cfg.nr,
        snr_db,
        d0,
        design: precoder,
        avg_total_power,
        avg_peak_power: t.peak.value() / t.frames as f64,
        ser,
        ber,
        goodput: spec_bits * (1.0 - ser) / avg_total_power,
        ci_ser: ci(ser),
        infeasible_count: t.infeasible,
        frames: t.frames,
        symbols,
        genie_ser,
        genie_ci: ci(genie_ser),
    }
}

/// Runs every grid point and hands each record to `sink` as soon as it is
/// complete, so a failure part-way through keeps what was already produced.
pub fn run_scenario_streaming(
    cfg: &ScenarioConfig,
    opts: RunOptions,
    sink: &mut dyn FnMut(&MetricsRecord) -> Result<()>,
) -> Result<Vec<TraceRow>> {
    cfg.validate()?;
    let mut first_trace: Vec<TraceRow> = Vec::new();
    for (gi, (snr_db, d0)) in cfg.grid().into_iter().enumerate() {
        let gamma = SymbolFrame::gamma_from_snr_db(snr_db);
        let mode = cfg.design_mode(d0);
        let mut precoders = vec![Precoder::from(cfg.design)];
        // the benchmark does not depend on d0; report it once per SNR
        if cfg.benchmark == Benchmark::Zf && (d0 == cfg.d0_grid()[0]) {
            precoders.push(Precoder::Zf);
        }
        let trace_first = opts.trace_first_solve && gi == 0;
        let job = |trial: usize| {
            run_channel(
                cfg,
                &precoders,
                gamma,
                mode,
                trial,
                trace_first && trial == 0,
            )
        };
        let per_trial: Vec<TrialTallies> = if opts.parallel {
            (0..cfg.trials)
                .into_par_iter()
                .map(job)
                .collect::<Result<_>>()?
        } else {
            (0..cfg.trials).map(job).collect::<Result<_>>()?
        };
        let mut totals = vec![Tally::default(); precoders.len()];
        for tt in &per_trial {
            for (acc, t) in totals.iter_mut().zip(&tt.tallies) {
                acc.merge(t);
            }
        }
        if trace_first {
            first_trace = per_trial[0].trace.clone();
        }
        for (p, t) in precoders.iter().zip(&totals) {
            sink(&to_record(cfg, *p, snr_db, d0, t))?;
        }
    }
    Ok(first_trace)
}

pub fn run_scenario_with(cfg: &ScenarioConfig, opts: RunOptions) -> Result<ScenarioOutput> {
    let mut records = Vec::new();
    let trace = run_scenario_streaming(cfg, opts, &mut |r| {
        records.push(r.clone());
        Ok(())
    })?;
    Ok(ScenarioOutput { records, trace })
}

/// One record per grid point and precoder, sequential, no trace.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<MetricsRecord>> {
    Ok(run_scenario_with(cfg, RunOptions::default())?.records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(order: usize) -> ScenarioConfig {
        ScenarioConfig {
            trials: 4,
            frames: 5,
            seed: 21,
            ..ScenarioConfig::new("t", order, 3, 2, vec![10.0])
        }
    }

    #[test]
    fn neumaier_recovers_cancellation() {
        let mut s = Sum::default();
        for x in [1e16, 1.0, -1e16, 1.0] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn noiseless_fixed_design_decodes_everything() {
        for order in [4, 8, 16, 32] {
            let cfg = ScenarioConfig {
                noise_var: 1e-20,
                benchmark: Benchmark::Zf,
                ..small(order)
            };
            for r in run_scenario(&cfg).unwrap() {
                assert_eq!(r.ser, 0.0, "{}", r.key);
                assert_eq!(r.ber, 0.0);
                assert_eq!(r.infeasible_count, 0);
            }
        }
    }

    #[test]
    fn per_frame_orderings() {
        let spec = Constellation::new(16).unwrap();
        let solver = SolverConfig::tight();
        let mut rng = trial_rng(4, 0);
        for _ in 0..10 {
            let h = gen_channel(2, 3, &mut rng).unwrap();
            let symbols = vec![rng.gen_range(0..16), rng.gen_range(0..16)];
            let fixed = SymbolFrame::with_constellation(
                spec.clone(),
                symbols.clone(),
                DesignMode::Fixed,
                10.0,
            )
            .unwrap();
            let relaxed = SymbolFrame {
                mode: DesignMode::Relaxed { d0: 0.5 },
                ..fixed.clone()
            };
            let run = |p, f: &SymbolFrame| {
                run_trial(p, &solver, &h, f, 1.0, &mut trial_rng(0, 0)).unwrap()
            };
            let total = run(Precoder::Total, &fixed);
            let peak = run(Precoder::Peak, &fixed);
            let zf = run(Precoder::Zf, &fixed);
            let rel = run(Precoder::Total, &relaxed);
            let tol = solver.eps1;
            assert!(total.total_power <= zf.total_power + tol);
            assert!(total.total_power <= peak.total_power + tol);
            assert!(peak.peak_power <= total.peak_power + tol);
            assert!(rel.total_power <= total.total_power + tol);
        }
    }

    #[test]
    fn goodput_and_bounds() {
        let cfg = ScenarioConfig {
            benchmark: Benchmark::Zf,
            ..small(16)
        };
        let recs = run_scenario(&cfg).unwrap();
        assert_eq!(recs.len(), 2);
        for r in &recs {
            assert!((0.0..=1.0).contains(&r.ser) && (0.0..=1.0).contains(&r.ber));
            assert!(r.avg_peak_power <= r.avg_total_power);
            let g = 4.0 * (1.0 - r.ser) / r.avg_total_power;
            assert!((r.goodput - g).abs() <= 1e-12 * g);
            assert_eq!(r.frames + r.infeasible_count, 20);
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let cfg = ScenarioConfig {
            mode: ModeKind::Relaxed,
            d0: vec![0.0, 0.5],
            snr_db: vec![5.0, 10.0],
            ..small(16)
        };
        let seq = run_scenario_with(&cfg, RunOptions::default()).unwrap();
        let par = run_scenario_with(
            &cfg,
            RunOptions {
                parallel: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(seq.records, par.records);
        assert_eq!(seq.records.len(), 4);
    }

    #[test]
    fn trace_is_captured_once() {
        let cfg = small(4);
        let out = run_scenario_with(
            &cfg,
            RunOptions {
                trace_first_solve: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!out.trace.is_empty());
    }

    #[test]
    fn validation() {
        assert!(ScenarioConfig { nt: 1, ..small(4) }.validate().is_err());
        assert!(ScenarioConfig {
            trials: 0,
            ..small(4)
        }
        .validate()
        .is_err());
        assert!(ScenarioConfig {
            snr_db: vec![],
            ..small(4)
        }
        .validate()
        .is_err());
        assert!(ScenarioConfig {
            mode: ModeKind::Relaxed,
            d0: vec![0.5],
            ..small(8)
        }
        .validate()
        .is_err());
        assert!(ScenarioConfig {
            mode: ModeKind::Relaxed,
            d0: vec![5.0],
            ..small(16)
        }
        .validate()
        .is_err());
        assert!(ScenarioConfig {
            d0: vec![0.5],
            ..small(16)
        }
        .validate()
        .is_err());
        assert!(ScenarioConfig {
            order: 64,
            ..small(16)
        }
        .validate()
        .is_err());
    }
}
