//! Batch front-end used by the `dmqam` binary: configuration parsing,
//! scenario dispatch, CSV/SVG/JSON outputs, the solver-vs-oracle check and
//! region dumps.

pub mod config;
pub mod csv;
pub mod plot;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::assembly::{build_system, DesignMode, SymbolFrame};
use crate::constellation::{Constellation, SetLabel};
use crate::regions::{extended_region, relaxed_region};
use crate::sim::{
    gen_channel, run_scenario_streaming, trial_rng, Design, MetricsRecord, RunOptions,
    ScenarioConfig,
};
use crate::solver::{
    active_set_oracle_hinted, solve_peak_power, solve_total_power, trace_to_tsv, ProblemKind,
    SolverConfig, Status,
};
use crate::{Error, Result};

pub use config::parse_config;
pub use csv::{emit_csv, to_csv};
pub use plot::{emit_plot, PlotKind, Series};

pub const CSV_FILE: &str = "results.csv";
pub const PLOT_FILE: &str = "results.svg";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to reproduce a run's CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_path: String,
    /// Scenarios after seed overrides.
    pub scenarios: Vec<ScenarioConfig>,
    pub out_dir: String,
    pub seed: Option<u64>,
    pub tool_version: String,
    /// Seconds since the Unix epoch at the start of the run.
    pub timestamp: u64,
    pub elapsed_seconds: f64,
    pub parallel: bool,
    pub failures: Vec<ScenarioFailure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioFailure {
    pub scenario: String,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    /// Overrides every scenario's seed.
    pub seed: Option<u64>,
    pub parallel: bool,
    pub trace_solver: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub records: Vec<MetricsRecord>,
    pub failures: Vec<ScenarioFailure>,
    pub manifest: RunManifest,
}

impl RunSummary {
    pub fn success(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs every scenario in order. A failing scenario is reported and
/// skipped; records are written to the CSV as soon as they exist.
pub fn scenario_dispatch(configs: &[ScenarioConfig], req: &RunRequest) -> Result<RunSummary> {
    let started = Instant::now();
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    fs::create_dir_all(&req.out_dir)?;
    let scenarios: Vec<ScenarioConfig> = configs
        .iter()
        .map(|c| ScenarioConfig {
            seed: req.seed.unwrap_or(c.seed),
            ..c.clone()
        })
        .collect();
    let opts = RunOptions {
        parallel: req.parallel,
        trace_first_solve: req.trace_solver,
    };

    let mut csv_out = BufWriter::new(fs::File::create(req.out_dir.join(CSV_FILE))?);
    csv_out.write_all(csv::HEADER.as_bytes())?;
    csv_out.write_all(b"\n")?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (i, cfg) in scenarios.iter().enumerate() {
        let mut sink = |r: &MetricsRecord| -> Result<()> {
            csv_out.write_all(csv::csv_row(r).as_bytes())?;
            csv_out.write_all(b"\n")?;
            csv_out.flush()?;
            records.push(r.clone());
            Ok(())
        };
        match run_scenario_streaming(cfg, opts, &mut sink) {
            Ok(trace) => {
                if req.trace_solver && !trace.is_empty() {
                    fs::write(
                        req.out_dir.join(format!("trace_{i}.tsv")),
                        trace_to_tsv(&trace),
                    )?;
                }
            }
            Err(e) => failures.push(ScenarioFailure {
                scenario: cfg.name.clone(),
                error: e.to_string(),
            }),
        }
    }
    csv_out.flush()?;
    drop(csv_out);
    if !records.is_empty() {
        fs::write(req.out_dir.join(PLOT_FILE), plot::records_chart(&records)?)?;
    }
    let manifest = RunManifest {
        config_path: req.config_path.display().to_string(),
        scenarios,
        out_dir: req.out_dir.display().to_string(),
        seed: req.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp,
        elapsed_seconds: started.elapsed().as_secs_f64(),
        parallel: req.parallel,
        failures: failures.clone(),
    };
    fs::write(
        req.out_dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(RunSummary {
        records,
        failures,
        manifest,
    })
}

/// Reads, parses and dispatches a configuration file.
pub fn run_config_file(req: &RunRequest) -> Result<RunSummary> {
    let text = fs::read_to_string(&req.config_path)?;
    let configs = parse_config(&text)?;
    scenario_dispatch(&configs, req)
}

/// Solver-vs-oracle agreement over the instances a scenario would draw.
#[derive(Debug, Clone, Default, Serialize)]
pub struct OracleReport {
    pub instances: usize,
    /// Instances the oracle could not enumerate.
    pub skipped: usize,
    pub infeasible: usize,
    pub worst_rel_error: f64,
    pub worst_stationarity: f64,
    pub worst_feasibility: f64,
    pub failures: Vec<String>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub const ORACLE_REL_TOL: f64 = 1e-4;
pub const KKT_TOL: f64 = 1e-6;

/// Solves every frame of every grid point with tight tolerances and checks
/// the result against the enumerating oracle.
pub fn oracle_check(configs: &[ScenarioConfig]) -> Result<OracleReport> {
    let solver = SolverConfig::tight();
    let mut rep = OracleReport::default();
    for cfg in configs {
        cfg.validate()?;
        let spec = Constellation::new(cfg.order)?;
        let kind = match cfg.design {
            Design::Total => ProblemKind::TotalPower,
            Design::Peak => ProblemKind::PeakPower,
        };
        for (snr, d0) in cfg.grid() {
            let gamma = SymbolFrame::gamma_from_snr_db(snr);
            let mode = match cfg.mode {
                crate::sim::ModeKind::Fixed => DesignMode::Fixed,
                crate::sim::ModeKind::Relaxed => DesignMode::Relaxed { d0 },
            };
            for trial in 0..cfg.trials {
                let mut rng = trial_rng(cfg.seed, trial as u64);
                let h = gen_channel(cfg.nr, cfg.nt, &mut rng)?;
                for f in 0..cfg.frames {
                    use rand::Rng;
                    let symbols = (0..cfg.nr).map(|_| rng.gen_range(0..cfg.order)).collect();
                    let frame =
                        SymbolFrame::with_constellation(spec.clone(), symbols, mode, gamma)?;
                    let sys = build_system(&frame, &h)?;
                    let tag = format!("{} snr={snr} d0={d0} trial={trial} frame={f}", cfg.name);
                    rep.instances += 1;
                    let sol = match kind {
                        ProblemKind::TotalPower => solve_total_power(&sys, &solver)?,
                        ProblemKind::PeakPower => solve_peak_power(&sys, &solver)?,
                    };
                    let orc = match active_set_oracle_hinted(&sys, kind, &sol) {
                        Ok(o) => o,
                        Err(Error::EnumerationBound(_)) => {
                            rep.skipped += 1;
                            continue;
                        }
                        Err(e) => {
                            rep.failures.push(format!("{tag}: oracle error: {e}"));
                            continue;
                        }
                    };
                    if sol.status == Status::Infeasible || orc.status == Status::Infeasible {
                        if sol.status != orc.status {
                            rep.failures.push(format!(
                                "{tag}: solver says {:?}, oracle says {:?}",
                                sol.status, orc.status
                            ));
                        } else {
                            rep.infeasible += 1;
                        }
                        continue;
                    }
                    let rel =
                        (sol.objective - orc.objective).abs() / orc.objective.abs().max(1e-12);
                    rep.worst_rel_error = rep.worst_rel_error.max(rel);
                    rep.worst_stationarity = rep.worst_stationarity.max(sol.kkt_stationarity);
                    rep.worst_feasibility = rep.worst_feasibility.max(sol.kkt_feasibility);
                    if sol.status != Status::Optimal
                        || rel > ORACLE_REL_TOL
                        || sol.kkt_stationarity > KKT_TOL
                        || sol.kkt_feasibility > KKT_TOL
                    {
                        rep.failures.push(format!(
                            "{tag}: status {:?}, objective {} vs oracle {} (rel {rel:.3e}), stationarity {:.3e}, feasibility {:.3e}",
                            sol.status, sol.objective, orc.objective, sol.kkt_stationarity, sol.kkt_feasibility
                        ));
                    }
                }
            }
        }
    }
    Ok(rep)
}

/// Region polygons of every point of `M`-QAM at amplification `gamma`,
/// clipped to a box around the constellation, as CSV.
///
/// With `d0`, inner points get their relaxed square instead.
pub fn regions_dump(order: usize, gamma: f64, d0: Option<f64>) -> Result<String> {
    let spec = Constellation::new(order)?;
    if d0.is_some() && !spec.has_inner_points() {
        return Err(Error::RelaxedUnsupported(order));
    }
    let reach = spec
        .lattice()
        .iter()
        .map(|&(x, y)| x.abs().max(y.abs()))
        .max()
        .unwrap_or(1);
    let bound = (reach + 2) as f64 * gamma.sqrt();
    let mut out = String::from("index,re,im,set,label,vertex,x,y\n");
    for i in 0..order {
        let set = spec.classify(i)?;
        let rc = match d0 {
            Some(d) if set == SetLabel::S4 => relaxed_region(&spec, i, gamma, d)?,
            _ => extended_region(&spec, i, gamma)?,
        };
        let p = spec.point(i)?;
        for (v, q) in rc.polygon(bound).iter().enumerate() {
            out.push_str(&format!(
                "{i},{},{},{set},{},{v},{:.11e},{:.11e}\n",
                p.re,
                p.im,
                spec.gray_bits(i)?,
                q.re,
                q.im
            ));
        }
    }
    Ok(out)
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}
