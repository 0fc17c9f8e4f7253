use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dmqam::cli::{self, RunRequest};

#[derive(Parser)]
#[command(
    name = "dmqam",
    version,
    about = "Symbol-level directional-modulation precoding for M-QAM"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario of a config file; writes CSV, SVG and a manifest.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the seed of every scenario.
        #[arg(long)]
        seed: Option<u64>,
        /// Run the trials of each grid point concurrently.
        #[arg(long)]
        parallel: bool,
        /// Write the Newton trace of each scenario's first solve.
        #[arg(long)]
        trace_solver: bool,
    },
    /// Compare the interior-point solver against the active-set oracle on
    /// every instance the config would draw.
    OracleCheck { config: PathBuf },
    /// Region inspection.
    Regions {
        #[command(subcommand)]
        action: RegionsAction,
    },
}

#[derive(Subcommand)]
enum RegionsAction {
    /// Print detection-region polygons as CSV.
    Dump {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        gamma: f64,
        /// Use relaxed squares of this half-width for inner points.
        #[arg(long)]
        d0: Option<f64>,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(args: Cli) -> dmqam::Result<ExitCode> {
    match args.command {
        Command::Run {
            config,
            out,
            seed,
            parallel,
            trace_solver,
        } => {
            let req = RunRequest {
                config_path: config,
                out_dir: out,
                seed,
                parallel,
                trace_solver,
            };
            let summary = cli::run_config_file(&req)?;
            println!(
                "{} records written to {} in {:.1}s",
                summary.records.len(),
                req.out_dir.display(),
                summary.manifest.elapsed_seconds
            );
            if summary.success() {
                return Ok(ExitCode::SUCCESS);
            }
            eprintln!("{} scenario(s) failed:", summary.failures.len());
            for f in &summary.failures {
                eprintln!("  {}: {}", f.scenario, f.error);
            }
            Ok(ExitCode::FAILURE)
        }
        Command::OracleCheck { config } => {
            let text = std::fs::read_to_string(&config)?;
            let rep = cli::oracle_check(&cli::parse_config(&text)?)?;
            println!(
                "instances {} skipped {} infeasible {} worst rel {:.3e} stationarity {:.3e} feasibility {:.3e}",
                rep.instances,
                rep.skipped,
                rep.infeasible,
                rep.worst_rel_error,
                rep.worst_stationarity,
                rep.worst_feasibility
            );
            for f in &rep.failures {
                println!("FAIL {f}");
            }
            Ok(if rep.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Regions {
            action: RegionsAction::Dump { m, gamma, d0, out },
        } => {
            let text = cli::regions_dump(m, gamma, d0)?;
            match out {
                Some(p) => cli::write_file(&p, &text)?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
