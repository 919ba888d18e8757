use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fockflow_core::harness::{
    configure_threads, load_config, parse_sweep, run_scenario, run_suite, HarnessError, ScenarioKind, SuiteOptions, SuiteReport, EXACT_TOL,
};

/// Verification suites and grid sweeps for discrete quantum stochastic calculus.
///
/// Exit status is 0 when every case passes, 1 when some case fails and 2 on
/// errors. FOCKFLOW_THREADS caps the worker threads.
#[derive(Parser, Debug)]
#[command(name = "fockflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one named test battery.
    Verify {
        /// exact-identities, multiplicativity, ito, evolution, pseudo-fock, flows or norms.
        #[arg(long)]
        suite: String,
        /// Comma-separated grid sizes; each suite has a default.
        #[arg(long, value_delimiter = ',')]
        grids: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Tolerance of exact identities.
        #[arg(long, default_value_t = EXACT_TOL)]
        tol: f64,
        /// Random instances per check; each suite has a default.
        #[arg(long)]
        samples: Option<usize>,
        /// JSON report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the unitarity defect of a scenario's evolution over grid sizes.
    Evolve(ScenarioArgs),
    /// Sweep the homomorphism defect of a scenario's flow over grid sizes.
    Flow(ScenarioArgs),
    /// Check the norm estimates on random instances.
    Norms {
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args, Debug)]
struct ScenarioArgs {
    /// Scenario TOML file.
    #[arg(long)]
    config: PathBuf,
    /// Grid sizes such as M=1..16 or M=2,4,8; the configured grid when absent.
    #[arg(long, default_value = "")]
    sweep: String,
    /// Seed of the power iterations.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report path; defaults to the CSV path with a .json extension.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn write(path: Option<&Path>, text: &str) -> Result<(), HarnessError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| HarnessError::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn finish(report: &SuiteReport) -> bool {
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    eprint!("{}", report.render());
    report.pass
}

fn report_path(a: &ScenarioArgs) -> Option<PathBuf> {
    match (&a.report, &a.out) {
        (Some(r), _) => Some(r.clone()),
        (None, Some(o)) if o.extension().is_some_and(|e| e == "json") => Some(o.with_extension("report.json")),
        (None, Some(o)) => Some(o.with_extension("json")),
        (None, None) => None,
    }
}

fn scenario(kind: ScenarioKind, a: &ScenarioArgs) -> Result<bool, HarnessError> {
    let cfg = load_config(&a.config)?;
    let sweep = parse_sweep(&a.sweep)?;
    let out = run_scenario(kind, &cfg, &sweep, a.seed)?;
    write(a.out.as_deref(), &out.csv)?;
    if let Some(p) = report_path(a) {
        write(Some(&p), &out.report.to_json())?;
    }
    Ok(finish(&out.report))
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    configure_threads()?;
    match cli.command {
        Command::Verify { suite, grids, seed, tol, samples, out } => {
            let r = run_suite(&suite, &SuiteOptions { grids, seed, tolerance: tol, samples })?;
            write(out.as_deref(), &r.to_json())?;
            Ok(finish(&r))
        }
        Command::Evolve(a) => scenario(ScenarioKind::Evolve, &a),
        Command::Flow(a) => scenario(ScenarioKind::Flow, &a),
        Command::Norms { samples, seed, out } => {
            let r = run_suite("norms", &SuiteOptions { seed, samples, ..SuiteOptions::default() })?;
            write(out.as_deref(), &r.to_json())?;
            Ok(finish(&r))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
