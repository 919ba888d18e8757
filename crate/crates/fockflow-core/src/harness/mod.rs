//! Suite orchestration, scenario sweeps, slope fitting and JSON reports.

mod report;
mod scenario;
mod suites;

use thiserror::Error;

pub use report::{digest, fit_slope, sub_seed, CaseRecord, CaseSummary, ConvergenceRecord, SuiteReport, Timing, EXACT_TOL, SCHEMA_VERSION, SLOPE_THRESHOLD};
pub use scenario::{load_config, parse_sweep, run_scenario, ScenarioKind, ScenarioOutput, MAX_DENSE_DIM, MAX_LOCAL_DIM};
pub use suites::{run_suite, SuiteOptions, BOUND_SLACK, DUALITY_TOL, SUITES};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown suite {0:?}; valid suites: {list}", list = SUITES.join(", "))]
    UnknownSuite(String),
    #[error("slope fit: {0}")]
    Fit(String),
    #[error("sweep: {0}")]
    Sweep(String),
    #[error("grid: {0}")]
    Grid(String),
    #[error("config: {0}")]
    Config(String),
    #[error("report: {0}")]
    Report(String),
    #[error("{0}")]
    Io(String),
    #[error("FOCKFLOW_THREADS: {0}")]
    Threads(String),
    #[error("check failed to run: {0}")]
    Check(String),
    #[error(transparent)]
    Kernel(#[from] crate::kernel_algebra::KernelError),
    #[error(transparent)]
    Fock(#[from] crate::fock_rep::FockError),
    #[error(transparent)]
    Evolution(#[from] crate::evolution::EvolutionError),
    #[error(transparent)]
    Flow(#[from] crate::flows::FlowError),
}

/// Cap the global rayon pool at `FOCKFLOW_THREADS` when set. Returns the cap.
pub fn configure_threads() -> Result<Option<usize>, HarnessError> {
    let v = match std::env::var("FOCKFLOW_THREADS") {
        Ok(v) => v,
        Err(_) => return Ok(None),
    };
    let k: usize = v.trim().parse().map_err(|_| HarnessError::Threads(format!("{v:?} is not a thread count")))?;
    if k == 0 {
        return Err(HarnessError::Threads("thread count must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| HarnessError::Threads(e.to_string()))?;
    Ok(Some(k))
}
