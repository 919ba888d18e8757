//! Grid sweeps of a scenario document, written as CSV.

use std::path::Path;

use rayon::prelude::*;

use super::report::{CaseRecord, ConvergenceRecord, SuiteReport, EXACT_TOL, SLOPE_THRESHOLD};
use super::HarnessError;
use crate::evolution::{local_evolution, pseudo_unitarity_check, unitarity_defect_local, vacuum_block, ScenarioConfig};
use crate::flows::{homomorphism_defect, scenario_map, InitialMap};
use crate::linalg::C64;

/// Largest product dimension `n(1+d)^M` for the matrix-free evolution sweep.
pub const MAX_LOCAL_DIM: usize = 1 << 22;
/// Largest Fock dimension `n(1+d)^M` for the dense flow sweep.
pub const MAX_DENSE_DIM: usize = 512;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    /// `‖U^{t*}U^t − 1‖` and the vacuum amplitude at `t = t_max`.
    Evolve,
    /// `‖j^t(A*A) − j^t(A)*j^t(A)‖` at `t = t_max`.
    Flow,
}

#[derive(Clone, Debug)]
pub struct ScenarioOutput {
    pub csv: String,
    pub report: SuiteReport,
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    ScenarioConfig::from_toml(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

/// `M=2,4,8`, `M=1..16` or a mix such as `M=1..4,8`. Empty input is an empty sweep.
pub fn parse_sweep(text: &str) -> Result<Vec<usize>, HarnessError> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let body = text.strip_prefix("M=").ok_or_else(|| HarnessError::Sweep(format!("{text:?}: expected M=LIST")))?;
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| HarnessError::Sweep(format!("{s:?} is not a grid size")));
    let mut out = Vec::new();
    for part in body.split(',').filter(|p| !p.trim().is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(HarnessError::Sweep(format!("empty range {a}..{b}")));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    if out.contains(&0) {
        return Err(HarnessError::Sweep("grid sizes must be positive".into()));
    }
    Ok(out)
}

/// `dx` of the configured grid with `m` points: the largest weight.
fn step(c: &ScenarioConfig, m: usize) -> Result<f64, HarnessError> {
    let g = c.grid_with(m)?;
    Ok((0..g.len()).map(|p| g.weight(p)).fold(0.0, f64::max))
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Sweep a scenario over grid sizes; an empty sweep uses the configured size.
pub fn run_scenario(kind: ScenarioKind, c: &ScenarioConfig, sweep: &[usize], seed: u64) -> Result<ScenarioOutput, HarnessError> {
    let grids = if sweep.is_empty() { vec![c.grid.points] } else { sweep.to_vec() };
    let (n, d) = (c.system.dim, c.noise.dim);
    let t = c.grid.t_max;
    let name = match kind {
        ScenarioKind::Evolve => "evolve",
        ScenarioKind::Flow => "flow",
    };
    let mut report = SuiteReport::new(name, seed, grids.clone(), EXACT_TOL);
    for &m in &grids {
        let dim = (1 + d).checked_pow(m as u32).and_then(|x| x.checked_mul(n)).unwrap_or(usize::MAX);
        let limit = if kind == ScenarioKind::Evolve { MAX_LOCAL_DIM } else { MAX_DENSE_DIM };
        if dim > limit {
            return Err(HarnessError::Sweep(format!("M={m}: dimension {dim} exceeds {limit} for the {name} sweep")));
        }
    }
    let g0 = c.grid_with(grids[0])?;
    if let Some(h) = c.hamiltonian_field(&g0)? {
        let e = h.pseudo_hermitian_defect();
        if e > EXACT_TOL {
            report.warnings.push(format!("Hamiltonian is not pseudo-Hermitian (defect {e:.3e}); the evolution need not be unitary"));
        }
    } else {
        let e = pseudo_unitarity_check(&[c.point_generator()?]);
        if e > EXACT_TOL {
            report.warnings.push(format!("point matrix is not pseudo-unitary (defect {e:.3e}); the evolution need not be unitary"));
        }
    }
    let start = std::time::Instant::now();
    let rows: Vec<(f64, Option<C64>)> = grids
        .par_iter()
        .map(|&m| -> Result<(f64, Option<C64>), HarnessError> {
            let g = c.grid_with(m)?;
            match kind {
                ScenarioKind::Evolve => {
                    let f = c.field(&g)?;
                    let defect = unitarity_defect_local(t, &f, 2.0, 0.5, seed);
                    let vac = vacuum_block(&local_evolution(t, &f, &c.initial()?))[(0, 0)];
                    Ok((defect, Some(vac)))
                }
                ScenarioKind::Flow => {
                    let (map, a) = scenario_map(c, &g)?;
                    Ok((homomorphism_defect(t, &map, &InitialMap::identity(n), &a, 2.0, 0.5), None))
                }
            }
        })
        .collect::<Result<_, _>>()?;
    report.time("sweep", start.elapsed().as_secs_f64());
    let dx: Vec<f64> = grids.iter().map(|&m| step(c, m)).collect::<Result<_, _>>()?;
    let defects: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let col = match kind {
        ScenarioKind::Evolve => "unitarity_defect",
        ScenarioKind::Flow => "homomorphism_defect",
    };
    let mut csv = format!("M,dx,{col},slope_estimate");
    if kind == ScenarioKind::Evolve {
        csv += ",vacuum_re,vacuum_im";
    }
    csv.push('\n');
    for (k, &m) in grids.iter().enumerate() {
        let slope = if k == 0 || defects[k] <= 0.0 || defects[k - 1] <= 0.0 || dx[k] == dx[k - 1] {
            String::new()
        } else {
            fmt((defects[k] / defects[k - 1]).ln() / (dx[k] / dx[k - 1]).ln())
        };
        csv += &format!("{m},{},{},{slope}", fmt(dx[k]), fmt(defects[k]));
        if let Some(v) = rows[k].1 {
            csv += &format!(",{},{}", fmt(v.re), fmt(v.im));
        }
        csv.push('\n');
    }
    if defects.iter().all(|&e| e <= EXACT_TOL) {
        for (k, &m) in grids.iter().enumerate() {
            report.case(CaseRecord::new(col, format!("M={m}"), defects[k], EXACT_TOL));
        }
    } else if grids.len() < 3 {
        report.warnings.push(format!("{} grid(s): no slope fitted", grids.len()));
        report.sweep(ConvergenceRecord::informational(col, grids, dx, defects));
    } else {
        report.sweep(ConvergenceRecord::new(col, grids, dx, defects, SLOPE_THRESHOLD));
    }
    Ok(ScenarioOutput { csv, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LEBESGUE: &str = r#"
[grid]
points = 4
t_max = 1.0

[system]
dim = 1

[noise]
dim = 1

[hamiltonian]
"H+-" = [[[1.0, 0.0]]]

[generator]
kind = "hamiltonian"
"#;

    #[test]
    fn sweep_specs() {
        assert_eq!(parse_sweep("M=2,4,8").unwrap(), vec![2, 4, 8]);
        assert_eq!(parse_sweep("M=1..4,8").unwrap(), vec![1, 2, 3, 4, 8]);
        assert!(parse_sweep("").unwrap().is_empty());
        assert!(parse_sweep("N=2").is_err());
        assert!(parse_sweep("M=4..2").is_err());
        assert!(parse_sweep("M=0,1").is_err());
    }

    #[test]
    fn lebesgue_vacuum_column() {
        let c = ScenarioConfig::from_toml(LEBESGUE).unwrap();
        let out = run_scenario(ScenarioKind::Evolve, &c, &[1, 2, 4, 8, 16], 0).unwrap();
        let last = out.csv.lines().last().unwrap().split(',').map(str::to_string).collect::<Vec<_>>();
        let (re, im): (f64, f64) = (last[4].parse().unwrap(), last[5].parse().unwrap());
        let want = (-crate::linalg::I).exp();
        assert!((re - want.re).hypot(im - want.im) <= 2.0 / 16.0);
        assert!(out.report.pass, "{}", out.report.render());
        assert_eq!(out.csv.lines().next().unwrap(), "M,dx,unitarity_defect,slope_estimate,vacuum_re,vacuum_im");
    }

    #[test]
    fn empty_sweep_uses_configured_grid() {
        let c = ScenarioConfig::from_toml(LEBESGUE).unwrap();
        let out = run_scenario(ScenarioKind::Evolve, &c, &[], 0).unwrap();
        assert_eq!(out.csv.lines().count(), 2);
        assert!(out.csv.lines().nth(1).unwrap().starts_with("4,"));
        assert_eq!(out.report.grids, vec![4]);
    }

    #[test]
    fn non_pseudo_hermitian_input_warns() {
        let bad = LEBESGUE.replace("\"H+-\" = [[[1.0, 0.0]]]", "\"H+-\" = [[[1.0, 0.5]]]");
        let c = ScenarioConfig::from_toml(&bad).unwrap();
        let out = run_scenario(ScenarioKind::Evolve, &c, &[2], 0).unwrap();
        assert!(out.report.warnings.iter().any(|w| w.contains("pseudo-Hermitian")));
    }

    #[test]
    fn oversized_flow_grid_is_rejected() {
        let c = ScenarioConfig::from_toml(LEBESGUE).unwrap();
        assert!(matches!(run_scenario(ScenarioKind::Flow, &c, &[12], 0), Err(HarnessError::Sweep(_))));
    }
}
