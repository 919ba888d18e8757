//! Machine-readable suite reports and log-log slope fitting.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;
pub const SLOPE_THRESHOLD: f64 = 0.8;
pub const EXACT_TOL: f64 = 1e-12;

/// First 16 hex digits of the SHA-256 of an input description.
pub fn digest(inputs: &str) -> String {
    let h = Sha256::digest(inputs.as_bytes());
    h.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Deterministic per-instance seed.
pub fn sub_seed(seed: u64, label: &str, i: usize) -> u64 {
    let h = Sha256::digest(format!("{seed}/{label}/{i}").as_bytes());
    u64::from_le_bytes(h[..8].try_into().expect("8 bytes"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub name: String,
    pub inputs: String,
    pub digest: String,
    #[serde(with = "lossless")]
    pub defect: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Non-finite values as the strings `"NaN"`, `"inf"`, `"-inf"`.
mod lossless {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&x.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl CaseRecord {
    /// Passes when `defect ≤ tolerance`; NaN fails.
    pub fn new(name: &str, inputs: String, defect: f64, tolerance: f64) -> CaseRecord {
        CaseRecord { name: name.into(), digest: digest(&inputs), inputs, defect, tolerance, pass: defect <= tolerance }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub name: String,
    pub grids: Vec<usize>,
    pub dx: Vec<f64>,
    pub defects: Vec<f64>,
    pub slope: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
}

impl ConvergenceRecord {
    /// A sweep with fewer than three usable points is recorded without a slope and fails.
    pub fn new(name: &str, grids: Vec<usize>, dx: Vec<f64>, defects: Vec<f64>, threshold: f64) -> ConvergenceRecord {
        let slope = fit_slope(&dx, &defects).ok();
        let pass = slope.is_some_and(|s| s >= threshold);
        ConvergenceRecord { name: name.into(), grids, dx, defects, slope, threshold, pass }
    }

    /// Defects without a pass criterion on the slope, for sweeps too short to fit.
    pub fn informational(name: &str, grids: Vec<usize>, dx: Vec<f64>, defects: Vec<f64>) -> ConvergenceRecord {
        let slope = fit_slope(&dx, &defects).ok();
        ConvergenceRecord { name: name.into(), grids, dx, defects, slope, threshold: 0.0, pass: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub label: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub suite: String,
    pub seed: u64,
    pub grids: Vec<usize>,
    pub tolerance: f64,
    pub cases: Vec<CaseRecord>,
    pub convergence: Vec<ConvergenceRecord>,
    pub warnings: Vec<String>,
    pub pass: bool,
    pub timings: Vec<Timing>,
}

/// Worst case of one check across its instances.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseSummary {
    pub name: String,
    pub count: usize,
    pub failures: usize,
    pub worst_defect: f64,
    pub tolerance: f64,
}

impl SuiteReport {
    pub fn new(suite: &str, seed: u64, grids: Vec<usize>, tolerance: f64) -> SuiteReport {
        SuiteReport {
            schema_version: SCHEMA_VERSION,
            suite: suite.into(),
            seed,
            grids,
            tolerance,
            cases: Vec::new(),
            convergence: Vec::new(),
            warnings: Vec::new(),
            pass: true,
            timings: Vec::new(),
        }
    }

    pub fn case(&mut self, c: CaseRecord) {
        self.pass &= c.pass;
        self.cases.push(c);
    }

    pub fn sweep(&mut self, c: ConvergenceRecord) {
        self.pass &= c.pass;
        self.convergence.push(c);
    }

    pub fn time(&mut self, label: &str, seconds: f64) {
        self.timings.push(Timing { label: label.into(), seconds });
    }

    /// Merge another report's records under this one.
    pub fn absorb(&mut self, other: SuiteReport) {
        for c in other.cases {
            self.case(c);
        }
        for c in other.convergence {
            self.sweep(c);
        }
        self.warnings.extend(other.warnings);
        self.timings.extend(other.timings);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report without timings, which is the deterministic part.
    pub fn to_json_untimed(&self) -> String {
        let mut r = self.clone();
        r.timings.clear();
        r.to_json()
    }

    pub fn from_json(s: &str) -> Result<SuiteReport, HarnessError> {
        serde_json::from_str(s).map_err(|e| HarnessError::Report(e.to_string()))
    }

    /// Cases grouped by name, in first-appearance order.
    pub fn summary(&self) -> Vec<CaseSummary> {
        let mut out: Vec<CaseSummary> = Vec::new();
        for c in &self.cases {
            let s = match out.iter_mut().find(|s| s.name == c.name) {
                Some(s) => s,
                None => {
                    out.push(CaseSummary { name: c.name.clone(), count: 0, failures: 0, worst_defect: f64::NEG_INFINITY, tolerance: c.tolerance });
                    out.last_mut().expect("just pushed")
                }
            };
            s.count += 1;
            s.failures += usize::from(!c.pass);
            if c.defect.is_nan() || c.defect > s.worst_defect {
                s.worst_defect = c.defect;
            }
            s.tolerance = s.tolerance.max(c.tolerance);
        }
        out
    }

    /// One line per check and per sweep.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in self.summary() {
            let tag = if c.failures == 0 { "PASS" } else { "FAIL" };
            s += &format!("{tag} {}/{}: {} cases, worst {:.3e} (tol {:.1e})", self.suite, c.name, c.count, c.worst_defect, c.tolerance);
            if c.failures > 0 {
                s += &format!(", {} failed", c.failures);
            }
            s.push('\n');
        }
        for c in &self.convergence {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            let slope = c.slope.map_or("none".to_string(), |x| format!("{x:.3}"));
            let d: Vec<String> = c.defects.iter().map(|x| format!("{x:.3e}")).collect();
            s += &format!("{tag} {}/{}: M={:?} defects [{}] slope {slope} (min {})\n", self.suite, c.name, c.grids, d.join(", "), c.threshold);
        }
        for w in &self.warnings {
            s += &format!("WARN {}: {w}\n", self.suite);
        }
        s
    }
}

/// Least-squares slope of `log defect` against `log dx`.
pub fn fit_slope(dx: &[f64], defects: &[f64]) -> Result<f64, HarnessError> {
    if dx.len() != defects.len() {
        return Err(HarnessError::Fit(format!("{} step sizes against {} defects", dx.len(), defects.len())));
    }
    let pts: Vec<(f64, f64)> = dx.iter().zip(defects).filter(|(h, e)| **h > 0.0 && **e > 0.0 && e.is_finite()).map(|(h, e)| (h.ln(), e.ln())).collect();
    if pts.len() < 3 {
        return Err(HarnessError::Fit(format!("need at least 3 points with positive defects, have {}", pts.len())));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::Fit("step sizes are all equal".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_laws() {
        let dx = [0.5, 0.25, 0.125, 0.0625];
        let d: Vec<f64> = dx.iter().map(|h| 3.0 * h * h).collect();
        assert!((fit_slope(&dx, &d).unwrap() - 2.0).abs() < 1e-12);
        let d: Vec<f64> = dx.iter().map(|h| 0.1 * h).collect();
        assert!((fit_slope(&dx, &d).unwrap() - 1.0).abs() < 1e-12);
        assert!(fit_slope(&dx[..2], &d[..2]).is_err());
        assert!(fit_slope(&dx, &[1.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn report_round_trip_and_pass_flag() {
        let mut r = SuiteReport::new("x", 7, vec![2, 4], 1e-12);
        r.case(CaseRecord::new("a", "m=1".into(), 1e-13, 1e-12));
        assert!(r.pass);
        r.case(CaseRecord::new("a", "m=2".into(), f64::NAN, 1e-12));
        assert!(!r.pass);
        r.sweep(ConvergenceRecord::new("s", vec![2, 4, 8], vec![0.5, 0.25, 0.125], vec![0.4, 0.2, 0.1], 0.8));
        r.time("all", 0.5);
        let back = SuiteReport::from_json(&r.to_json()).unwrap();
        assert!(back.cases[1].defect.is_nan());
        assert_eq!(back.cases[0], r.cases[0]);
        let s = r.summary();
        assert_eq!((s[0].count, s[0].failures), (2, 1));
        assert!(r.render().contains("FAIL x/a"));
        assert!(r.render().contains("PASS x/s"));
        assert!(!r.to_json_untimed().contains("\"all\""));
        assert_eq!(digest("m=1").len(), 16);
        assert_ne!(sub_seed(1, "a", 0), sub_seed(1, "a", 1));
    }
}
