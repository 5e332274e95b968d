//! Scenario files, experiment runs, the verification suite and report output.
//!
//! Reports are deterministic: the JSON and CSV artifacts depend only on the
//! scenario and the seed. Wall-clock time is kept on the [`Report`] but
//! written to a separate timing file.

mod audits;
mod run;
mod scenario;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

pub use audits::{verify_suite, VerifyOptions, MODULES};
pub use run::{parse_scenario, run, run_scenario, Overrides, RunError, ScenarioFile};
pub use scenario::{
    CascadeExperiment, CauchyExperiment, CauchyMode, DoublingExperiment, Experiment, FieldSpec, FrequencyExperiment,
    GeometrySpec, GraphSpec, OutputSpec, Scenario, Tolerances, VerifyExperiment, WhitneyExperiment, DEFAULT_SEED,
};

use crate::error::Result;

pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

/// One invariant audit: `measured` compared with `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditEntry {
    pub module: String,
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub bound: Bound,
    pub tolerance: f64,
    pub cases: usize,
    /// Threshold set by quadrature accuracy; `--tol` replaces it.
    pub quadrature_limited: bool,
    pub detail: String,
}

impl AuditEntry {
    fn new(module: &str, name: &str, measured: f64, bound: Bound, tolerance: f64, cases: usize) -> Self {
        let passed = match bound {
            Bound::AtMost => measured <= tolerance,
            Bound::AtLeast => measured >= tolerance,
        };
        AuditEntry {
            module: module.into(),
            name: name.into(),
            passed,
            measured,
            bound,
            tolerance,
            cases,
            quadrature_limited: false,
            detail: String::new(),
        }
    }

    pub fn at_most(module: &str, name: &str, measured: f64, tolerance: f64, cases: usize) -> Self {
        Self::new(module, name, measured, Bound::AtMost, tolerance, cases)
    }

    pub fn at_least(module: &str, name: &str, measured: f64, tolerance: f64, cases: usize) -> Self {
        Self::new(module, name, measured, Bound::AtLeast, tolerance, cases)
    }

    /// Failure count against zero.
    pub fn count(module: &str, name: &str, failures: usize, cases: usize) -> Self {
        Self::at_most(module, name, failures as f64, 0.0, cases)
    }

    /// An audit that could not be evaluated.
    pub fn errored(module: &str, name: &str, err: &crate::Error) -> Self {
        let mut e = Self::at_most(module, name, f64::NAN, 0.0, 0);
        e.passed = false;
        e.detail = err.to_string();
        e
    }

    pub fn quadrature(mut self) -> Self {
        self.quadrature_limited = true;
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn full_name(&self) -> String {
        format!("{}.{}", self.module, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub failures: Vec<String>,
}

impl Summary {
    fn of(audits: &[AuditEntry]) -> Self {
        let failures: Vec<String> = audits.iter().filter(|a| !a.passed).map(AuditEntry::full_name).collect();
        Summary { total: audits.len(), passed: audits.len() - failures.len(), failed: failures.len(), failures }
    }
}

/// A CSV table written next to the JSON report.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub csv: String,
}

impl Artifact {
    /// Appends `tol` and `seed` columns to every row of `csv`.
    pub fn new(name: &str, csv: &str, tol: f64, seed: u64) -> Self {
        let mut out = String::with_capacity(csv.len() + 32 * csv.lines().count());
        for (i, line) in csv.lines().enumerate() {
            if i == 0 {
                let _ = writeln!(out, "{line},tol,seed");
            } else {
                let _ = writeln!(out, "{line},{tol:e},{seed}");
            }
        }
        Artifact { name: name.into(), csv: out }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub library_version: String,
    pub experiment: String,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub scenario: Option<Scenario>,
    pub results: serde_json::Value,
    pub audits: Vec<AuditEntry>,
    pub summary: Summary,
    #[serde(skip)]
    pub artifacts: Vec<Artifact>,
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl Report {
    pub fn new(
        experiment: &str,
        seed: u64,
        tolerances: Tolerances,
        results: serde_json::Value,
        audits: Vec<AuditEntry>,
        artifacts: Vec<Artifact>,
    ) -> Self {
        Report {
            library_version: LIBRARY_VERSION.into(),
            experiment: experiment.into(),
            seed,
            tolerances,
            scenario: None,
            results,
            summary: Summary::of(&audits),
            audits,
            artifacts,
            wall_clock: Duration::ZERO,
        }
    }

    pub fn passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report values serialize");
        s.push('\n');
        s
    }

    /// Writes `<prefix>.json`, one `<prefix>-<name>.csv` per artifact and
    /// `<prefix>.timing.json`; returns the paths in that order.
    pub fn write(&self, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        let json = dir.join(format!("{prefix}.json"));
        std::fs::write(&json, self.to_json())?;
        paths.push(json);
        for a in &self.artifacts {
            let p = dir.join(format!("{prefix}-{}.csv", a.name));
            std::fs::write(&p, &a.csv)?;
            paths.push(p);
        }
        let timing = dir.join(format!("{prefix}.timing.json"));
        let t = serde_json::json!({ "experiment": self.experiment, "seed": self.seed, "wall_clock_s": self.wall_clock.as_secs_f64() });
        std::fs::write(&timing, format!("{t}\n"))?;
        paths.push(timing);
        Ok(paths)
    }
}

/// Process exit codes of the command-line runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass = 0,
    AuditFailure = 1,
    ConfigError = 2,
    NumericFailure = 3,
}

impl ExitStatus {
    pub fn of(outcome: &std::result::Result<Report, RunError>) -> Self {
        match outcome {
            Ok(r) if r.passed() => ExitStatus::Pass,
            Ok(_) => ExitStatus::AuditFailure,
            Err(e) if e.is_config() => ExitStatus::ConfigError,
            Err(_) => ExitStatus::NumericFailure,
        }
    }

    pub fn code(self) -> i32 {
        self as i32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_compare_in_the_stated_direction() {
        assert!(AuditEntry::at_most("m", "a", 1.0, 1.0, 1).passed);
        assert!(!AuditEntry::at_most("m", "a", f64::NAN, 1.0, 1).passed);
        assert!(AuditEntry::at_least("m", "a", 21.0, 20.0, 1).passed);
        assert!(!AuditEntry::count("m", "a", 1, 5).passed);
    }

    #[test]
    fn artifacts_carry_tolerance_and_seed() {
        let a = Artifact::new("t", "r,F\n0.5,2\n", 1e-8, 42);
        assert_eq!(a.csv, "r,F,tol,seed\n0.5,2,1e-8,42\n");
    }

    #[test]
    fn summary_lists_failures() {
        let audits = vec![AuditEntry::count("w", "ok", 0, 3), AuditEntry::count("w", "bad", 2, 3)];
        let r = Report::new("verify", 1, Tolerances::default(), serde_json::Value::Null, audits, Vec::new());
        assert!(!r.passed());
        assert_eq!(r.summary.failures, vec!["w.bad".to_string()]);
        assert_eq!(ExitStatus::of(&Ok(r)), ExitStatus::AuditFailure);
    }

    #[test]
    fn write_separates_timing() {
        let dir = std::env::temp_dir().join(format!("freqlab-report-{}", std::process::id()));
        let mut r = Report::new("verify", 7, Tolerances::default(), serde_json::Value::Null, Vec::new(), Vec::new());
        r.wall_clock = Duration::from_millis(1500);
        let paths = r.write(&dir, "x").unwrap();
        let json = std::fs::read_to_string(&paths[0]).unwrap();
        assert!(!json.contains("wall_clock"));
        assert!(json.contains("\"seed\": 7"));
        assert!(std::fs::read_to_string(&paths[1]).unwrap().contains("1.5"));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
