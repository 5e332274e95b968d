use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use super::audits::{self, VerifyOptions};
use super::scenario::*;
use super::{Artifact, AuditEntry, Report};
use crate::cascade::{build_fj, doubling_survey, lln_harness, boundary_sample, run_cascade, LlnSpec};
use crate::cauchy::{
    alpha_from_c2, estimate_alpha, normal_mass_bound, rellich_necas_flux, three_ball_interp, vanish_ratio, CauchyFamily,
};
use crate::error::{Error, Result};
use crate::fields::HarmonicField;
use crate::frequency::{geometric_radii, profile, DerivativeMethod, FrequencyParams, ProfileOptions};
use crate::geometry::GraphDomain;
use crate::point::embed;
use crate::whitney::{build_whitney, generations, select_r0, Ball, WhitneyParams, Window};

/// A parsed scenario with the text it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub source: String,
    pub path: String,
}

impl ScenarioFile {
    /// 1-based line of the `[block]` header, if present.
    pub fn line_of(&self, block: &str) -> usize {
        let header = format!("[{block}");
        self.source
            .lines()
            .position(|l| l.trim_start().starts_with(&header))
            .map_or(0, |i| i + 1)
    }
}

/// Command-line overrides applied on top of the scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    /// Replaces the threshold of quadrature-limited audits.
    pub tol: Option<f64>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("{path}, scenario line {line} ([{block}]): {source}")]
    Module { path: String, line: usize, block: &'static str, source: Error },
    #[error("writing outputs: {0}")]
    Output(Error),
}

impl RunError {
    pub fn is_config(&self) -> bool {
        match self {
            RunError::Config { .. } => true,
            RunError::Module { source, .. } => {
                matches!(source, Error::Config(_) | Error::InvalidArgument(_) | Error::UnknownName(_))
            }
            RunError::Output(_) => false,
        }
    }
}

pub fn parse_scenario(text: &str, path: &str) -> std::result::Result<ScenarioFile, RunError> {
    let scenario: Scenario =
        toml::from_str(text).map_err(|e| RunError::Config { path: path.into(), message: e.to_string() })?;
    let file = ScenarioFile { scenario, source: text.into(), path: path.into() };
    let s = &file.scenario;
    let needs = |geometry: bool, field: bool| -> std::result::Result<(), RunError> {
        let missing = if geometry && s.geometry.is_none() {
            Some("geometry")
        } else if field && s.field.is_none() {
            Some("field")
        } else {
            None
        };
        match missing {
            Some(b) => Err(RunError::Config {
                path: path.into(),
                message: format!("experiment `{}` needs a [{b}] block", s.experiment.name()),
            }),
            None => Ok(()),
        }
    };
    match &s.experiment {
        Experiment::Whitney(_) => needs(true, false)?,
        Experiment::Frequency(_) | Experiment::Cascade(_) | Experiment::Doubling(_) => needs(true, true)?,
        Experiment::Cauchy(c) => match c.mode {
            CauchyMode::Alpha => {}
            CauchyMode::Threeball => needs(false, true)?,
            _ => needs(true, true)?,
        },
        Experiment::Verify(_) => {}
    }
    if !(s.tolerances.quadrature > 0.0 && s.tolerances.quadrature < 1.0) {
        return Err(RunError::Config { path: path.into(), message: "tolerances.quadrature must lie in (0, 1)".into() });
    }
    Ok(file)
}

/// Loads, runs and writes one scenario; returns the report and the written paths.
pub fn run(path: &Path, overrides: &Overrides) -> std::result::Result<(Report, Vec<PathBuf>), RunError> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Config { path: p.clone(), message: e.to_string() })?;
    let file = parse_scenario(&text, &p)?;
    let report = run_scenario(&file, overrides)?;
    let dir = overrides
        .out_dir
        .clone()
        .or_else(|| file.scenario.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let paths = report.write(&dir, &file.scenario.output.prefix).map_err(RunError::Output)?;
    Ok((report, paths))
}

type Outcome = (Value, Vec<AuditEntry>, Vec<Artifact>);

/// Executes the scenario's experiment without writing anything.
pub fn run_scenario(file: &ScenarioFile, overrides: &Overrides) -> std::result::Result<Report, RunError> {
    let start = Instant::now();
    let mut scenario = file.scenario.clone();
    if let Some(s) = overrides.seed {
        scenario.seed = s;
    }
    if let Some(t) = overrides.tol {
        scenario.tolerances.audit = Some(t);
    }
    let seed = scenario.seed;
    let tol = scenario.tolerances;
    let fail = |block: &'static str| {
        move |source: Error| RunError::Module { path: file.path.clone(), line: file.line_of(block), block, source }
    };

    let domain = match &scenario.geometry {
        Some(g) => Some(g.build(seed).map_err(fail("geometry"))?),
        None => None,
    };
    let field: Option<Box<dyn HarmonicField>> = match (&scenario.field, &domain) {
        (Some(f), Some(d)) => Some(f.build(d).map_err(fail("field"))?),
        (Some(f), None) => {
            // Whole-space use (three-ball): a flat reference domain fixes the dimension.
            let dim = match &scenario.experiment {
                Experiment::Cauchy(c) => c.x.as_ref().map_or(2, Vec::len),
                _ => 2,
            };
            let flat = GeometrySpec { dim, graph: GraphSpec::Flat {}, center: 0.0, radius: 1.0, extent: None };
            let d = flat.build(seed).map_err(fail("field"))?;
            Some(f.build(&d).map_err(fail("field"))?)
        }
        _ => None,
    };

    let outcome: Result<Outcome> = match &scenario.experiment {
        Experiment::Whitney(e) => whitney(e, domain.as_ref().expect("checked"), &tol, seed),
        Experiment::Frequency(e) => {
            frequency(e, field.as_deref().expect("checked"), domain.as_ref().expect("checked"), &tol, seed)
        }
        Experiment::Cascade(e) => cascade(e, field.as_deref().expect("checked"), domain.as_ref().expect("checked"), &tol, seed),
        Experiment::Doubling(e) => {
            doubling(e, field.as_deref().expect("checked"), domain.as_ref().expect("checked"), &tol, seed)
        }
        Experiment::Cauchy(e) => cauchy(e, field.as_deref(), domain.as_ref(), &tol, seed),
        Experiment::Verify(e) => {
            let opts = VerifyOptions { filter: e.filter.clone(), tol: tol.audit, seed };
            let mut r = audits::verify_suite(&opts);
            r.scenario = Some(scenario);
            r.wall_clock = start.elapsed();
            return Ok(r);
        }
    };
    let (results, audit_entries, artifacts) = outcome.map_err(fail("experiment"))?;
    let mut report = Report::new(scenario.experiment.name(), seed, tol, results, audit_entries, artifacts);
    report.scenario = Some(scenario);
    report.wall_clock = start.elapsed();
    Ok(report)
}

fn whitney(e: &WhitneyExperiment, domain: &GraphDomain, tol: &Tolerances, seed: u64) -> Result<Outcome> {
    let dim = domain.dim();
    let window = Window::new(embed(dim, &e.lo)?, embed(dim, &e.hi)?)?;
    let params = e.params.unwrap_or_else(|| WhitneyParams::for_dim(dim));
    let dec = build_whitney(domain, &params, &window)?;
    let mut entries = Vec::new();
    let audit = e.audit.then(|| dec.audit());
    if let Some(a) = &audit {
        entries.extend(audits::whitney_entries(a));
    }
    let mut levels = Vec::new();
    if let Some(rho) = e.b0_radius {
        let b0 = Ball { center: domain.center, radius: rho };
        let root = select_r0(&dec, &b0, 8.0, f64::INFINITY)?;
        let lazy = dec.lazy(40.max(params.k_max))?;
        let mut bad = 0;
        for k in 0..=e.generations {
            let g = generations(&lazy, &root.cube, k)?;
            let count_ok = g.cells.len() == 1usize << (k as usize * (dim - 1));
            if !(g.partition_exact && g.all_below && count_ok) {
                bad += 1;
            }
            levels.push(json!({ "k": k, "cells": g.cells.len(), "partition_exact": g.partition_exact, "all_below": g.all_below }));
        }
        entries.push(AuditEntry::count("whitney", "generation_partition", bad, e.generations as usize + 1));
        levels.insert(0, json!({ "root": root }));
    }
    let results = json!({
        "cubes": dec.cubes.len(),
        "unresolved": dec.unresolved.len(),
        "c0": dec.params.c0,
        "c0_requested": dec.c0_requested,
        "audit": audit,
        "generations": levels,
    });
    Ok((results, entries, vec![Artifact::new("cubes", &dec.to_csv(), tol.quadrature, seed)]))
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.17e}"))
}

fn frequency(
    e: &FrequencyExperiment,
    field: &dyn HarmonicField,
    domain: &GraphDomain,
    tol: &Tolerances,
    seed: u64,
) -> Result<Outcome> {
    let x = point_or_center(domain, &e.x)?;
    let radii = geometric_radii(e.r_min, e.r_max, e.count)?;
    let params = FrequencyParams {
        tol: tol.quadrature,
        rho_fd: e.rho_fd,
        derivative: DerivativeMethod::FiniteDifference,
        ..Default::default()
    };
    let options = ProfileOptions { volume_energy: e.volume_energy, derivative: e.derivative };
    let prof = profile(field, domain, &x, &radii, &params, options)?;

    let n = prof.rows.len();
    let mut entries = Vec::new();
    let fd_bad = prof.rows.iter().filter(|r| r.f_fd.map_or(false, |g| (r.f - g).abs() > 1e-3f64.max(1e-2 * r.f.abs()))).count();
    entries.push(AuditEntry::count("frequency", "fd_agreement", fd_bad, n));
    entries.push(AuditEntry::count("frequency", "h_monotone", usize::from(!prof.h_monotone()), 1));
    if e.volume_energy {
        entries.push(AuditEntry::at_most("frequency", "energy_identity", prof.energy_mismatch(), 1e-4, n).quadrature());
    }
    if e.derivative {
        let bad = prof.rows.iter().filter(|r| r.admissible_cone && r.df.map_or(false, |d| d < -5.0 * params.tol)).count();
        entries.push(AuditEntry::count("frequency", "monotone_on_cone", bad, n));
    }
    if let Some(f0) = e.expect_f {
        let err = prof.rows.iter().map(|r| (r.f - f0).abs()).fold(0.0, f64::max);
        let t = tol.audit.unwrap_or(1e-6);
        entries.push(AuditEntry::at_most("frequency", "expected_f", err, t, n).quadrature());
    }

    let mut csv = String::from("r,h,H,I,F,F_fd,admissible_cone,admissible_measured\n");
    for r in &prof.rows {
        let m = r.admissible_measured.map_or(String::new(), |b| b.to_string());
        let _ = writeln!(
            csv,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{}",
            r.r,
            r.h,
            r.big_h,
            r.energy,
            r.f,
            opt(r.f_fd),
            r.admissible_cone,
            m
        );
    }
    Ok((serde_json::to_value(&prof).expect("serializable"), entries, vec![Artifact::new("frequency", &csv, params.tol, seed)]))
}

fn cascade(
    e: &CascadeExperiment,
    field: &dyn HarmonicField,
    domain: &GraphDomain,
    tol: &Tolerances,
    seed: u64,
) -> Result<Outcome> {
    let mut params = e.params;
    params.tol = tol.quadrature;
    params.seed = seed;
    let b0 = Ball { center: domain.center, radius: e.b0_radius };
    let rep = run_cascade(field, domain, &b0, &params)?;
    let mut entries = Vec::new();
    let kl = &rep.key_lemma;
    if kl.tested > 0 {
        entries.push(AuditEntry::at_least("cascade", "good_fraction", kl.min_fraction, kl.delta0_expected, kl.tested));
    }
    let mut fj_json = Value::Null;
    let mut lln_json = Value::Null;
    if e.fj || e.lln_m.is_some() {
        let fam = build_fj(&rep);
        entries.extend(audits::fj_entries(&fam));
        fj_json = json!({
            "stride": fam.stride,
            "horizon": fam.horizon,
            "functions": fam.functions.iter().map(|f| json!({ "j": f.j, "cells": f.cells.len(), "empty_good_sets": f.empty_good_sets })).collect::<Vec<_>>(),
        });
        if let Some(m) = e.lln_m {
            let l = lln_harness(&LlnSpec::Cascade(&fam), m, seed);
            entries.push(AuditEntry::count("cascade", "etemadi_conditions", usize::from(!l.conditions.hold), 1));
            lln_json = serde_json::to_value(&l).expect("serializable");
        }
    }
    let mut csv = String::from("level,j1,j2,x1,x2,xn,side,F,in_t,live\n");
    for n in rep.nodes.iter().flatten() {
        let c = &n.freq;
        let _ = writeln!(
            csv,
            "{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{}",
            n.level,
            c.shadow[0],
            c.shadow[1],
            c.center[0],
            c.center[1],
            c.center[2],
            c.side,
            opt(c.f),
            n.in_t,
            n.live
        );
    }
    let results = json!({
        "dim": rep.dim,
        "root": rep.root,
        "root_side": rep.root_side,
        "c0": rep.c0,
        "levels": rep.levels,
        "good_sets": rep.good_sets,
        "key_lemma": rep.key_lemma,
        "evaluations": rep.evaluations,
        "truncated": rep.truncated,
        "degenerate": rep.degenerate,
        "fj": fj_json,
        "lln": lln_json,
    });
    Ok((results, entries, vec![Artifact::new("nodes", &csv, params.tol, seed)]))
}

fn doubling(
    e: &DoublingExperiment,
    field: &dyn HarmonicField,
    domain: &GraphDomain,
    tol: &Tolerances,
    seed: u64,
) -> Result<Outcome> {
    let mut params = e.params;
    params.tol = tol.quadrature;
    let points = boundary_sample(domain, e.points, e.shrink, seed);
    let mut grid = geometric_radii(e.r_min, e.r_max, e.count)?;
    grid.reverse();
    let survey = doubling_survey(field, domain, &points, &grid, &params)?;
    let mut entries = vec![AuditEntry::count(
        "cascade",
        "doubling_within_bound",
        survey.points.iter().filter(|p| !p.within_bound).count(),
        survey.points.len(),
    )];
    if let Some(q) = e.expect_ratio {
        let dev = survey.points.iter().flat_map(|p| p.ratios.iter()).map(|r| (r / q - 1.0).abs()).fold(0.0, f64::max);
        entries.push(AuditEntry::at_most("cascade", "doubling_ratio", dev, tol.audit.unwrap_or(1e-3), survey.points.len()).quadrature());
    }
    let csv = survey.to_csv();
    Ok((serde_json::to_value(&survey).expect("serializable"), entries, vec![Artifact::new("doubling", &csv, params.tol, seed)]))
}

fn cauchy(
    e: &CauchyExperiment,
    field: Option<&dyn HarmonicField>,
    domain: Option<&GraphDomain>,
    tol: &Tolerances,
    seed: u64,
) -> Result<Outcome> {
    let q = tol.quadrature;
    let need_r = || e.r.ok_or_else(|| Error::Config(format!("cauchy mode {:?} needs `r`", e.mode)));
    match e.mode {
        CauchyMode::Alpha => {
            let fit = estimate_alpha(&e.estimate)?;
            let n = fit.samples.len();
            let entries = match &e.estimate.family {
                CauchyFamily::LinearScaling { .. } => vec![
                    AuditEntry::at_most("cauchy", "alpha_linear", (fit.alpha - 1.0).abs(), 0.01, n),
                    AuditEntry::at_least("cauchy", "alpha_linear_r2", fit.r2, 0.999, n),
                ],
                CauchyFamily::MfsConstrained { .. } => vec![
                    AuditEntry::at_least("cauchy", "alpha_positive", fit.alpha, f64::MIN_POSITIVE, n),
                    AuditEntry::at_least("cauchy", "alpha_r2", fit.r2, 0.9, n),
                ],
            };
            let mut csv = String::from("eps,eps_achieved,bulk,sup\n");
            for s in &fit.samples {
                let _ = writeln!(csv, "{:.17e},{:.17e},{:.17e},{:.17e}", s.eps, s.eps_achieved, s.bulk, s.sup);
            }
            Ok((serde_json::to_value(&fit).expect("serializable"), entries, vec![Artifact::new("alpha", &csv, q, seed)]))
        }
        CauchyMode::Flux => {
            let (f, d) = (field.expect("checked"), domain.expect("checked"));
            let x = point_or_center(d, &e.x)?;
            let rep = rellich_necas_flux(f, d, &x, need_r()?, &e.cutoff, q)?;
            let entries = vec![AuditEntry::at_most("cauchy", "flux_identity", rep.relative, tol.audit.unwrap_or(1e-6), 1).quadrature()];
            Ok((serde_json::to_value(&rep).expect("serializable"), entries, Vec::new()))
        }
        CauchyMode::Mass => {
            let (f, d) = (field.expect("checked"), domain.expect("checked"));
            let x = point_or_center(d, &e.x)?;
            let rep = normal_mass_bound(f, d, &x, need_r()?, &e.mask, q)?;
            let entries = vec![AuditEntry::count("cauchy", "mass_finite", usize::from(!rep.ratio.is_finite()), 1)];
            Ok((serde_json::to_value(&rep).expect("serializable"), entries, Vec::new()))
        }
        CauchyMode::Threeball => {
            let f = field.expect("checked");
            let x = match &e.x {
                Some(v) => embed(f.dim(), v)?,
                None => [0.0; 3],
            };
            let r2 = *e.radii.first().ok_or_else(|| Error::Config("threeball needs `radii = [r2]`".into()))?;
            let alpha = e.alpha.unwrap_or_else(|| alpha_from_c2(0.05));
            let rep = three_ball_interp(f, &x, need_r()?, r2, alpha, q)?;
            let entries = vec![AuditEntry::count("cauchy", "three_ball", usize::from(!rep.ok), 1)];
            Ok((serde_json::to_value(&rep).expect("serializable"), entries, Vec::new()))
        }
        CauchyMode::Ratio => {
            let (f, d) = (field.expect("checked"), domain.expect("checked"));
            let x = point_or_center(d, &e.x)?;
            if e.radii.is_empty() {
                return Err(Error::Config("ratio mode needs a non-empty `radii` list".into()));
            }
            let rows = e.radii.iter().map(|&r| vanish_ratio(f, d, &x, r, q)).collect::<Result<Vec<_>>>()?;
            let mut csv = String::from("r,inner,outer,ratio\n");
            for v in &rows {
                let _ = writeln!(csv, "{:.17e},{:.17e},{:.17e},{:.17e}", v.r, v.inner, v.outer, v.ratio);
            }
            let bad = rows.iter().filter(|v| !v.ratio.is_finite()).count();
            let entries = vec![AuditEntry::count("cauchy", "ratio_finite", bad, rows.len())];
            Ok((serde_json::to_value(&rows).expect("serializable"), entries, vec![Artifact::new("ratio", &csv, q, seed)]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FREQ: &str = r#"
seed = 42

[geometry]
dim = 2
graph = { kind = "flat" }
extent = 4.0

[field]
kind = "catalog"
name = "linear"

[experiment]
kind = "frequency"
r_min = 0.015625
r_max = 1.0
count = 7
expect_f = 2.0
"#;

    #[test]
    fn frequency_scenario_gives_two() {
        let file = parse_scenario(FREQ, "freq.toml").unwrap();
        let r = run_scenario(&file, &Overrides::default()).unwrap();
        assert!(r.passed(), "{:?}", r.summary);
        let csv = &r.artifacts[0].csv;
        assert!(csv.starts_with("r,h,H,I,F,F_fd,admissible_cone,admissible_measured,tol,seed\n"));
        for line in csv.lines().skip(1) {
            let f: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
            assert!((f - 2.0).abs() <= 1e-6);
            assert!(line.ends_with(",42"));
        }
    }

    #[test]
    fn unknown_key_names_the_key() {
        let text = FREQ.replace("count = 7", "count = 7\nslop = 0.1");
        let err = parse_scenario(&text, "freq.toml").unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("slop"), "{err}");
        let nested = FREQ.replace("graph = { kind = \"flat\" }", "graph = { kind = \"flat\", slop = 1 }");
        assert!(parse_scenario(&nested, "f.toml").unwrap_err().to_string().contains("slop"));
        let field = FREQ.replace("name = \"linear\"", "name = \"linear\"\nslop = 2");
        assert!(parse_scenario(&field, "f.toml").unwrap_err().to_string().contains("slop"));
        let mask = "[experiment]\nkind = \"cauchy\"\nmode = \"alpha\"\nmask = { kind = \"empty\", slop = 1 }\n";
        assert!(parse_scenario(mask, "m.toml").unwrap_err().to_string().contains("slop"));
        let params = "[experiment]\nkind = \"cauchy\"\nmode = \"alpha\"\nestimate = { slop = 1 }\n";
        assert!(parse_scenario(params, "a.toml").unwrap_err().to_string().contains("slop"));
    }

    #[test]
    fn missing_block_is_a_config_error() {
        let text = FREQ.replace("[field]\nkind = \"catalog\"\nname = \"linear\"\n", "");
        let err = parse_scenario(&text, "f.toml").unwrap_err();
        assert!(err.is_config() && err.to_string().contains("[field]"), "{err}");
    }

    #[test]
    fn module_errors_carry_the_line() {
        let text = FREQ.replace("r_max = 1.0", "r_max = 10.0");
        let file = parse_scenario(&text, "f.toml").unwrap();
        let err = run_scenario(&file, &Overrides::default()).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains(&format!("line {}", file.line_of("experiment"))), "{err}");
        let zero = FREQ.replace("\"linear\"", "\"zero\"");
        let file = parse_scenario(&zero, "f.toml").unwrap();
        let err = run_scenario(&file, &Overrides::default()).unwrap_err();
        assert!(!err.is_config(), "{err}");
        let unknown = FREQ.replace("\"linear\"", "\"quadratic\"");
        let file = parse_scenario(&unknown, "f.toml").unwrap();
        assert_eq!(file.line_of("field"), 9);
        let err = run_scenario(&file, &Overrides::default()).unwrap_err();
        assert!(err.is_config() && err.to_string().contains("line 9"), "{err}");
    }

    #[test]
    fn same_scenario_same_bytes() {
        let file = parse_scenario(FREQ, "freq.toml").unwrap();
        let a = run_scenario(&file, &Overrides::default()).unwrap();
        let b = run_scenario(&file, &Overrides::default()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.artifacts, b.artifacts);
        let c = run_scenario(&file, &Overrides { seed: Some(7), ..Default::default() }).unwrap();
        assert!(c.to_json().contains("\"seed\": 7"));
    }

    #[test]
    fn whitney_scenario_audits() {
        let text = r#"
[geometry]
dim = 2
graph = { kind = "ramp", slope = 0.1 }

[experiment]
kind = "whitney"
lo = [-1.0, -0.1]
hi = [1.0, 2.0]
audit = true
params = { k_max = 9 }
"#;
        let r = run_scenario(&parse_scenario(text, "w.toml").unwrap(), &Overrides::default()).unwrap();
        assert!(r.passed(), "{:?}", r.audits);
        assert!(r.results["audit"]["cubes"].as_u64().unwrap() > 100);
    }
}
