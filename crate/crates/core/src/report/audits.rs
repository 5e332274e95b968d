//! The verification suite: every module's invariants as report entries.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use super::{Artifact, AuditEntry, Bound, Report, Tolerances, DEFAULT_SEED};
use crate::cascade::{
    boundary_sample, build_fj, doubling_survey, lln_harness, run_cascade, CascadeParams, DoublingParams, FjFamily,
    LlnSpec,
};
use crate::cauchy::{
    alpha_from_c2, c2_constant, estimate_alpha, normal_mass_bound, rellich_necas_flux, three_ball_interp, vanish_ratio,
    AlphaParams, CauchyFamily, Cutoff, MaskSpec,
};
use crate::error::{Error, Result};
use crate::fields::{gradient_fd, mfs_fit, nontangential_gradient, CatalogField, HarmonicField, MfsParams, Term};
use crate::frequency::{
    convexity_check, derivative_f, dirichlet_energy, frequency, geometric_radii, FrequencyParams,
};
use crate::geometry::{sphere_cap_quadrature, sphere_integral, GraphDomain, LipschitzGraph, Side};
use crate::point::{dot, norm, sphere_area, Point};
use crate::quad::Tolerance;
use crate::whitney::{build_whitney, generations, select_r0, Ball, WhitneyAudit, WhitneyParams, Window};

pub const MODULES: [&str; 6] = ["geometry", "whitney", "fields", "frequency", "cascade", "cauchy"];

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// Module name, or a `module.audit` prefix.
    pub filter: Option<String>,
    /// Replaces the threshold of quadrature-limited audits.
    pub tol: Option<f64>,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { filter: None, tol: None, seed: DEFAULT_SEED }
    }
}

fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
}

/// Runs the selected audits; failures are entries, never errors.
pub fn verify_suite(opts: &VerifyOptions) -> Report {
    let start = Instant::now();
    let filter = opts.filter.as_deref();
    let module_of = |f: &str| f.split('.').next().unwrap_or("").to_string();
    let mut audits = Vec::new();
    for m in MODULES {
        if filter.map_or(false, |f| module_of(f) != m) {
            continue;
        }
        let seed = opts.seed;
        audits.extend(match m {
            "geometry" => geometry(seed),
            "whitney" => whitney(seed),
            "fields" => fields(seed),
            "frequency" => frequency_audits(seed),
            "cascade" => cascade(seed),
            _ => cauchy(seed),
        });
    }
    if let Some(f) = filter {
        audits.retain(|a| a.full_name().starts_with(f));
        if audits.is_empty() {
            audits.push(AuditEntry::errored("suite", "filter", &Error::Config(format!("`{f}` matches no audit"))));
        }
    }
    if let Some(t) = opts.tol {
        for a in audits.iter_mut().filter(|a| a.quadrature_limited) {
            a.tolerance = t;
            a.passed = match a.bound {
                Bound::AtMost => a.measured <= t,
                Bound::AtLeast => a.measured >= t,
            };
        }
    }
    let mut csv = String::from("module,name,passed,measured,bound,tolerance,cases\n");
    for a in &audits {
        let bound = if a.bound == Bound::AtMost { "at_most" } else { "at_least" };
        csv.push_str(&format!("{},{},{},{:e},{},{:e},{}\n", a.module, a.name, a.passed, a.measured, bound, a.tolerance, a.cases));
    }
    let tolerances = Tolerances { audit: opts.tol, ..Default::default() };
    let results = json!({ "filter": opts.filter, "modules": MODULES.iter().filter(|m| filter.map_or(true, |f| module_of(f) == **m)).collect::<Vec<_>>() });
    let artifacts = vec![Artifact::new("audits", &csv, tolerances.quadrature, opts.seed)];
    let mut report = Report::new("verify", opts.seed, tolerances, results, audits, artifacts);
    report.wall_clock = start.elapsed();
    report
}

/// Counts failed cases, keeping the first error message.
fn tally<T>(results: &[Result<T>], bad: impl Fn(&T) -> bool) -> (usize, String) {
    let mut n = 0;
    let mut first = String::new();
    for r in results {
        let failed = match r {
            Ok(v) => bad(v),
            Err(e) => {
                if first.is_empty() {
                    first = e.to_string();
                }
                true
            }
        };
        n += usize::from(failed);
    }
    (n, first)
}

fn worst<T>(results: &[Result<T>], metric: impl Fn(&T) -> f64) -> f64 {
    results.iter().map(|r| r.as_ref().map_or(f64::NAN, &metric)).fold(0.0, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}

fn first_error<T>(results: &[Result<T>]) -> String {
    results.iter().find_map(|r| r.as_ref().err().map(|e| e.to_string())).unwrap_or_default()
}

/// Tilted vanishing mixture on a ramp through the origin.
fn random_mix(rng: &mut ChaCha8Rng, dim: usize, slope: f64) -> Result<CatalogField> {
    let mut terms = vec![(1.0, Term::Linear)];
    let extra = rng.gen_range(0..=2);
    for _ in 0..extra {
        let t = match rng.gen_range(0..4) {
            0 => Term::Bilinear { axis: 0 },
            1 if dim == 3 => Term::Bilinear { axis: 1 },
            _ => Term::OddHarmonic { k: rng.gen_range(2..=5) },
        };
        terms.push((rng.gen_range(-1.0..1.0), t));
    }
    Ok(CatalogField::mix(dim, terms)?.placed([0.0; 3], slope))
}

/// A point at height `h` above the graph over `(s, s2)`.
fn above(graph: &LipschitzGraph, s: f64, s2: f64, h: f64) -> Point {
    [s, if graph.dim == 3 { s2 } else { 0.0 }, graph.phi(s) + h]
}

fn geometry(seed: u64) -> Vec<AuditEntry> {
    let mut out = Vec::new();
    let mut r = rng(seed, 1);

    let mut graphs = Vec::new();
    let fixed = [LipschitzGraph::ramp(2, 0.1), LipschitzGraph::sawtooth(2, 0.2, 0.5), LipschitzGraph::bump(2, 0.1, 0.3)];
    graphs.extend(fixed.into_iter().flatten());
    for _ in 0..3 {
        let tau = r.gen_range(0.02..0.1);
        graphs.extend(LipschitzGraph::random_grid(2, tau, 0.05, 60, r.gen()));
    }
    let ratio = graphs.iter().map(|g| g.sampled_lipschitz_ratio(2.0, 4000) / g.tau0).fold(0.0, f64::max);
    out.push(AuditEntry::at_most("geometry", "lipschitz_constant", ratio, 1.0 + 1e-9, graphs.len()));

    // Sphere pieces above a plane at distance t from the centre.
    let cases: Vec<(usize, f64, f64, f64, f64)> = (0..20)
        .map(|i| (2 + i % 2, r.gen_range(-0.1..0.1), r.gen_range(-0.3..0.3), r.gen_range(0.0..0.3), r.gen_range(0.05..0.5)))
        .collect();
    let caps: Vec<Result<(f64, f64, f64)>> = cases
        .par_iter()
        .map(|&(dim, slope, s, h, rad)| {
            let d = GraphDomain::at_origin(LipschitzGraph::ramp(dim, slope)?, 1.0)?.with_extent(2.0);
            let x = above(&d.graph, s, 0.0, h);
            let t = h / (1.0 + slope * slope).sqrt();
            let exact = match (dim, t < rad) {
                (2, true) => 2.0 * std::f64::consts::PI * rad - 2.0 * rad * (t / rad).acos(),
                (_, true) => 4.0 * std::f64::consts::PI * rad * rad - 2.0 * std::f64::consts::PI * rad * (rad - t),
                _ => sphere_area(dim, rad),
            };
            let area = sphere_cap_quadrature(&d, &x, rad, 1e-10)?.total_weight();
            let normal = {
                let bp = d.normal_at(&above(&d.graph, s, 0.0, 0.0))?;
                let tangent = [1.0, 0.0, slope];
                (norm(&bp.normal) - 1.0).abs() + dot(&bp.normal, &tangent).abs() + f64::from(u8::from(bp.normal[2] >= 0.0))
            };
            Ok(((area / exact - 1.0).abs(), (d.distance_to_boundary(&x) - t).abs(), normal))
        })
        .collect();
    let err = first_error(&caps);
    out.push(AuditEntry::at_most("geometry", "cap_area", worst(&caps, |c| c.0), 1e-8, caps.len()).quadrature().with_detail(err.clone()));
    out.push(AuditEntry::at_most("geometry", "plane_distance", worst(&caps, |c| c.1), 1e-12, caps.len()).with_detail(err.clone()));
    out.push(AuditEntry::at_most("geometry", "outer_normal", worst(&caps, |c| c.2), 1e-12, caps.len()).with_detail(err));
    out
}

pub(crate) fn lambda_entry(lambda: f64, cases: usize) -> AuditEntry {
    let mut e = AuditEntry::at_least("whitney", "lambda_above_20", lambda, 20.0, cases);
    e.passed = lambda > 20.0;
    e
}

pub(crate) fn whitney_entries(a: &WhitneyAudit) -> Vec<AuditEntry> {
    let n = a.cubes;
    vec![
        AuditEntry::count("whitney", "maximality", n - a.maximal_pass, n),
        AuditEntry::count("whitney", "property_i", n - a.property_i_pass, n),
        AuditEntry::count("whitney", "property_ii", n - a.property_ii_pass, n),
        AuditEntry::count("whitney", "property_iii", n - a.property_iii_pass, n),
        lambda_entry(a.lambda, n),
        AuditEntry::count("whitney", "overlaps", a.overlapping_pairs, n),
        AuditEntry::count("whitney", "distance_ratio", usize::from(!a.dist_ratio_ok), n),
        AuditEntry::count("whitney", "volume_balance", usize::from(!a.volume_balanced), 1),
        AuditEntry::count("whitney", "coverage", a.coverage_misses, a.coverage_samples),
    ]
}

/// Levels `0..=k_max` below the root over `B(0, 1/64)` that are exact, below
/// the root and of size `2^{k(n-1)}`; returns the number of failing levels.
fn generation_failures(domain: &GraphDomain, k_max: u32) -> Result<usize> {
    let dim = domain.dim();
    let side = if dim == 3 { 0.25 } else { 0.0 };
    let tall = Window::new([-0.25, -side, -0.5], [0.25, side, 12.0])?;
    let p = WhitneyParams { k_max: 7, enforce_smallness: false, ..WhitneyParams::for_dim(dim) };
    let dec = build_whitney(domain, &p, &tall)?;
    let root = select_r0(&dec, &Ball { center: [0.0; 3], radius: 1.0 / 64.0 }, 8.0, f64::INFINITY)?;
    let lazy = dec.lazy(40)?;
    let mut bad = 0;
    for k in 0..=k_max {
        let g = generations(&lazy, &root.cube, k)?;
        let count = 1usize << (k as usize * (dim - 1));
        bad += usize::from(!(g.partition_exact && g.all_below && g.cells.len() == count));
    }
    Ok(bad)
}

fn whitney(seed: u64) -> Vec<AuditEntry> {
    let mut r = rng(seed, 2);
    let cfg: Vec<(f64, u64)> = (0..10).map(|_| (r.gen_range(0.02..=0.1), r.gen())).collect();
    let rows: Vec<Result<(WhitneyAudit, usize)>> = cfg
        .par_iter()
        .map(|&(tau, s)| {
            let d = GraphDomain::at_origin(LipschitzGraph::random_grid(2, tau, 0.05, 60, s)?, 1.0)?.with_extent(64.0);
            let w = Window::new([-1.0, 0.0, -0.3], [1.0, 0.0, 2.0])?;
            let dec = build_whitney(&d, &WhitneyParams { k_max: 9, ..WhitneyParams::for_dim(2) }, &w)?;
            Ok((dec.audit(), generation_failures(&d, 6)?))
        })
        .collect();
    let err = first_error(&rows);
    let (failing, _) = tally(&rows, |(a, _)| !a.all_pass());
    let lambda = rows.iter().map(|r| r.as_ref().map_or(f64::NAN, |(a, _)| a.lambda)).fold(f64::INFINITY, f64::min);
    let gen_bad: usize = rows.iter().map(|r| r.as_ref().map_or(7, |x| x.1)).sum();
    let mut out = vec![
        AuditEntry::count("whitney", "random_domains", failing, rows.len()).with_detail(err),
        lambda_entry(lambda, rows.len()),
        AuditEntry::count("whitney", "generation_partition", gen_bad, 7 * rows.len()),
    ];

    let flat: Vec<Result<usize>> = [2, 3]
        .par_iter()
        .map(|&dim| generation_failures(&GraphDomain::at_origin(LipschitzGraph::flat(dim)?, 1.0)?.with_extent(64.0), 6))
        .collect();
    let (bad, err) = tally(&flat, |b| *b > 0);
    out.push(AuditEntry::count("whitney", "flat_generation_counts", bad, 2).with_detail(err));

    let three = (|| -> Result<WhitneyAudit> {
        let d = GraphDomain::at_origin(LipschitzGraph::ramp(3, 0.05)?, 1.0)?;
        let w = Window::new([-0.1, -0.1, 2.0], [0.1, 0.1, 3.0])?;
        Ok(build_whitney(&d, &WhitneyParams { k_max: 8, ..WhitneyParams::for_dim(3) }, &w)?.audit())
    })();
    match three {
        Ok(a) => out.push(AuditEntry::count("whitney", "audit_3d", usize::from(!a.all_pass()), a.cubes)),
        Err(e) => out.push(AuditEntry::errored("whitney", "audit_3d", &e)),
    }
    out
}

fn fields(seed: u64) -> Vec<AuditEntry> {
    let mut out = Vec::new();
    let mut r = rng(seed, 3);
    let pick = |r: &mut ChaCha8Rng, dim: usize| -> Term {
        match r.gen_range(0..6) {
            0 => Term::Linear,
            1 => Term::Bilinear { axis: if dim == 3 { r.gen_range(0..2) } else { 0 } },
            2 => Term::OddHarmonic { k: r.gen_range(2..=6) },
            3 => Term::ReHarmonic { k: r.gen_range(1..=6) },
            4 => Term::Poisson { pole: 3.0 },
            _ => Term::Constant,
        }
    };
    let cases: Vec<(CatalogField, Point, f64)> = (0..40)
        .map(|i| {
            let dim = 2 + i % 2;
            let terms = (0..3).map(|_| (r.gen_range(-1.0..1.0), pick(&mut r, dim))).collect();
            let x = [r.gen_range(-0.5..0.5), if dim == 3 { r.gen_range(-0.5..0.5) } else { 0.0 }, r.gen_range(-0.5..0.5)];
            (CatalogField::mix(dim, terms).expect("valid terms"), x, r.gen_range(0.05..0.5))
        })
        .collect();
    let (mut mean_err, mut grad_err) = (0.0f64, 0.0f64);
    for (u, x, rho) in &cases {
        let flat = LipschitzGraph::flat(u.dim).expect("dimension");
        let q = sphere_integral(&flat, x, *rho, Side::Whole, Tolerance::relative(1e-12), |p| {
            let v = u.value(p);
            [v, v * v]
        });
        let area = sphere_area(u.dim, *rho);
        let scale = (q.value[1] / area).sqrt().max(1e-300);
        mean_err = mean_err.max((q.value[0] / area - u.value(x)).abs() / scale);
        let g = u.gradient(x);
        let fd = gradient_fd(u, x, 1e-5);
        let diff = norm(&[g[0] - fd[0], g[1] - fd[1], g[2] - fd[2]]);
        grad_err = grad_err.max(diff / (norm(&g) + 1.0));
    }
    out.push(AuditEntry::at_most("fields", "mean_value_property", mean_err, 1e-9, cases.len()).quadrature());
    out.push(AuditEntry::at_most("fields", "gradient_consistency", grad_err, 1e-6, cases.len()));

    // Tilted fields vanish on their ramp; the nontangential limit recovers ∂_ν u.
    let ramps: Vec<(usize, f64, f64)> = (0..10).map(|i| (2 + i % 2, r.gen_range(-0.1..0.1), r.gen_range(-0.3..0.3))).collect();
    let nt: Vec<Result<(f64, f64)>> = ramps
        .par_iter()
        .map(|&(dim, slope, s)| {
            let d = GraphDomain::at_origin(LipschitzGraph::ramp(dim, slope)?, 1.0)?;
            let lin = CatalogField::named(dim, "linear")?.placed([0.0; 3], slope);
            let bil = CatalogField::named(dim, "bilinear")?.placed([0.0; 3], slope);
            let x = above(&d.graph, s, 0.0, 0.0);
            let vanish = lin.value(&x).abs().max(bil.value(&x).abs());
            let radii = [0.1, 0.05, 0.025, 0.0125];
            let a = nontangential_gradient(&lin, &d, &x, 0.5, &radii, 1e-6)?;
            let b = nontangential_gradient(&bil, &d, &x, 0.5, &radii, 1e-6)?;
            let q1 = s * (1.0 + slope * slope).sqrt();
            let err = (a.normal_derivative + 1.0).abs() + a.tangential_norm + (b.normal_derivative + q1).abs();
            Ok((vanish, err))
        })
        .collect();
    let err = first_error(&nt);
    out.push(AuditEntry::at_most("fields", "vanishing_on_ramp", worst(&nt, |v| v.0), 1e-14, nt.len()).with_detail(err.clone()));
    out.push(AuditEntry::at_most("fields", "nontangential_limit", worst(&nt, |v| v.1), 1e-8, nt.len()).with_detail(err));

    let fit = (|| -> Result<(f64, f64)> {
        let d = GraphDomain::at_origin(LipschitzGraph::ramp(2, 0.1)?, 1.0)?;
        let exact = CatalogField::named(2, "odd-harmonic-2")?.placed([0.0; 3], 0.1);
        let f = mfs_fit(&d, |p| exact.value(p), &MfsParams::default())?;
        let mut e: f64 = 0.0;
        for i in 0..21 {
            for j in 1..=10 {
                let p = above(&d.graph, -0.5 + 0.05 * i as f64, 0.0, 0.05 * j as f64);
                e = e.max((f.value(&p) - exact.value(&p)).abs());
            }
        }
        Ok((f.boundary_residual, e))
    })();
    match fit {
        Ok((res, e)) => {
            out.push(AuditEntry::at_most("fields", "mfs_boundary_residual", res, 1e-6, 1));
            out.push(AuditEntry::at_most("fields", "mfs_interior_error", e, 1e-6, 210));
        }
        Err(e) => out.push(AuditEntry::errored("fields", "mfs_boundary_residual", &e)),
    }
    out
}

fn frequency_audits(seed: u64) -> Vec<AuditEntry> {
    let mut out = Vec::new();
    let p = FrequencyParams::default();

    // Homogeneous fields at a flat boundary point.
    let cases: Vec<(usize, &str, f64, f64)> = [2usize, 3]
        .iter()
        .flat_map(|&d| [("linear", 2.0), ("bilinear", 4.0)].into_iter().flat_map(move |(n, f)| (0..=6).map(move |k| (d, n, f, (-(k as f64)).exp2()))))
        .collect();
    let hom: Vec<Result<(f64, f64)>> = cases
        .par_iter()
        .map(|&(dim, name, f0, r)| {
            let d = GraphDomain::at_origin(LipschitzGraph::flat(dim)?, 1.0)?.with_extent(2.0);
            let u = CatalogField::named(dim, name)?;
            let v = frequency(&u, &d, &[0.0; 3], r, &p)?;
            let n = dim as f64;
            let h = if f0 == 2.0 { r * r / (2.0 * n) } else { r.powi(4) / (2.0 * n * (n + 2.0)) };
            Ok(((v.f - f0).abs(), (v.h / h - 1.0).abs()))
        })
        .collect();
    let err = first_error(&hom);
    out.push(AuditEntry::at_most("frequency", "homogeneous_boundary", worst(&hom, |v| v.0), 1e-6, hom.len()).quadrature().with_detail(err.clone()));
    out.push(AuditEntry::at_most("frequency", "h_closed_form", worst(&hom, |v| v.1), 1e-6, hom.len()).quadrature().with_detail(err));

    // Random (field, x, r) on ramps: energy identity and F against F_fd.
    let mut r = rng(seed, 4);
    let configs: Vec<(usize, f64, CatalogField, Point, f64)> = (0..100)
        .map(|i| {
            let dim = if i % 3 == 0 { 3 } else { 2 };
            let slope = r.gen_range(-0.1..0.1);
            let u = random_mix(&mut r, dim, slope).expect("valid mixture");
            let g = LipschitzGraph::ramp(dim, slope).expect("slope below 1");
            let x = above(&g, r.gen_range(-0.3..0.3), r.gen_range(-0.3..0.3), r.gen_range(0.0..0.3));
            (dim, slope, u, x, r.gen_range(0.1..0.8))
        })
        .collect();
    let ident: Vec<Result<(f64, f64)>> = configs
        .par_iter()
        .map(|(dim, slope, u, x, rad)| {
            let d = GraphDomain::at_origin(LipschitzGraph::ramp(*dim, *slope)?, 1.0)?.with_extent(2.0);
            let e = dirichlet_energy(u, &d, x, *rad, p.tol)?;
            let v = frequency(u, &d, x, *rad, &p)?;
            let fd = v.f_fd.unwrap_or(f64::NAN);
            Ok(((e.volume - e.surface).abs() / e.volume.abs(), (v.f - fd).abs() / 1e-3f64.max(1e-2 * v.f.abs())))
        })
        .collect();
    let err = first_error(&ident);
    out.push(AuditEntry::at_most("frequency", "energy_identity", worst(&ident, |v| v.0), 1e-4, ident.len()).quadrature().with_detail(err.clone()));
    out.push(AuditEntry::at_most("frequency", "fd_agreement", worst(&ident, |v| v.1), 1.0, ident.len()).with_detail(err));

    // ∂_r F on cone-certified radii, τ0 ≤ 0.05.
    let grid = geometric_radii(0.05, 1.0, 8).expect("valid grid");
    let mono_cfg: Vec<(usize, f64, CatalogField, Point)> = (0..50)
        .map(|i| {
            let dim = if i % 5 == 0 { 3 } else { 2 };
            let slope = r.gen_range(-0.05..0.05);
            let u = random_mix(&mut r, dim, slope).expect("valid mixture");
            let g = LipschitzGraph::ramp(dim, slope).expect("slope below 1");
            (dim, slope, u, above(&g, r.gen_range(-0.3..0.3), r.gen_range(-0.3..0.3), r.gen_range(0.0..0.3)))
        })
        .collect();
    let mono: Vec<Result<(f64, usize)>> = mono_cfg
        .par_iter()
        .map(|(dim, slope, u, x)| {
            let d = GraphDomain::at_origin(LipschitzGraph::ramp(*dim, *slope)?, 1.0)?.with_extent(2.0);
            let mut min = f64::INFINITY;
            let mut certified = 0;
            for &rad in &grid {
                if d.cone_condition_check(x, rad, p.cone_samples).holds {
                    certified += 1;
                    min = min.min(derivative_f(u, &d, x, rad, &p)?.df_formula);
                }
            }
            Ok((min, certified))
        })
        .collect();
    let min = mono.iter().map(|m| m.as_ref().map_or(f64::NAN, |v| v.0)).fold(f64::INFINITY, |a, b| if b.is_nan() { b } else { a.min(b) });
    let points: usize = mono.iter().map(|m| m.as_ref().map_or(0, |v| v.1)).sum();
    out.push(
        AuditEntry::at_least("frequency", "monotone_on_cone", min, -5.0 * p.tol, points)
            .with_detail(format!("{} configurations {}", mono.len(), first_error(&mono))),
    );

    // Convexity over random harmonic-polynomial mixtures on flat domains.
    let conv_cfg: Vec<(usize, CatalogField, Point, f64, f64)> = (0..200)
        .map(|i| {
            let dim = if i % 4 == 0 { 3 } else { 2 };
            let u = random_mix(&mut r, dim, 0.0).expect("valid mixture");
            let x = [r.gen_range(-0.2..0.2), 0.0, if i % 2 == 0 { 0.0 } else { r.gen_range(0.0..0.2) }];
            (dim, u, x, r.gen_range(0.05..0.3), r.gen_range(1.5..3.0))
        })
        .collect();
    let conv: Vec<Result<bool>> = conv_cfg
        .par_iter()
        .map(|(dim, u, x, rad, a)| {
            let d = GraphDomain::at_origin(LipschitzGraph::flat(*dim)?, 1.0)?.with_extent(2.0);
            Ok(convexity_check(u, &d, x, *rad, *a, &p)?.ok)
        })
        .collect();
    let (bad, err) = tally(&conv, |ok| !ok);
    out.push(AuditEntry::count("frequency", "convexity", bad, conv.len()).with_detail(err));

    let fine = FrequencyParams { tol: 1e-10, ..Default::default() };
    let homog: Vec<(usize, &str, f64)> = vec![
        (2, "linear", 2.0),
        (2, "bilinear", 4.0),
        (2, "odd-harmonic-3", 6.0),
        (3, "linear", 2.0),
        (3, "bilinear", 4.0),
        (3, "bilinear-2", 4.0),
    ];
    let eq: Vec<Result<f64>> = homog
        .par_iter()
        .map(|&(dim, name, f0)| {
            let d = GraphDomain::at_origin(LipschitzGraph::flat(dim)?, 1.0)?.with_extent(2.0);
            let c = convexity_check(&CatalogField::named(dim, name)?, &d, &[0.0; 3], 0.1, 3.0, &fine)?;
            Ok((c.f_r - f0).abs().max((c.ratio_index - f0).abs()).max((c.f_ar - f0).abs()))
        })
        .collect();
    out.push(AuditEntry::at_most("frequency", "convexity_equality", worst(&eq, |v| *v), 1e-8, eq.len()).quadrature().with_detail(first_error(&eq)));

    // Three-ball interpolation for whole-space harmonic mixtures.
    let tb: Vec<Result<bool>> = (0..50)
        .map(|i| {
            let dim = 2 + i % 2;
            let terms = vec![
                (1.0, Term::ReHarmonic { k: r.gen_range(0..=2) }),
                (r.gen_range(-1.0..1.0), Term::ReHarmonic { k: r.gen_range(3..=6) }),
                (r.gen_range(-1.0..1.0), Term::OddHarmonic { k: r.gen_range(1..=4) }),
            ];
            let x = [r.gen_range(-0.2..0.2), 0.0, r.gen_range(-0.2..0.2)];
            let r1 = r.gen_range(0.05..0.2);
            (dim, terms, x, r1, r1 * r.gen_range(2.0..4.0), r.gen_range(0.2..0.8))
        })
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(dim, terms, x, r1, r2, alpha)| Ok(three_ball_interp(&CatalogField::mix(dim, terms)?, &x, r1, r2, alpha, 1e-10)?.ok))
        .collect();
    let (bad, err) = tally(&tb, |ok| !ok);
    out.push(AuditEntry::count("frequency", "three_ball", bad, tb.len()).with_detail(err));
    out
}

pub(crate) fn fj_entries(fam: &FjFamily) -> Vec<AuditEntry> {
    let mu = &fam.measure;
    let total = mu.total();
    let n = fam.functions.len();
    let mean = fam.functions.iter().map(|f| f.integral(mu).abs() / total).fold(0.0, f64::max);
    let mut orth: f64 = 0.0;
    for (i, f) in fam.functions.iter().enumerate() {
        for g in &fam.functions[i + 1..] {
            orth = orth.max(f.inner(g, mu).abs() / total);
        }
    }
    let nonzero = fam.functions.iter().filter(|f| !f.cells.is_empty()).count();
    vec![
        AuditEntry::at_most("cascade", "fj_zero_mean", mean, 1e-12, n).with_detail(format!("{nonzero} non-zero functions")),
        AuditEntry::at_most("cascade", "fj_orthogonal", orth, 1e-10, n * n.saturating_sub(1) / 2),
    ]
}

fn cascade(seed: u64) -> Vec<AuditEntry> {
    let mut out = Vec::new();
    let dp = DoublingParams::default();
    let grid: Vec<f64> = geometric_radii(1e-3, 1e-1, 5).expect("valid grid").into_iter().rev().collect();

    // Linear field: h(x,12r)/h(x,r) = 144 at every boundary point.
    let lin: Vec<Result<f64>> = [(2usize, 0.0), (3, 0.05)]
        .par_iter()
        .map(|&(dim, slope)| {
            let d = GraphDomain::at_origin(LipschitzGraph::ramp(dim, slope)?, 1.0)?.with_extent(2.0);
            let u = CatalogField::named(dim, "linear")?.placed([0.0; 3], slope);
            let pts = boundary_sample(&d, 20, 0.5, seed);
            let s = doubling_survey(&u, &d, &pts, &grid, &dp)?;
            Ok(s.points.iter().flat_map(|p| p.ratios.iter()).map(|q| (q / 144.0 - 1.0).abs()).fold(0.0, f64::max))
        })
        .collect();
    out.push(AuditEntry::at_most("cascade", "doubling_linear", worst(&lin, |v| *v), 1e-3, 40).quadrature().with_detail(first_error(&lin)));

    let below: Vec<Result<bool>> = ["linear", "bilinear", "odd-harmonic-3"]
        .par_iter()
        .map(|name| {
            let d = GraphDomain::at_origin(LipschitzGraph::ramp(2, 0.05)?, 1.0)?.with_extent(2.0);
            let u = CatalogField::named(2, name)?.placed([0.0; 3], 0.05);
            let pts = boundary_sample(&d, 20, 0.5, seed);
            Ok(doubling_survey(&u, &d, &pts, &grid, &dp)?.all_within_bound())
        })
        .collect();
    let (bad, err) = tally(&below, |ok| !ok);
    out.push(AuditEntry::count("cascade", "doubling_below_threshold", bad, below.len()).with_detail(err));

    // Good sets of the degree-8 odd harmonic.
    let domain = GraphDomain::at_origin(LipschitzGraph::flat(2).expect("dimension"), 1.0).expect("origin on graph").with_extent(64.0);
    let u8 = CatalogField::named(2, "odd-harmonic-8").expect("catalog name");
    let b0 = Ball { center: [0.0; 3], radius: 1.0 / 64.0 };
    let key: Vec<Result<(f64, f64, f64, usize)>> = [16.0, 64.0]
        .par_iter()
        .map(|&a| {
            let p = CascadeParams { a, levels: 1, seed, ..Default::default() };
            let k = run_cascade(&u8, &domain, &b0, &p)?.key_lemma;
            Ok((k.min_fraction, k.delta0_expected, k.c_hat, k.tested))
        })
        .collect();
    for (a, k) in [16, 64].iter().zip(&key) {
        match k {
            Ok((frac, delta0, _, tested)) => {
                out.push(AuditEntry::at_least("cascade", &format!("good_fraction_a{a}"), *frac, *delta0, *tested))
            }
            Err(e) => out.push(AuditEntry::errored("cascade", &format!("good_fraction_a{a}"), e)),
        }
    }
    let chat: Vec<f64> = key.iter().filter_map(|k| k.as_ref().ok().map(|v| v.2)).collect();
    let spread = match chat.as_slice() {
        [a, b] if *a == 0.0 && *b == 0.0 => 1.0,
        [a, b] => a.max(*b) / a.min(*b),
        _ => f64::NAN,
    };
    out.push(AuditEntry::at_most("cascade", "growth_constant_stable", spread, 2.0, chat.len()).with_detail(format!("c_hat {chat:?}")));

    // f_j and the law of large numbers.
    let p = CascadeParams { k: Some(3), levels: 7, seed, ..Default::default() };
    match run_cascade(&u8, &domain, &b0, &p) {
        Ok(rep) => {
            let fam = build_fj(&rep);
            out.extend(fj_entries(&fam));
            let l = lln_harness(&LlnSpec::Cascade(&fam), 1_000_000, seed);
            out.push(AuditEntry::count("cascade", "etemadi_conditions", usize::from(!l.conditions.hold), 1));
        }
        Err(e) => out.push(AuditEntry::errored("cascade", "fj_zero_mean", &e)),
    }
    let control = lln_harness(&LlnSpec::Uniform, 1_000_000, seed);
    out.push(AuditEntry::at_most("cascade", "lln_uniform_control", control.final_value.abs(), 0.01, 1_000_000));
    out
}

fn cauchy(seed: u64) -> Vec<AuditEntry> {
    let mut out = Vec::new();
    let mut r = rng(seed, 6);

    let flux_cfg: Vec<(usize, f64, CatalogField, f64, f64)> = (0..20)
        .map(|i| {
            let dim = 2 + i % 2;
            let slope = r.gen_range(-0.1..0.1);
            (dim, slope, random_mix(&mut r, dim, slope).expect("valid mixture"), r.gen_range(-0.2..0.2), r.gen_range(0.1..0.4))
        })
        .collect();
    let flux: Vec<Result<f64>> = flux_cfg
        .par_iter()
        .map(|(dim, slope, u, s, rad)| {
            let d = GraphDomain::at_origin(LipschitzGraph::ramp(*dim, *slope)?, 1.0)?.with_extent(2.0);
            let x0 = above(&d.graph, *s, 0.0, 0.0);
            Ok(rellich_necas_flux(u, &d, &x0, *rad, &Cutoff::default(), 1e-10)?.relative)
        })
        .collect();
    out.push(AuditEntry::at_most("cauchy", "flux_identity", worst(&flux, |v| *v), 1e-6, flux.len()).quadrature().with_detail(first_error(&flux)));

    let ratio_cfg: Vec<(usize, &str, i32, f64)> = [2usize, 3]
        .iter()
        .flat_map(|&d| [("linear", 1), ("bilinear", 2)].into_iter().flat_map(move |(n, k)| [0.01, 0.05, 0.1].map(|r| (d, n, k, r))))
        .collect();
    let ratio: Vec<Result<f64>> = ratio_cfg
        .par_iter()
        .map(|&(dim, name, deg, rad)| {
            let d = GraphDomain::at_origin(LipschitzGraph::flat(dim)?, 1.0)?;
            let v = vanish_ratio(&CatalogField::named(dim, name)?, &d, &[0.0; 3], rad, 1e-9)?;
            Ok((v.ratio / 6f64.powi(-(dim as i32 + deg)) - 1.0).abs())
        })
        .collect();
    out.push(AuditEntry::at_most("cauchy", "vanish_ratio", worst(&ratio, |v| *v), 1e-3, ratio.len()).quadrature().with_detail(first_error(&ratio)));

    let mass = (|| -> Result<(f64, f64)> {
        let d = GraphDomain::at_origin(LipschitzGraph::flat(2)?, 1.0)?;
        let u = CatalogField::named(2, "linear")?;
        let full = normal_mass_bound(&u, &d, &[0.0; 3], 0.3, &MaskSpec::Empty {}, 1e-10)?;
        let strip = normal_mass_bound(&u, &d, &[0.0; 3], 0.3, &MaskSpec::Strip { fraction: 0.1 }, 1e-10)?;
        Ok(((full.mass / full.sigma_ball - 1.0).abs(), (strip.fraction - 0.1).abs()))
    })();
    match mass {
        Ok((m, f)) => {
            out.push(AuditEntry::at_most("cauchy", "normal_mass_linear", m, 1e-8, 1).quadrature());
            out.push(AuditEntry::at_most("cauchy", "mask_fraction", f, 1e-8, 1).quadrature());
        }
        Err(e) => out.push(AuditEntry::errored("cauchy", "normal_mass_linear", &e)),
    }

    let c2 = GraphDomain::at_origin(LipschitzGraph::flat(2).expect("dimension"), 1.0)
        .and_then(|d| c2_constant(&d, &[0.0; 3], 1.0));
    match c2 {
        Ok(c) => out.push(
            AuditEntry::at_most("cauchy", "c2_flat", (c - 0.05).abs(), 1e-12, 1).with_detail(format!("alpha {}", alpha_from_c2(c))),
        ),
        Err(e) => out.push(AuditEntry::errored("cauchy", "c2_flat", &e)),
    }

    let families = [
        AlphaParams { family: CauchyFamily::LinearScaling { field: "linear".into() }, ..Default::default() },
        AlphaParams::default(),
    ];
    let fits: Vec<Result<(f64, f64, usize)>> = families
        .par_iter()
        .map(|p| estimate_alpha(p).map(|f| (f.alpha, f.r2, f.samples.len())))
        .collect();
    match &fits[0] {
        Ok((a, r2, n)) => {
            out.push(AuditEntry::at_most("cauchy", "alpha_linear", (a - 1.0).abs(), 0.01, *n));
            out.push(AuditEntry::at_least("cauchy", "alpha_linear_r2", *r2, 0.999, *n));
        }
        Err(e) => out.push(AuditEntry::errored("cauchy", "alpha_linear", e)),
    }
    match &fits[1] {
        Ok((a, r2, n)) => {
            let mut e = AuditEntry::at_least("cauchy", "alpha_positive", *a, 0.0, *n);
            e.passed = *a > 0.0;
            out.push(e);
            out.push(AuditEntry::at_least("cauchy", "alpha_r2", *r2, 0.9, *n));
        }
        Err(e) => out.push(AuditEntry::errored("cauchy", "alpha_positive", e)),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_selects_one_module() {
        let r = verify_suite(&VerifyOptions { filter: Some("geometry".into()), ..Default::default() });
        assert!(!r.audits.is_empty());
        assert!(r.audits.iter().all(|a| a.module == "geometry"));
        assert!(r.passed(), "{:?}", r.audits);
    }

    #[test]
    fn unknown_filter_fails() {
        let r = verify_suite(&VerifyOptions { filter: Some("nothing".into()), ..Default::default() });
        assert!(!r.passed());
    }

    #[test]
    fn tight_tolerance_fails_quadrature_checks() {
        let r = verify_suite(&VerifyOptions { filter: Some("geometry.cap_area".into()), tol: Some(1e-17), ..Default::default() });
        assert_eq!(r.audits.len(), 1);
        assert!(!r.passed());
        assert_eq!(r.audits[0].tolerance, 1e-17);
    }
}
