use rayon::prelude::*;
use serde::Serialize;

use super::{derivative_f, frequency_value, h_average, FrequencyParams};
use crate::error::{Error, Result};
use crate::fields::HarmonicField;
use crate::geometry::GraphDomain;
use crate::point::{dist, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Admissibility {
    /// Every radius passes the cone condition.
    Cone,
    /// Certified by measured `∂_r F ≥ -slack` only.
    Measured,
    /// Both criteria contribute.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibleInterval {
    pub r_lo: f64,
    pub r_hi: f64,
    pub criterion: Admissibility,
    pub points: usize,
}

/// Maximal runs of `r_grid` on which `h > 0` and either the cone condition
/// or the measured sign of `∂_r F` certifies admissibility.
pub fn admissible_scan(
    field: &dyn HarmonicField,
    domain: &GraphDomain,
    x: &Point,
    r_grid: &[f64],
    params: &FrequencyParams,
) -> Result<Vec<AdmissibleInterval>> {
    if r_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("radius grid must increase".into()));
    }
    let flags: Vec<(bool, bool)> = r_grid
        .par_iter()
        .map(|&r| {
            let cone = domain.cone_condition_check(x, r, params.cone_samples).holds;
            match derivative_f(field, domain, x, r, params) {
                Ok(d) => {
                    let f = frequency_value(field, domain, x, r, params.tol).unwrap_or(0.0);
                    (cone, d.df_formula >= -params.slack(f) / r)
                }
                Err(Error::ZeroAverage { .. }) => (false, false),
                // Quadrature trouble: only the geometric certificate counts.
                Err(_) => (cone, false),
            }
        })
        .collect();
    // h > 0 is part of the measured flag; the cone flag needs it separately.
    let positive: Vec<bool> = r_grid
        .par_iter()
        .map(|&r| h_average(field, domain, x, r, params.tol).map(|h| h > params.zero_floor).unwrap_or(false))
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < r_grid.len() {
        let ok = |k: usize| positive[k] && (flags[k].0 || flags[k].1);
        if !ok(i) {
            i += 1;
            continue;
        }
        let start = i;
        while i < r_grid.len() && ok(i) {
            i += 1;
        }
        let run = &flags[start..i];
        let criterion = if run.iter().all(|f| f.0) {
            Admissibility::Cone
        } else if run.iter().all(|f| !f.0) {
            Admissibility::Measured
        } else {
            Admissibility::Mixed
        };
        out.push(AdmissibleInterval { r_lo: r_grid[start], r_hi: r_grid[i - 1], criterion, points: i - start });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub f_r: f64,
    /// `log_a (h(x,ar) / h(x,r))`.
    pub ratio_index: f64,
    pub f_ar: f64,
    pub ok: bool,
    /// The multiplicative form `h(r)(R/r)^{F(r)} ≤ h(R) ≤ h(r)(R/r)^{F(R)}`.
    pub ok_multiplicative: bool,
    pub certified_by_cone: bool,
}

/// Certifies `[r, R]` admissible: cone condition at `R`, else measured
/// `∂_r F` on eight log-spaced radii.
fn certify(field: &dyn HarmonicField, domain: &GraphDomain, x: &Point, r: f64, big_r: f64, params: &FrequencyParams) -> Result<bool> {
    if domain.cone_condition_check(x, big_r, params.cone_samples).holds {
        return Ok(true);
    }
    for i in 0..8 {
        let t = r * (big_r / r).powf(i as f64 / 7.0);
        let d = derivative_f(field, domain, x, t, params)?;
        let f = frequency_value(field, domain, x, t, params.tol)?;
        if d.df_formula < -params.slack(f) / t {
            return Err(Error::NotAdmissible { r_lo: r, r_hi: big_r });
        }
    }
    Ok(false)
}

/// `F(x,r) ≤ log_a h(x,ar)/h(x,r) ≤ F(x,ar)`.
pub fn convexity_check(
    field: &dyn HarmonicField,
    domain: &GraphDomain,
    x: &Point,
    r: f64,
    a: f64,
    params: &FrequencyParams,
) -> Result<ConvexityReport> {
    if !(a > 1.0) {
        return Err(Error::InvalidArgument(format!("dilation a = {a} must exceed 1")));
    }
    let big_r = a * r;
    let certified_by_cone = certify(field, domain, x, r, big_r, params)?;
    let f_r = frequency_value(field, domain, x, r, params.tol)?;
    let f_ar = frequency_value(field, domain, x, big_r, params.tol)?;
    let h_r = h_average(field, domain, x, r, params.tol)?;
    let h_big = h_average(field, domain, x, big_r, params.tol)?;
    let ratio_index = (h_big / h_r).ln() / a.ln();
    let s = params.slack(f_ar);
    let ok = f_r <= ratio_index + s && ratio_index <= f_ar + s;
    let lower = h_r * a.powf(f_r);
    let upper = h_r * a.powf(f_ar);
    let rel = s * a.ln();
    let ok_multiplicative = lower <= h_big * (1.0 + rel) && h_big <= upper * (1.0 + rel);
    Ok(ConvexityReport { f_r, ratio_index, f_ar, ok, ok_multiplicative, certified_by_cone })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationReport {
    /// `F(y, r)`.
    pub lhs: f64,
    /// `F(x, 2(1+√γ) r)`.
    pub f_x: f64,
    /// `(1 + C_min √γ) F_x + C_min √γ`.
    pub rhs_env: f64,
    pub c_min: f64,
}

/// Smallest `C ≥ 0` with `F(y,r) ≤ (1+C√γ) F(x, 2(1+√γ)r) + C√γ`.
pub fn perturbation_check(
    field: &dyn HarmonicField,
    domain: &GraphDomain,
    x: &Point,
    y: &Point,
    r: f64,
    gamma: f64,
    params: &FrequencyParams,
) -> Result<PerturbationReport> {
    if !(gamma > 0.0 && gamma < 0.1) {
        return Err(Error::PreconditionFailed(format!("γ = {gamma} outside (0, 1/10)")));
    }
    if dist(x, y) > gamma * r * (1.0 + 1e-12) {
        return Err(Error::PreconditionFailed(format!("|x - y| = {} exceeds γr", dist(x, y))));
    }
    domain
        .check_ball(x, 5.0 * r)
        .map_err(|e| Error::PreconditionFailed(format!("B(x, 5r) not inside the window: {e}")))?;
    let sg = gamma.sqrt();
    let outer = 2.0 * (1.0 + sg) * r;
    for p in [x, y] {
        certify(field, domain, p, r, outer, params)
            .map_err(|e| Error::PreconditionFailed(format!("admissibility of [r, 2(1+√γ)r] not certified: {e}")))?;
    }
    let lhs = frequency_value(field, domain, y, r, params.tol)?;
    let f_x = frequency_value(field, domain, x, outer, params.tol)?;
    let c_min = ((lhs - f_x) / (sg * (f_x + 1.0))).max(0.0);
    Ok(PerturbationReport { lhs, f_x, rhs_env: (1.0 + c_min * sg) * f_x + c_min * sg, c_min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{CatalogField, Term};
    use crate::frequency::geometric_radii;
    use crate::geometry::LipschitzGraph;

    fn flat(dim: usize) -> GraphDomain {
        GraphDomain::at_origin(LipschitzGraph::flat(dim).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn flat_scan_is_one_cone_interval() {
        let u = CatalogField::named(2, "bilinear").unwrap();
        let grid = geometric_radii(0.01, 0.5, 6).unwrap();
        let iv = admissible_scan(&u, &flat(2), &[0.1, 0.0, 0.05], &grid, &FrequencyParams::default()).unwrap();
        assert_eq!(iv.len(), 1);
        assert_eq!(iv[0].criterion, Admissibility::Cone);
        assert_eq!((iv[0].r_lo, iv[0].r_hi), (0.01, 0.5));
    }

    #[test]
    fn sawtooth_deep_point_is_cone_admissible() {
        let d = GraphDomain::at_origin(LipschitzGraph::sawtooth(2, 0.3, 0.4).unwrap(), 1.0)
            .unwrap()
            .with_extent(8.0);
        let u = CatalogField::named(2, "linear").unwrap();
        let grid = geometric_radii(0.1, 1.0, 4).unwrap();
        let x = [0.0, 0.0, 1.0];
        let iv = admissible_scan(&u, &d, &x, &grid, &FrequencyParams::default()).unwrap();
        assert_eq!(iv.len(), 1);
        assert_eq!(iv[0].criterion, Admissibility::Cone);
    }

    #[test]
    fn sawtooth_shallow_point_reports_measured() {
        let d = GraphDomain::at_origin(LipschitzGraph::sawtooth(2, 0.3, 0.4).unwrap(), 1.0).unwrap();
        let u = CatalogField::named(2, "linear").unwrap();
        let grid = geometric_radii(0.05, 1.0, 5).unwrap();
        let x = [0.0, 0.0, 0.01];
        let iv = admissible_scan(&u, &d, &x, &grid, &FrequencyParams::default()).unwrap();
        let big = d.cone_condition_check(&x, 1.0, 256);
        assert!(!big.holds);
        // Whatever the measured verdict, the large radii are not cone-certified.
        assert!(iv.iter().all(|i| i.criterion != Admissibility::Cone || i.r_hi < 1.0));
    }

    #[test]
    fn convexity_equalities_for_homogeneous_fields() {
        let p = FrequencyParams { tol: 1e-10, ..Default::default() };
        let lin = CatalogField::named(2, "linear").unwrap();
        let c = convexity_check(&lin, &flat(2), &[0.0; 3], 0.2, 2.0, &p).unwrap();
        assert!(c.ok && c.ok_multiplicative);
        assert!((c.f_r - 2.0).abs() < 1e-8 && (c.ratio_index - 2.0).abs() < 1e-8 && (c.f_ar - 2.0).abs() < 1e-8);
        let bil = CatalogField::named(2, "bilinear").unwrap();
        let c = convexity_check(&bil, &flat(2), &[0.0; 3], 0.05, 12.0, &p).unwrap();
        assert!((c.ratio_index - 4.0).abs() < 1e-8 && (c.f_r - 4.0).abs() < 1e-8 && (c.f_ar - 4.0).abs() < 1e-8);
    }

    #[test]
    fn convexity_strict_for_mixture() {
        let mix = CatalogField::mix(2, vec![(1.0, Term::Linear), (0.1, Term::OddHarmonic { k: 3 })]).unwrap();
        let c = convexity_check(&mix, &flat(2), &[0.0; 3], 0.1, 2.0, &FrequencyParams::default()).unwrap();
        assert!(c.ok);
        assert!(c.f_r < c.ratio_index && c.ratio_index < c.f_ar);
    }

    #[test]
    fn perturbation_examples() {
        let p = FrequencyParams::default();
        let d = flat(2).with_extent(4.0);
        let lin = CatalogField::named(2, "linear").unwrap();
        let rep = perturbation_check(&lin, &d, &[0.0; 3], &[0.003, 0.0, 0.0], 0.3, 0.01, &p).unwrap();
        assert!(rep.c_min == 0.0);
        let mix = CatalogField::mix(2, vec![(1.0, Term::Linear), (0.5, Term::OddHarmonic { k: 3 })]).unwrap();
        let rep = perturbation_check(&mix, &d, &[0.0; 3], &[0.0; 3], 0.2, 1e-4, &p).unwrap();
        assert!(rep.c_min < 1e-6, "{rep:?}");
        let bil = CatalogField::named(2, "bilinear").unwrap();
        let rep = perturbation_check(&bil, &d, &[0.0; 3], &[0.001, 0.0, 0.0], 0.1, 0.01, &p).unwrap();
        assert!(rep.c_min.is_finite());
        let err = perturbation_check(&bil, &d, &[0.0; 3], &[0.5, 0.0, 0.0], 0.1, 0.01, &p).unwrap_err();
        assert!(matches!(err, Error::PreconditionFailed(_)));
    }
}
