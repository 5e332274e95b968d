//! Quantitative Cauchy uniqueness near a flat or Lipschitz boundary piece:
//! the Rellich–Necas flux identity, the normal-derivative mass bound,
//! three-ball interpolation, the vanishing ratio, and an empirical fit of
//! the exponent in `sup |v| ≤ C ε^α`.

mod alpha;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::HarmonicField;
use crate::geometry::{ball_integral, boundary_integral, sphere_integral, GraphDomain, LipschitzGraph, Side};
use crate::point::{dot, norm2, sphere_area, sub, Point, VERTICAL};
use crate::quad::{bisect, integrate_with_breaks, Tolerance};

pub use alpha::{estimate_alpha, AlphaParams, CauchyFamily, CauchyFitResult, CauchySample, HalfBallProblem};

/// `h ≤ FLOOR` is treated as zero.
const FLOOR: f64 = 1e-300;

/// Radial quintic bump: `1` on `B(x0, inner·r)`, `0` outside `B(x0, outer·r)`,
/// `C²` at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff { inner: 1.0, outer: 1.5 }
    }
}

impl Cutoff {
    pub fn validate(&self) -> Result<()> {
        if !(self.inner > 0.0 && self.inner < self.outer && self.outer <= 2.0) {
            return Err(Error::InvalidArgument(format!("cutoff needs 0 < inner < outer ≤ 2, got {self:?}")));
        }
        Ok(())
    }

    fn t(&self, rho: f64, r: f64) -> f64 {
        ((rho / r - self.inner) / (self.outer - self.inner)).clamp(0.0, 1.0)
    }

    pub fn value(&self, rho: f64, r: f64) -> f64 {
        let t = self.t(rho, r);
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }

    /// `dφ/dρ`.
    pub fn slope(&self, rho: f64, r: f64) -> f64 {
        let t = self.t(rho, r);
        -30.0 * t * t * (1.0 - t) * (1.0 - t) / ((self.outer - self.inner) * r)
    }
}

fn require_harmonic(field: &dyn HarmonicField, x: &Point, radius: f64) -> Result<()> {
    let h = field.harmonic_radius(x);
    if h <= radius {
        return Err(Error::NotHarmonicRegion { radius: h });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxReport {
    /// `∫_{∂D∩B_2r} φ |∂_ν v|² (e_n·ν) dσ`.
    pub lhs: f64,
    /// `-∫ ∂_n φ |∇v|²`.
    pub rhs_energy: f64,
    /// `2 ∫ Σ_i ∂_i φ ∂_i v ∂_n v`.
    pub rhs_cross: f64,
    pub rhs: f64,
    pub residual: f64,
    /// `residual / max(|lhs|, |rhs_energy| + |rhs_cross|)`, zero when all terms vanish.
    pub relative: f64,
}

/// Both sides of the integrated Rellich–Necas identity with `β = φ e_n`,
/// for `v` vanishing on Σ.
pub fn rellich_necas_flux(
    field: &dyn HarmonicField,
    domain: &GraphDomain,
    x0: &Point,
    r: f64,
    cutoff: &Cutoff,
    tol: f64,
) -> Result<FluxReport> {
    cutoff.validate()?;
    if !(r > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    domain.check_ball(x0, 2.0 * r)?;
    require_harmonic(field, x0, 2.0 * r)?;
    let graph = &domain.graph;
    let qt = Tolerance::relative(tol);
    let (a, b) = (cutoff.inner * r, cutoff.outer * r);

    let breaks: Vec<f64> = domain
        .boundary_intervals(x0, a)
        .into_iter()
        .flat_map(|(lo, hi)| [lo, hi])
        .collect();
    let lhs = boundary_integral(domain, x0, b, &breaks, qt, |y, nu| {
        let dn = dot(&field.gradient(y), nu);
        let rho = norm2(&sub(y, x0)).sqrt();
        [cutoff.value(rho, r) * dn * dn * nu[VERTICAL]]
    })
    .value[0];

    let d = graph.distance(x0);
    let radial_breaks: Vec<f64> = if d > a && d < b { vec![d] } else { Vec::new() };
    let inner = qt.inner();
    let vol = integrate_with_breaks(
        |rho| {
            let dphi = cutoff.slope(rho, r);
            if dphi == 0.0 {
                return [0.0; 2];
            }
            sphere_integral(graph, x0, rho, Side::Above, inner, |y| {
                let g = field.gradient(y);
                let e = [(y[0] - x0[0]) / rho, (y[1] - x0[1]) / rho, (y[2] - x0[2]) / rho];
                let dn_phi = dphi * e[VERTICAL];
                [-dn_phi * norm2(&g), 2.0 * dphi * dot(&e, &g) * g[VERTICAL]]
            })
            .value
        },
        a,
        b,
        &radial_breaks,
        qt,
    );
    let [rhs_energy, rhs_cross] = vol.value;
    let rhs = rhs_energy + rhs_cross;
    let residual = (lhs - rhs).abs();
    let scale = lhs.abs().max(rhs_energy.abs() + rhs_cross.abs());
    Ok(FluxReport {
        lhs,
        rhs_energy,
        rhs_cross,
        rhs,
        residual,
        relative: if scale > 0.0 { residual / scale } else { 0.0 },
    })
}

/// The set `E ⊂ ∂D∩B_r` on which `∂_ν v = 0` is imposed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaskSpec {
    /// `E = ∅`.
    Empty {},
    /// The complement of `E` is the strip `|y_1 - x0_1| ≤ w` carrying the
    /// fraction `fraction` of `σ(∂D∩B_r)`.
    Strip { fraction: f64 },
}

impl Default for MaskSpec {
    fn default() -> Self {
        MaskSpec::Empty {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassReport {
    pub r: f64,
    /// `σ(∂D∩B_r∖E) / σ(∂D∩B_r)`.
    pub fraction: f64,
    pub strip_half_width: Option<f64>,
    pub sigma_ball: f64,
    pub sigma_free: f64,
    /// `‖μ‖ = ∫_{∂D∩B_r∖E} |∂_ν v| dσ`.
    pub mass: f64,
    /// `∫_{∂D∩B_r} |∂_ν v|² dσ`.
    pub flux_l2: f64,
    /// `∫_{B_2r∩D} v²`.
    pub bulk: f64,
    /// `(flux_l2 · σ_free)^{1/2}`.
    pub cauchy_schwarz: f64,
    /// `flux_l2 / (r^{-3} bulk)`.
    pub caccioppoli_ratio: f64,
    /// `fraction^{1/2} r^{n/2-2} bulk^{1/2}`.
    pub bound: f64,
    /// `mass / bound`, zero when both vanish.
    pub ratio: f64,
}

/// `‖μ‖` for `μ = -∂_ν v σ` on `∂D∩B_r∖E` against its Cauchy–Schwarz and
/// Caccioppoli bounds.
pub fn normal_mass_bound(
    field: &dyn HarmonicField,
    domain: &GraphDomain,
    x0: &Point,
    r: f64,
    mask: &MaskSpec,
    tol: f64,
) -> Result<MassReport> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    domain.check_ball(x0, 2.0 * r)?;
    require_harmonic(field, x0, 2.0 * r)?;
    let qt = Tolerance::relative(tol);
    let n = domain.dim() as f64;
    let strip_area = |w: f64| -> f64 {
        boundary_integral(domain, x0, r, &[x0[0] - w, x0[0] + w], qt, |y, _| {
            [if (y[0] - x0[0]).abs() <= w { 1.0 } else { 0.0 }]
        })
        .value[0]
    };
    let sigma_ball = boundary_integral(domain, x0, r, &[], qt, |_, _| [1.0]).value[0];
    let width = match *mask {
        MaskSpec::Empty {} => None,
        MaskSpec::Strip { fraction } => {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::InvalidArgument(format!("mask fraction {fraction} outside (0, 1]")));
            }
            let target = fraction * sigma_ball;
            Some(bisect(|w| strip_area(w) - target, 0.0, r, 1e-14 * r))
        }
    };
    let mut breaks = Vec::new();
    if let Some(w) = width {
        breaks.extend([x0[0] - w, x0[0] + w]);
    }
    let free = |y: &Point| width.map_or(true, |w| (y[0] - x0[0]).abs() <= w);
    let [sigma_free, mass, flux_l2] = boundary_integral(domain, x0, r, &breaks, qt, |y, nu| {
        let dn = dot(&field.gradient(y), nu);
        let f = if free(y) { 1.0 } else { 0.0 };
        [f, f * dn.abs(), dn * dn]
    })
    .value;
    let bulk = ball_integral(&domain.graph, x0, 2.0 * r, Side::Above, qt, |y| {
        let v = field.value(y);
        [v * v]
    })
    .value[0];
    let fraction = sigma_free / sigma_ball;
    let bound = fraction.sqrt() * r.powf(0.5 * n - 2.0) * bulk.sqrt();
    Ok(MassReport {
        r,
        fraction,
        strip_half_width: width,
        sigma_ball,
        sigma_free,
        mass,
        flux_l2,
        bulk,
        cauchy_schwarz: (flux_l2 * sigma_free).sqrt(),
        caccioppoli_ratio: if bulk > 0.0 { flux_l2 * r.powi(3) / bulk } else { 0.0 },
        bound,
        ratio: if bound > 0.0 { mass / bound } else { 0.0 },
    })
}

/// `c_2`: the largest `c` with `B(x', 2cr)` closed inside `B(x0, r)` and
/// disjoint from `D̄`, for `x' = x0 - (r/10) e_n`.
pub fn c2_constant(domain: &GraphDomain, x0: &Point, r: f64) -> Result<f64> {
    let mut xp = *x0;
    xp[VERTICAL] -= 0.1 * r;
    if domain.graph.is_above(&xp) {
        return Err(Error::PreconditionFailed("x' = x0 - (r/10)e_n is not below the graph".into()));
    }
    let dist_in = r - 0.1 * r;
    let fits = |c: f64| {
        let rho = 2.0 * c * r;
        rho < domain.graph.distance(&xp) && rho < dist_in
    };
    if !fits(0.0) {
        return Err(Error::PreconditionFailed("x' lies on the graph".into()));
    }
    Ok(bisect(|c| if fits(c) { -1.0 } else { 1.0 }, 0.0, 0.5, 1e-15))
}

/// `α = log(9/8) / log(3/(4c_2))`, the exponent with `(c_2 r)^α (3r/4)^{1-α} = 2r/3`.
pub fn alpha_from_c2(c2: f64) -> f64 {
    (9.0f64 / 8.0).ln() / (3.0 / (4.0 * c2)).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThreeBallReport {
    pub alpha: f64,
    pub r1: f64,
    pub r_mid: f64,
    pub r2: f64,
    pub h1: f64,
    pub h_mid: f64,
    pub h2: f64,
    /// `h1^α h2^{1-α}`.
    pub interpolated: f64,
    /// `(interpolated - h_mid) / interpolated`; non-negative when the inequality holds.
    pub relative_gap: f64,
    pub ok: bool,
}

/// Spherical mean of `g²` over the full sphere.
pub fn spherical_mean_sq(g: &dyn HarmonicField, x: &Point, rho: f64, tol: f64) -> f64 {
    let dim = g.dim();
    let flat = LipschitzGraph::flat(dim).expect("dimension checked by the field");
    let s = sphere_integral(&flat, x, rho, Side::Whole, Tolerance::relative(tol), |p| {
        let v = g.value(p);
        [v * v]
    });
    s.value[0] / sphere_area(dim, rho)
}

/// `h_g(x', r1^α r2^{1-α}) ≤ h_g(x', r1)^α h_g(x', r2)^{1-α}` within `5·tol`.
pub fn three_ball_interp(g: &dyn HarmonicField, x: &Point, r1: f64, r2: f64, alpha: f64, tol: f64) -> Result<ThreeBallReport> {
    if !(r1 > 0.0 && r2 > r1) {
        return Err(Error::InvalidArgument("three-ball radii need 0 < r1 < r2".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    require_harmonic(g, x, r2)?;
    let r_mid = r1.powf(alpha) * r2.powf(1.0 - alpha);
    let h1 = spherical_mean_sq(g, x, r1, tol);
    let h_mid = spherical_mean_sq(g, x, r_mid, tol);
    let h2 = spherical_mean_sq(g, x, r2, tol);
    let interpolated = h1.powf(alpha) * h2.powf(1.0 - alpha);
    let relative_gap = if interpolated > FLOOR { (interpolated - h_mid) / interpolated } else { 0.0 };
    Ok(ThreeBallReport {
        alpha,
        r1,
        r_mid,
        r2,
        h1,
        h_mid,
        h2,
        interpolated,
        relative_gap,
        ok: h_mid <= interpolated * (1.0 + 5.0 * tol) + FLOOR,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VanishRatio {
    pub r: f64,
    /// `∫_{B(x,r)∩D} |v|`.
    pub inner: f64,
    /// `∫_{B(x,6r)∩D} |v|`.
    pub outer: f64,
    pub ratio: f64,
}

/// `∫_{B(x,r)∩D} |v| / ∫_{B(x,6r)∩D} |v|`.
pub fn vanish_ratio(field: &dyn HarmonicField, domain: &GraphDomain, x: &Point, r: f64, tol: f64) -> Result<VanishRatio> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    domain.check_ball(x, 6.0 * r)?;
    let qt = Tolerance::relative(tol);
    let abs_v = |y: &Point| [field.value(y).abs()];
    let inner = ball_integral(&domain.graph, x, r, Side::Above, qt, abs_v).value[0];
    let outer = ball_integral(&domain.graph, x, 6.0 * r, Side::Above, qt, abs_v).value[0];
    if outer <= FLOOR {
        return Err(Error::ZeroDenominator { value: outer });
    }
    Ok(VanishRatio { r, inner, outer, ratio: inner / outer })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{CatalogField, Term};

    fn flat(dim: usize) -> GraphDomain {
        GraphDomain::at_origin(LipschitzGraph::flat(dim).unwrap(), 1.0).unwrap().with_extent(8.0)
    }

    #[test]
    fn cutoff_shape() {
        let c = Cutoff::default();
        assert_eq!(c.value(0.5, 1.0), 1.0);
        assert_eq!(c.value(1.0, 1.0), 1.0);
        assert_eq!(c.value(1.5, 1.0), 0.0);
        assert!((c.value(1.25, 1.0) - 0.5).abs() < 1e-15);
        let h = 1e-6;
        let fd = (c.value(1.2 + h, 1.0) - c.value(1.2 - h, 1.0)) / (2.0 * h);
        assert!((fd - c.slope(1.2, 1.0)).abs() < 1e-8);
    }

    #[test]
    fn flux_linear_flat() {
        // LHS = -∫ φ dσ in closed form: -2(1 + ∫_1^{1.5} φ) r = -2·1.25·r.
        let d = flat(2);
        let u = CatalogField::named(2, "linear").unwrap();
        for r in [0.1, 0.3] {
            let rep = rellich_necas_flux(&u, &d, &[0.0; 3], r, &Cutoff::default(), 1e-11).unwrap();
            assert!((rep.lhs + 2.5 * r).abs() < 1e-9, "{rep:?}");
            assert!(rep.relative < 1e-6, "{rep:?}");
        }
    }

    #[test]
    fn flux_bilinear_and_zero() {
        for dim in [2, 3] {
            let d = flat(dim);
            let u = CatalogField::named(dim, "bilinear").unwrap();
            let rep = rellich_necas_flux(&u, &d, &[0.1, 0.0, 0.0], 0.2, &Cutoff::default(), 1e-10).unwrap();
            assert!(rep.relative < 1e-6, "{rep:?}");
        }
        let z = CatalogField::named(2, "zero").unwrap();
        let rep = rellich_necas_flux(&z, &flat(2), &[0.0; 3], 0.2, &Cutoff::default(), 1e-10).unwrap();
        assert_eq!((rep.lhs, rep.rhs, rep.relative), (0.0, 0.0, 0.0));
    }

    #[test]
    fn flux_on_ramp() {
        let slope = 0.1;
        let d = GraphDomain::at_origin(LipschitzGraph::ramp(2, slope).unwrap(), 1.0).unwrap().with_extent(8.0);
        let u = CatalogField::mix(2, vec![(1.0, Term::Linear), (0.5, Term::OddHarmonic { k: 3 })]).unwrap().placed([0.0; 3], slope);
        let x0 = d.lift(0.2, 0.0);
        let rep = rellich_necas_flux(&u, &d, &x0, 0.25, &Cutoff::default(), 1e-10).unwrap();
        assert!(rep.relative < 1e-6, "{rep:?}");
    }

    #[test]
    fn flux_requires_harmonicity() {
        let u = CatalogField::named(2, "poisson").unwrap();
        let err = rellich_necas_flux(&u, &flat(2), &[2.0, 0.0, 0.0], 0.6, &Cutoff::default(), 1e-8).unwrap_err();
        assert!(matches!(err, Error::NotHarmonicRegion { .. }));
    }

    #[test]
    fn mass_of_linear_field_is_surface_measure() {
        let u = CatalogField::named(2, "linear").unwrap();
        let rep = normal_mass_bound(&u, &flat(2), &[0.0; 3], 0.3, &MaskSpec::Empty {}, 1e-11).unwrap();
        assert!((rep.mass - 0.6).abs() < 1e-12 && (rep.sigma_ball - 0.6).abs() < 1e-12);
        assert_eq!(rep.fraction, 1.0);
        let z = CatalogField::named(2, "zero").unwrap();
        assert_eq!(normal_mass_bound(&z, &flat(2), &[0.0; 3], 0.3, &MaskSpec::Empty {}, 1e-11).unwrap().mass, 0.0);
    }

    #[test]
    fn mass_ratio_of_bilinear_is_stable() {
        let u = CatalogField::named(2, "bilinear").unwrap();
        let ratios: Vec<f64> = [0.1, 0.2, 0.4]
            .iter()
            .map(|&r| normal_mass_bound(&u, &flat(2), &[0.0; 3], r, &MaskSpec::Empty {}, 1e-10).unwrap().ratio)
            .collect();
        let (lo, hi) = (ratios.iter().cloned().fold(f64::INFINITY, f64::min), ratios.iter().cloned().fold(0.0, f64::max));
        assert!(hi / lo < 4.0, "{ratios:?}");
    }

    #[test]
    fn strip_mask_carries_fraction() {
        let u = CatalogField::named(2, "linear").unwrap();
        let rep = normal_mass_bound(&u, &flat(2), &[0.0; 3], 0.3, &MaskSpec::Strip { fraction: 0.1 }, 1e-11).unwrap();
        assert!((rep.fraction - 0.1).abs() < 1e-9);
        assert!((rep.mass - 0.06).abs() < 1e-9);
        assert!(rep.mass <= rep.cauchy_schwarz * (1.0 + 1e-9));
    }

    #[test]
    fn c2_on_flat_boundary() {
        let c2 = c2_constant(&flat(2), &[0.0; 3], 1.0).unwrap();
        assert!((c2 - 0.05).abs() < 1e-12);
        let a = alpha_from_c2(c2);
        assert!(((c2 * 1.0f64).powf(a) * 0.75f64.powf(1.0 - a) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn three_ball_equality_for_homogeneous() {
        for k in [1, 3, 6] {
            let g = CatalogField::single(2, Term::ReHarmonic { k }).unwrap();
            let rep = three_ball_interp(&g, &[0.0; 3], 0.1, 0.4, 0.3, 1e-12).unwrap();
            assert!(rep.relative_gap.abs() < 1e-8 && rep.ok, "{rep:?}");
            assert!((rep.h2 - 0.4f64.powi(2 * k as i32) / 2.0).abs() < 1e-12 * rep.h2);
        }
        let one = CatalogField::named(2, "constant").unwrap();
        let rep = three_ball_interp(&one, &[0.0; 3], 0.1, 0.4, 0.5, 1e-12).unwrap();
        assert!(rep.relative_gap.abs() < 1e-12);
    }

    #[test]
    fn three_ball_strict_for_mixture() {
        let g = CatalogField::mix(2, vec![(1.0, Term::ReHarmonic { k: 1 }), (1.0, Term::ReHarmonic { k: 5 })]).unwrap();
        let rep = three_ball_interp(&g, &[0.0; 3], 0.1, 0.4, 0.5, 1e-12).unwrap();
        assert!(rep.ok && rep.relative_gap > 1e-6, "{rep:?}");
    }

    #[test]
    fn vanish_ratio_homogeneity() {
        for dim in [2, 3] {
            let n = dim as i32;
            for (name, deg) in [("linear", 1), ("bilinear", 2)] {
                let u = CatalogField::named(dim, name).unwrap();
                for r in [0.05, 0.2] {
                    let v = vanish_ratio(&u, &flat(dim), &[0.0; 3], r, 1e-9).unwrap();
                    let exact = 6f64.powi(-(n + deg));
                    assert!((v.ratio / exact - 1.0).abs() < 1e-6, "{dim} {name} {r} {}", v.ratio);
                }
            }
        }
        let z = CatalogField::named(2, "zero").unwrap();
        assert!(matches!(vanish_ratio(&z, &flat(2), &[0.0; 3], 0.1, 1e-9), Err(Error::ZeroDenominator { .. })));
    }
}
