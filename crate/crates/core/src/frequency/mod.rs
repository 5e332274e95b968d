//! Spherical averages, Dirichlet energy and the frequency function
//! `F(x,r) = r ∂_r h / h = 2r I / H`.

mod checks;

pub use checks::{
    admissible_scan, convexity_check, perturbation_check, AdmissibleInterval, Admissibility, ConvexityReport,
    PerturbationReport,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::HarmonicField;
use crate::geometry::{ball_integral, boundary_integral, sphere_integral, GraphDomain, Side};
use crate::point::{dot, norm2, sphere_area, sub, Point};
use crate::quad::Tolerance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMethod {
    /// `F = 2rI/H` only.
    Quotient,
    /// Also `F_fd` from centred differences of `log h`.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrequencyParams {
    /// Relative quadrature tolerance.
    pub tol: f64,
    /// Relative radial step for finite differences.
    pub rho_fd: f64,
    pub derivative: DerivativeMethod,
    /// Boundary samples for the cone condition.
    pub cone_samples: usize,
    /// `h` at or below this value is treated as zero.
    pub zero_floor: f64,
}

impl Default for FrequencyParams {
    fn default() -> Self {
        FrequencyParams {
            tol: 1e-8,
            rho_fd: 1e-3,
            derivative: DerivativeMethod::FiniteDifference,
            cone_samples: 256,
            zero_floor: 1e-300,
        }
    }
}

impl FrequencyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_fd > 0.0 && self.rho_fd < 0.1) {
            return Err(Error::InvalidArgument(format!("rho_fd = {} outside (0, 0.1)", self.rho_fd)));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidArgument(format!("tol = {} outside (0, 1)", self.tol)));
        }
        Ok(())
    }

    pub fn quadrature(&self) -> Tolerance {
        Tolerance { rel: self.tol, abs: 0.0, max_intervals: 600 }
    }

    /// Slack `5·tol` for inequalities between frequencies of size `f`.
    pub fn slack(&self, f: f64) -> f64 {
        5.0 * self.tol * f.abs().max(1.0)
    }
}

/// `[∫ u², ∫ u ∂_r u, ∫ (∂_r u)²]` over `∂B(x,r) ∩ Ω`.
pub fn sphere_moments(field: &dyn HarmonicField, domain: &GraphDomain, x: &Point, r: f64, tol: Tolerance) -> [f64; 3] {
    sphere_integral(&domain.graph, x, r, Side::Above, tol, |y| {
        let u = field.value(y);
        let dr = dot(&field.gradient(y), &sub(y, x)) / r;
        [u * u, u * dr, dr * dr]
    })
    .value
}

/// `h(x,r)`: mean of `u²` over the full sphere, `u` extended by zero.
pub fn h_average(field: &dyn HarmonicField, domain: &GraphDomain, x: &Point, r: f64, tol: f64) -> Result<f64> {
    domain.check_ball(x, r)?;
    let q = sphere_integral(&domain.graph, x, r, Side::Above, Tolerance::relative(tol), |y| {
        let u = field.value(y);
        [u * u]
    });
    if !q.converged {
        return Err(Error::MaxRefinementExceeded { limit: 400, error: q.error[0] });
    }
    Ok(q.value[0] / sphere_area(domain.dim(), r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Energy {
    /// `∫_{B∩Ω} |∇u|²`.
    pub volume: f64,
    /// `∫_{∂B∩Ω} u ∂_r u`.
    pub surface: f64,
}

/// Both forms of the Dirichlet energy `I(x,r)`.
pub fn dirichlet_energy(field: &dyn HarmonicField, domain: &GraphDomain, x: &Point, r: f64, tol: f64) -> Result<Energy> {
    domain.check_ball(x, r)?;
    let t = Tolerance::relative(tol);
    let vol = ball_integral(&domain.graph, x, r, Side::Above, t, |y| [norm2(&field.gradient(y))]);
    let surface = sphere_moments(field, domain, x, r, t)[1];
    let volume = vol.value[0];
    let combined = tol * (volume.abs() + surface.abs());
    if (volume - surface).abs() > 10.0 * combined.max(1e-4 * volume.abs()) && volume.abs() > 1e-300 {
        return Err(Error::CrossCheckFailed { volume, surface });
    }
    Ok(Energy { volume, surface })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyValue {
    pub r: f64,
    pub h: f64,
    #[serde(rename = "H")]
    pub big_h: f64,
    /// Energy from the surface form.
    #[serde(rename = "I")]
    pub energy: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "F_fd")]
    pub f_fd: Option<f64>,
}

impl FrequencyValue {
    /// `|F - F_fd| ≤ max(1e-3, 1e-2 F)`.
    pub fn fd_agrees(&self) -> Option<bool> {
        self.f_fd.map(|g| (self.f - g).abs() <= (1e-3f64).max(1e-2 * self.f.abs()))
    }
}

/// `F(x,r) = 2rI/H` with `I` in surface form.
pub fn frequency(
    field: &dyn HarmonicField,
    domain: &GraphDomain,
    x: &Point,
    r: f64,
    params: &FrequencyParams,
) -> Result<FrequencyValue> {
    params.validate()?;
    domain.check_ball(x, r)?;
    let m = sphere_moments(field, domain, x, r, params.quadrature());
    let sigma = sphere_area(domain.dim(), r);
    let h = m[0] / sigma;
    if !(h > params.zero_floor) {
        return Err(Error::ZeroAverage { h });
    }
    let f = 2.0 * r * m[1] / m[0];
    let f_fd = match params.derivative {
        DerivativeMethod::Quotient => None,
        DerivativeMethod::FiniteDifference => {
            let rho = params.rho_fd;
            let hp = h_average(field, domain, x, r * (1.0 + rho), params.tol * 0.1)?;
            let hm = h_average(field, domain, x, r * (1.0 - rho), params.tol * 0.1)?;
            if !(hm > params.zero_floor) {
                return Err(Error::ZeroAverage { h: hm });
            }
            Some((hp.ln() - hm.ln()) / (2.0 * rho))
        }
    };
    Ok(FrequencyValue { r, h, big_h: m[0], energy: m[1], f, f_fd })
}

/// Frequency without the finite-difference companion.
pub fn frequency_value(field: &dyn HarmonicField, domain: &GraphDomain, x: &Point, r: f64, tol: f64) -> Result<f64> {
    let p = FrequencyParams { tol, derivative: DerivativeMethod::Quotient, ..Default::default() };
    frequency(field, domain, x, r, &p).map(|v| v.f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeReport {
    pub df_formula: f64,
    pub df_fd: f64,
    /// `(2/H) ∫_{B∩Σ} (y-x)·ν |∂_ν u|²`.
    pub boundary_term: f64,
    /// `4r/H² (∫u² ∫|∂_r u|² - (∫u ∂_r u)²)`.
    pub cauchy_schwarz_term: f64,
}

/// `∂_r F` from the closed formula and from centred differences of `F`.
pub fn derivative_f(
    field: &dyn HarmonicField,
    domain: &GraphDomain,
    x: &Point,
    r: f64,
    params: &FrequencyParams,
) -> Result<DerivativeReport> {
    params.validate()?;
    domain.check_ball(x, r)?;
    let t = params.quadrature();
    let m = sphere_moments(field, domain, x, r, t);
    if !(m[0] / sphere_area(domain.dim(), r) > params.zero_floor) {
        return Err(Error::ZeroAverage { h: m[0] });
    }
    let big_h = m[0];
    let bracket = m[0] * m[2] - m[1] * m[1];
    let cauchy_schwarz_term = 4.0 * r / (big_h * big_h) * bracket;
    let b = boundary_integral(domain, x, r, &[], t, |y, nu| {
        let dn = dot(&field.gradient(y), nu);
        [dot(&sub(y, x), nu) * dn * dn]
    });
    let boundary_term = 2.0 / big_h * b.value[0];
    let rho = params.rho_fd;
    let fp = frequency_value(field, domain, x, r * (1.0 + rho), params.tol * 0.1)?;
    let fm = frequency_value(field, domain, x, r * (1.0 - rho), params.tol * 0.1)?;
    Ok(DerivativeReport {
        df_formula: cauchy_schwarz_term + boundary_term,
        df_fd: (fp - fm) / (2.0 * rho * r),
        boundary_term,
        cauchy_schwarz_term,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub r: f64,
    pub h: f64,
    #[serde(rename = "H")]
    pub big_h: f64,
    #[serde(rename = "I")]
    pub energy: f64,
    pub energy_volume: Option<f64>,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "F_fd")]
    pub f_fd: Option<f64>,
    pub df: Option<f64>,
    pub admissible_cone: bool,
    pub admissible_measured: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyProfile {
    pub x: Point,
    pub rows: Vec<ProfileRow>,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ProfileOptions {
    pub volume_energy: bool,
    pub derivative: bool,
}

/// Geometric radii `r_min · q^i`, `i < count`, ending at `r_max`.
pub fn geometric_radii(r_min: f64, r_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(r_min > 0.0 && r_max > r_min) || count < 2 {
        return Err(Error::InvalidArgument("need 0 < r_min < r_max and at least two radii".into()));
    }
    let q = (r_max / r_min).powf(1.0 / (count - 1) as f64);
    Ok((0..count).map(|i| if i + 1 == count { r_max } else { r_min * q.powi(i as i32) }).collect())
}

/// Frequency profile over `radii`, evaluated in parallel.
pub fn profile(
    field: &dyn HarmonicField,
    domain: &GraphDomain,
    x: &Point,
    radii: &[f64],
    params: &FrequencyParams,
    options: ProfileOptions,
) -> Result<FrequencyProfile> {
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("radii must increase".into()));
    }
    let rows: Vec<Result<ProfileRow>> = radii
        .par_iter()
        .map(|&r| {
            let v = frequency(field, domain, x, r, params)?;
            let energy_volume = if options.volume_energy {
                Some(dirichlet_energy(field, domain, x, r, params.tol)?.volume)
            } else {
                None
            };
            let df = if options.derivative { Some(derivative_f(field, domain, x, r, params)?.df_formula) } else { None };
            let cone = domain.cone_condition_check(x, r, params.cone_samples).holds;
            Ok(ProfileRow {
                r,
                h: v.h,
                big_h: v.big_h,
                energy: v.energy,
                energy_volume,
                f: v.f,
                f_fd: v.f_fd,
                df,
                admissible_cone: cone,
                admissible_measured: df.map(|d| d >= -params.slack(v.f) / r),
            })
        })
        .collect();
    Ok(FrequencyProfile { x: *x, rows: rows.into_iter().collect::<Result<_>>()?, tol: params.tol })
}

impl FrequencyProfile {
    /// `h(r_{i+1}) ≥ h(r_i) - 3·tol·h(r_{i+1})` for all rows.
    pub fn h_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].h >= w[0].h - 3.0 * self.tol * w[1].h)
    }

    /// Largest `|I_volume - I_surface| / I_volume` over rows with a volume value.
    pub fn energy_mismatch(&self) -> f64 {
        self.rows
            .iter()
            .filter_map(|r| r.energy_volume.map(|v| if v.abs() > 0.0 { (v - r.energy).abs() / v.abs() } else { 0.0 }))
            .fold(0.0, f64::max)
    }
}
