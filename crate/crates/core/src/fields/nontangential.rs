use serde::Serialize;

use super::HarmonicField;
use crate::error::{Error, Result};
use crate::geometry::{ConeOrientation, ConeSpec, GraphDomain};
use crate::point::{axpy, dot, norm, Point};

#[derive(Debug, Clone, Serialize)]
pub struct NontangentialLimit {
    /// Extrapolated `∇u` at the boundary point.
    pub gradient: Point,
    /// `∂_ν u = ∇u · ν` of the extrapolated limit.
    pub normal_derivative: f64,
    /// Components along the tangent frame.
    pub tangential: Vec<f64>,
    pub tangential_norm: f64,
    /// Last change between successive Richardson estimates.
    pub change: f64,
}

/// Limit of `∇u` along the inner cone axis `x - t ν(x)`, `t ∈ radii`
/// (decreasing), by first-order Richardson extrapolation of consecutive pairs.
pub fn nontangential_gradient(
    field: &dyn HarmonicField,
    domain: &GraphDomain,
    x: &Point,
    aperture: f64,
    radii: &[f64],
    tol: f64,
) -> Result<NontangentialLimit> {
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] < w[0] && w[1] > 0.0)) {
        return Err(Error::InvalidArgument("radii must be positive and strictly decreasing".into()));
    }
    let bp = domain.normal_at(x)?;
    let cone = ConeSpec::new(domain, &bp.position, aperture, ConeOrientation::Inner)?;
    let samples: Vec<(f64, Point)> = radii
        .iter()
        .map(|&t| {
            let p = axpy(&bp.position, -t, &bp.normal);
            debug_assert!(cone.contains(&p));
            (t, field.gradient(&p))
        })
        .collect();
    let estimates: Vec<Point> = samples
        .windows(2)
        .map(|w| {
            let (t0, g0) = w[0];
            let (t1, g1) = w[1];
            let mut e = [0.0; 3];
            for i in 0..3 {
                e[i] = (t0 * g1[i] - t1 * g0[i]) / (t0 - t1);
            }
            e
        })
        .collect();
    let last = *estimates.last().unwrap();
    let change = if estimates.len() >= 2 {
        let prev = estimates[estimates.len() - 2];
        norm(&[last[0] - prev[0], last[1] - prev[1], last[2] - prev[2]])
    } else {
        0.0
    };
    let scale = norm(&last).max(1.0);
    if change > tol * scale {
        return Err(Error::NoConvergence { change, tolerance: tol * scale });
    }
    let tangential: Vec<f64> = bp.tangents.iter().map(|t| dot(t, &last)).collect();
    let tangential_norm = tangential.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(NontangentialLimit {
        gradient: last,
        normal_derivative: dot(&last, &bp.normal),
        tangential,
        tangential_norm,
        change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{mfs_fit, CatalogField, MfsParams};
    use crate::geometry::LipschitzGraph;

    fn radii() -> Vec<f64> {
        (1..=6).map(|k| 0.1 * 0.5f64.powi(k)).collect()
    }

    #[test]
    fn linear_field_flat() {
        let d = GraphDomain::at_origin(LipschitzGraph::flat(2).unwrap(), 1.0).unwrap();
        let u = CatalogField::named(2, "linear").unwrap();
        let l = nontangential_gradient(&u, &d, &[0.0; 3], 0.5, &radii(), 1e-8).unwrap();
        assert_eq!(l.gradient, [0.0, 0.0, 1.0]);
        assert_eq!(l.tangential_norm, 0.0);
    }

    #[test]
    fn bilinear_limit_is_normal() {
        let d = GraphDomain::at_origin(LipschitzGraph::flat(2).unwrap(), 1.0).unwrap();
        let u = CatalogField::named(2, "bilinear").unwrap();
        let s = 0.37;
        let l = nontangential_gradient(&u, &d, &[s, 0.0, 0.0], 0.5, &radii(), 1e-8).unwrap();
        assert!((l.gradient[2] - s).abs() < 1e-14);
        assert!(l.gradient[0].abs() < 1e-14);
        assert!(l.tangential_norm < 1e-14);
        assert!((l.normal_derivative + s).abs() < 1e-14);
    }

    #[test]
    fn fitted_field_on_ramp_has_no_tangential_part() {
        let d = GraphDomain::at_origin(LipschitzGraph::ramp(2, 0.1).unwrap(), 1.0).unwrap();
        let exact = CatalogField::named(2, "bilinear").unwrap().placed([0.0; 3], 0.1);
        let f = mfs_fit(&d, |p| exact.value(p), &MfsParams::default()).unwrap();
        for i in 0..50 {
            let s = -0.5 + i as f64 / 49.0;
            let l = nontangential_gradient(&f, &d, &[s, 0.0, 0.1 * s], 0.5, &radii(), 1e-4).unwrap();
            assert!(l.tangential_norm < 1e-4, "s = {s}: {}", l.tangential_norm);
        }
    }
}
