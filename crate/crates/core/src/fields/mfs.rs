//! Method-of-fundamental-solutions fits: `u = c_0 + Σ c_j E(x - y_j)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{HarmonicField, Provenance};
use crate::error::{Error, Result};
use crate::geometry::GraphDomain;
use crate::point::{dist, sub, Point, VERTICAL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfsParams {
    pub n_sources: usize,
    /// Source depth below Σ, in units of the ball radius.
    pub depth: f64,
    pub n_collocation: usize,
    /// Ridge ladder, relative to the squared largest singular value.
    pub ridge: Vec<f64>,
    /// Gate on held-out boundary residual, relative to `max |target|`.
    pub residual_tol: f64,
    /// Radius of the upper ring of sources, in units of the ball radius.
    pub ring_radius: f64,
}

impl Default for MfsParams {
    fn default() -> Self {
        MfsParams {
            n_sources: 160,
            depth: 0.25,
            n_collocation: 480,
            ridge: vec![0.0, 1e-12, 1e-10, 1e-8, 1e-6],
            residual_tol: 1e-6,
            ring_radius: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedField {
    pub dim: usize,
    pub sources: Vec<Point>,
    pub coefficients: Vec<f64>,
    pub constant: f64,
    /// Max `|u|` on held-out Σ collocation points.
    pub boundary_residual: f64,
    /// RMS misfit on held-out control points.
    pub control_rms: f64,
    pub ridge: f64,
    pub condition: f64,
    /// Radius about the ball centre free of sources.
    pub harmonic_radius: f64,
    pub center: Point,
}

#[inline]
pub(crate) fn kernel(dim: usize, d: &Point) -> f64 {
    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    if dim == 2 {
        r2.ln() / (4.0 * PI)
    } else {
        -1.0 / (4.0 * PI * r2.sqrt())
    }
}

#[inline]
pub(crate) fn kernel_gradient(dim: usize, d: &Point) -> Point {
    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let k = if dim == 2 { 1.0 / (2.0 * PI * r2) } else { 1.0 / (4.0 * PI * r2 * r2.sqrt()) };
    [k * d[0], k * d[1], k * d[2]]
}

impl HarmonicField for FittedField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, p: &Point) -> f64 {
        self.constant
            + self.sources.iter().zip(&self.coefficients).map(|(y, c)| c * kernel(self.dim, &sub(p, y))).sum::<f64>()
    }

    fn gradient(&self, p: &Point) -> Point {
        let mut g = [0.0; 3];
        for (y, c) in self.sources.iter().zip(&self.coefficients) {
            let k = kernel_gradient(self.dim, &sub(p, y));
            for i in 0..3 {
                g[i] += c * k[i];
            }
        }
        g
    }

    fn provenance(&self) -> Provenance {
        Provenance::Fitted
    }

    fn boundary_residual(&self) -> f64 {
        self.boundary_residual
    }

    fn harmonic_radius(&self, p: &Point) -> f64 {
        self.sources.iter().map(|y| dist(p, y)).fold(f64::INFINITY, f64::min)
    }
}

/// Points of Σ over `[-w, w]` (and `[-w, w]²` in 3D) around the centre.
fn sigma_points(domain: &GraphDomain, w: f64, count: usize, depth: f64) -> Vec<Point> {
    let c = domain.center;
    let mut out = Vec::new();
    if domain.dim() == 2 {
        for i in 0..count {
            let s = c[0] - w + 2.0 * w * (i as f64 + 0.5) / count as f64;
            let mut p = domain.lift(s, 0.0);
            p[VERTICAL] -= depth;
            out.push(p);
        }
    } else {
        let m = (count as f64).sqrt().ceil() as usize;
        for i in 0..m {
            for j in 0..m {
                let s1 = c[0] - w + 2.0 * w * (i as f64 + 0.5) / m as f64;
                let s2 = c[1] - w + 2.0 * w * (j as f64 + 0.5) / m as f64;
                let mut p = domain.lift(s1, s2);
                p[VERTICAL] -= depth;
                out.push(p);
            }
        }
    }
    out
}

/// Roughly uniform points on `∂B(c, rho)` (Fibonacci lattice in 3D).
fn sphere_points(dim: usize, c: &Point, rho: f64, count: usize) -> Vec<Point> {
    (0..count)
        .map(|i| {
            if dim == 2 {
                let t = 2.0 * PI * (i as f64 + 0.5) / count as f64;
                [c[0] + rho * t.cos(), 0.0, c[2] + rho * t.sin()]
            } else {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                let phi = PI * (3.0 - 5f64.sqrt()) * i as f64;
                let s = (1.0 - z * z).sqrt();
                [c[0] + rho * s * phi.cos(), c[1] + rho * s * phi.sin(), c[2] + rho * z]
            }
        })
        .collect()
}

/// Least-squares fit of a field vanishing on Σ and matching `target` on the
/// control surface `{y ∈ ∂B(x0, r) : height(y) ≥ r/4}`.
///
/// Sources sit on a copy of Σ lowered by `depth·r` and on a ring of radius
/// `ring_radius·r` above Σ; the field is harmonic in `Ω ∩ B(x0, ring_radius·r)`.
pub fn mfs_fit<T: Fn(&Point) -> f64>(domain: &GraphDomain, target: T, params: &MfsParams) -> Result<FittedField> {
    let dim = domain.dim();
    let r = domain.radius;
    let c = domain.center;
    if !(params.depth > 0.0) || params.n_sources < 4 || params.n_collocation < 10 {
        return Err(Error::InvalidArgument("MFS needs depth > 0 and enough sources/collocation".into()));
    }
    if !(params.ring_radius > 1.5) {
        return Err(Error::InvalidArgument("source ring must lie beyond 1.5 radii".into()));
    }
    let n_graph = params.n_sources * 2 / 3;
    let mut sources = sigma_points(domain, 2.0 * r, n_graph, params.depth * r);
    let ring = sphere_points(dim, &c, params.ring_radius * r, 2 * (params.n_sources - n_graph));
    sources.extend(ring.into_iter().filter(|p| domain.graph.height(p) > params.depth * r));

    let sigma = sigma_points(domain, 1.5 * r, params.n_collocation / 2, 0.0);
    let control: Vec<Point> = sphere_points(dim, &c, r, 2 * params.n_collocation)
        .into_iter()
        .filter(|p| domain.graph.height(p) >= 0.25 * r)
        .take(params.n_collocation)
        .collect();
    if control.is_empty() {
        return Err(Error::InvalidArgument("empty control surface".into()));
    }
    let target_vals: Vec<f64> = control.iter().map(&target).collect();
    let scale = target_vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    // Every fifth point is held out.
    let held = |i: usize| i % 5 == 4;
    let rows: Vec<(Point, f64)> = sigma
        .iter()
        .enumerate()
        .filter(|(i, _)| !held(*i))
        .map(|(_, p)| (*p, 0.0))
        .chain(control.iter().zip(&target_vals).enumerate().filter(|(i, _)| !held(*i)).map(|(_, (p, v))| (*p, *v)))
        .collect();
    let ncol = sources.len() + 1;
    let mut a = DMatrix::<f64>::zeros(rows.len(), ncol);
    let mut b = DVector::<f64>::zeros(rows.len());
    for (i, (p, v)) in rows.iter().enumerate() {
        a[(i, 0)] = 1.0;
        for (j, y) in sources.iter().enumerate() {
            a[(i, j + 1)] = kernel(dim, &sub(p, y));
        }
        b[i] = *v;
    }
    let col_scale: Vec<f64> = (0..ncol).map(|j| a.column(j).norm().max(1e-300)).collect();
    for j in 0..ncol {
        let s = col_scale[j];
        a.column_mut(j).iter_mut().for_each(|v| *v /= s);
    }
    let svd = a.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::IllConditioned),
    };
    let sv = svd.singular_values;
    let smax = sv.iter().fold(0.0f64, |m, v| m.max(*v));
    if !(smax.is_finite()) || smax == 0.0 {
        return Err(Error::IllConditioned);
    }
    let smin = sv.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let utb = u.transpose() * &b;

    let mut best: Option<FittedField> = None;
    for &lambda in &params.ridge {
        let l = lambda * smax * smax;
        let mut coef = DVector::<f64>::zeros(ncol);
        for k in 0..sv.len() {
            let s = sv[k];
            let f = if lambda == 0.0 {
                if s > 1e-15 * smax {
                    1.0 / s
                } else {
                    0.0
                }
            } else {
                s / (s * s + l)
            };
            coef += vt.row(k).transpose() * (f * utb[k]);
        }
        if coef.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let coefficients: Vec<f64> = (0..sources.len()).map(|j| coef[j + 1] / col_scale[j + 1]).collect();
        let mut field = FittedField {
            dim,
            sources: sources.clone(),
            coefficients,
            constant: coef[0] / col_scale[0],
            boundary_residual: 0.0,
            control_rms: 0.0,
            ridge: lambda,
            condition: smax / smin,
            harmonic_radius: sources.iter().map(|y| dist(y, &c)).fold(f64::INFINITY, f64::min),
            center: c,
        };
        field.boundary_residual = sigma
            .iter()
            .enumerate()
            .filter(|(i, _)| held(*i))
            .map(|(_, p)| field.value(p).abs())
            .fold(0.0, f64::max);
        let misfit: Vec<f64> = control
            .iter()
            .zip(&target_vals)
            .enumerate()
            .filter(|(i, _)| held(*i))
            .map(|(_, (p, v))| (field.value(p) - v).powi(2))
            .collect();
        field.control_rms = (misfit.iter().sum::<f64>() / misfit.len().max(1) as f64).sqrt();
        let score = field.boundary_residual.max(field.control_rms);
        let accepted = score <= params.residual_tol * scale.max(1e-300) || scale == 0.0;
        let better = best.as_ref().map_or(true, |b| score < b.boundary_residual.max(b.control_rms));
        if accepted {
            return Ok(field);
        }
        if better {
            best = Some(field);
        }
    }
    match best {
        None => Err(Error::IllConditioned),
        Some(f) => Err(Error::FitDiverged {
            residual: f.boundary_residual.max(f.control_rms),
            tolerance: params.residual_tol * scale,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::CatalogField;
    use crate::geometry::LipschitzGraph;

    fn probe_grid(domain: &GraphDomain) -> Vec<Point> {
        let r = domain.radius;
        let mut out = Vec::new();
        for i in 0..11 {
            for j in 1..11 {
                let s = -0.5 * r + r * i as f64 / 10.0;
                let h = 0.5 * r * j as f64 / 10.0;
                out.push([s, 0.0, domain.graph.phi(s) + h]);
            }
        }
        out
    }

    #[test]
    fn reproduces_linear_on_flat() {
        let d = GraphDomain::at_origin(LipschitzGraph::flat(2).unwrap(), 1.0).unwrap();
        let f = mfs_fit(&d, |p| p[2], &MfsParams::default()).unwrap();
        let worst = probe_grid(&d).iter().map(|p| (f.value(p) - p[2]).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-8, "worst {worst:e}");
    }

    #[test]
    fn ramp_conformal_oracle() {
        let d = GraphDomain::at_origin(LipschitzGraph::ramp(2, 0.1).unwrap(), 1.0).unwrap();
        let exact = CatalogField::named(2, "odd-harmonic-2").unwrap().placed([0.0; 3], 0.1);
        let f = mfs_fit(&d, |p| exact.value(p), &MfsParams::default()).unwrap();
        assert!(f.boundary_residual < 1e-6);
        let worst = probe_grid(&d).iter().map(|p| (f.value(p) - exact.value(p)).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "worst {worst:e}");
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let d = GraphDomain::at_origin(LipschitzGraph::sawtooth(2, 0.1, 0.5).unwrap(), 1.0).unwrap();
        let f = mfs_fit(&d, |_| 0.0, &MfsParams::default()).unwrap();
        assert!(f.coefficients.iter().all(|c| c.abs() < 1e-10));
        assert!(probe_grid(&d).iter().all(|p| f.value(p).abs() < 1e-10));
    }
}
