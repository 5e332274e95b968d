//! Integrals over spheres, balls and boundary pieces clipped by the graph.
//!
//! Spheres are parametrised by angle (`θ` in 2D; polar `θ` from `+e_n` and
//! azimuth `ψ` in 3D). Along each circle or meridian the points where the
//! sphere crosses Σ are bracketed by sampling and refined by bisection, and
//! the integrand is integrated with adaptive Gauss–Kronrod only over arcs on
//! the requested side. The extension by zero is therefore never sampled.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use super::domain::GraphDomain;
use super::graph::LipschitzGraph;
use crate::error::{Error, Result};
use crate::point::{sphere_area, sphere_point, Point, VERTICAL};
use crate::quad::{adaptive_panels, integrate_with_breaks, kronrod_on, sign_changes, gauss_legendre_on, Integral, Tolerance};

/// Which part of a sphere or ball to integrate over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Above,
    Below,
    Whole,
}

const CIRCLE_SAMPLES: usize = 512;
const MERIDIAN_SAMPLES: usize = 160;

fn wanted(graph: &LipschitzGraph, side: Side, p: &Point) -> bool {
    match side {
        Side::Whole => true,
        Side::Above => graph.height(p) > 0.0,
        Side::Below => graph.height(p) < 0.0,
    }
}

/// Sub-intervals of `[a, b]` on which `inside` holds, split at the sign
/// changes of `height`.
fn arcs<H, P>(height: H, inside: P, a: f64, b: f64, samples: usize) -> Vec<(f64, f64)>
where
    H: FnMut(f64) -> f64,
    P: Fn(f64) -> bool,
{
    let mut knots = vec![a];
    knots.extend(sign_changes(height, a, b, samples, 1e-15 * (b - a)));
    knots.push(b);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for w in knots.windows(2) {
        if w[1] > w[0] && inside(0.5 * (w[0] + w[1])) {
            match out.last_mut() {
                Some(last) if last.1 == w[0] => last.1 = w[1],
                _ => out.push((w[0], w[1])),
            }
        }
    }
    out
}

/// Arcs of the circle `∂B(x, r)` (2D) on the requested side, as angle
/// intervals inside `[-π/2, 3π/2]`.
pub fn circle_arcs(graph: &LipschitzGraph, x: &Point, r: f64, side: Side) -> Vec<(f64, f64)> {
    let (a, b) = (-FRAC_PI_2, 1.5 * PI);
    if side == Side::Whole {
        return vec![(a, b)];
    }
    let at = |t: f64| sphere_point(2, x, r, t, 0.0);
    arcs(|t| graph.height(&at(t)), |t| wanted(graph, side, &at(t)), a, b, CIRCLE_SAMPLES)
}

/// Polar-angle intervals of the meridian at azimuth `psi` (3D).
pub fn meridian_arcs(graph: &LipschitzGraph, x: &Point, r: f64, psi: f64, side: Side) -> Vec<(f64, f64)> {
    if side == Side::Whole {
        return vec![(0.0, PI)];
    }
    // Meridians entirely on one side are common; skip the root search when
    // the vertical extent of the meridian clears the graph's range.
    let s_lo = x[0] - r * psi.cos().abs();
    let s_hi = x[0] + r * psi.cos().abs();
    let (g_lo, g_hi) = graph_range(graph, s_lo, s_hi);
    if x[VERTICAL] - r > g_hi {
        return if side == Side::Above { vec![(0.0, PI)] } else { Vec::new() };
    }
    if x[VERTICAL] + r < g_lo {
        return if side == Side::Below { vec![(0.0, PI)] } else { Vec::new() };
    }
    let at = |t: f64| sphere_point(3, x, r, t, psi);
    arcs(|t| graph.height(&at(t)), |t| wanted(graph, side, &at(t)), 0.0, PI, MERIDIAN_SAMPLES)
}

/// Bounds on `φ` over `[a, b]` from the Lipschitz constant.
fn graph_range(graph: &LipschitzGraph, a: f64, b: f64) -> (f64, f64) {
    if graph.is_flat() {
        return (0.0, 0.0);
    }
    let m = graph.phi(0.5 * (a + b));
    let w = 0.5 * (b - a) * graph.tau0;
    (m - w, m + w)
}

/// `∫_{∂B(x,r) ∩ side} f dσ`.
pub fn sphere_integral<const M: usize, F>(
    graph: &LipschitzGraph,
    x: &Point,
    r: f64,
    side: Side,
    tol: Tolerance,
    f: F,
) -> Integral<M>
where
    F: Fn(&Point) -> [f64; M],
{
    let mut total = Integral::zero();
    if graph.dim == 2 {
        for (a, b) in circle_arcs(graph, x, r, side) {
            let piece = integrate_with_breaks(
                |t| {
                    let mut v = f(&sphere_point(2, x, r, t, 0.0));
                    v.iter_mut().for_each(|c| *c *= r);
                    v
                },
                a,
                b,
                &[],
                tol,
            );
            total.accumulate(&piece);
        }
        return total;
    }
    let inner_tol = tol.inner();
    let mut inner_ok = true;
    let mut outer = integrate_with_breaks(
        |psi| {
            let mut acc = [0.0; M];
            for (a, b) in meridian_arcs(graph, x, r, psi, side) {
                let piece = integrate_with_breaks(
                    |t| {
                        let mut v = f(&sphere_point(3, x, r, t, psi));
                        let w = r * r * t.sin();
                        v.iter_mut().for_each(|c| *c *= w);
                        v
                    },
                    a,
                    b,
                    &[],
                    inner_tol,
                );
                inner_ok &= piece.converged;
                for i in 0..M {
                    acc[i] += piece.value[i];
                }
            }
            acc
        },
        0.0,
        2.0 * PI,
        &[FRAC_PI_2, PI, 1.5 * PI],
        tol,
    );
    outer.converged &= inner_ok;
    outer
}

/// `∫_{B(x,r) ∩ side} f dm`, integrating spheres in the radius.
pub fn ball_integral<const M: usize, F>(
    graph: &LipschitzGraph,
    x: &Point,
    r: f64,
    side: Side,
    tol: Tolerance,
    f: F,
) -> Integral<M>
where
    F: Fn(&Point) -> [f64; M],
{
    let mut breaks = Vec::new();
    if side != Side::Whole {
        let d = graph.distance(x);
        if d > 0.0 && d < r {
            breaks.push(d);
        }
    }
    let inner_tol = tol.inner();
    let mut inner_ok = true;
    let mut out = integrate_with_breaks(
        |rho| {
            if rho <= 0.0 {
                return [0.0; M];
            }
            let s = sphere_integral(graph, x, rho, side, inner_tol, &f);
            inner_ok &= s.converged;
            s.value
        },
        0.0,
        r,
        &breaks,
        tol,
    );
    out.converged &= inner_ok;
    out
}

/// `∫_{Σ ∩ B(x,r)} f(y, ν(y)) dσ(y)`. Extra break points in `s1` may be
/// supplied for integrands with jumps (masks).
pub fn boundary_integral<const M: usize, F>(
    domain: &GraphDomain,
    x: &Point,
    r: f64,
    extra_breaks: &[f64],
    tol: Tolerance,
    f: F,
) -> Integral<M>
where
    F: Fn(&Point, &Point) -> [f64; M],
{
    let graph = &domain.graph;
    let mut total = Integral::zero();
    for (a, b) in domain.boundary_intervals(x, r) {
        let mut breaks = graph.creases_in(a, b);
        breaks.extend(extra_breaks.iter().copied().filter(|&s| s > a && s < b));
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let piece = if graph.dim == 2 {
            integrate_with_breaks(
                |s| {
                    let (nu, density) = domain.normal_unchecked(s);
                    let mut v = f(&domain.lift(s, 0.0), &nu);
                    v.iter_mut().for_each(|c| *c *= density);
                    v
                },
                a,
                b,
                &breaks,
                tol,
            )
        } else {
            let inner_tol = tol.inner();
            let mut inner_ok = true;
            let mut out = integrate_with_breaks(
                |s| {
                    let dz = graph.phi(s) - x[VERTICAL];
                    let ds = s - x[0];
                    let w = (r * r - ds * ds - dz * dz).max(0.0).sqrt();
                    if w == 0.0 {
                        return [0.0; M];
                    }
                    let (nu, density) = domain.normal_unchecked(s);
                    let inner = integrate_with_breaks(
                        |t| {
                            let mut v = f(&domain.lift(s, t), &nu);
                            v.iter_mut().for_each(|c| *c *= density);
                            v
                        },
                        x[1] - w,
                        x[1] + w,
                        &[],
                        inner_tol,
                    );
                    inner_ok &= inner.converged;
                    inner.value
                },
                a,
                b,
                &breaks,
                tol,
            );
            out.converged &= inner_ok;
            out
        };
        total.accumulate(&piece);
    }
    total
}

/// A weighted node set on a sphere cap.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CapQuadrature {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
}

impl CapQuadrature {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate<F: Fn(&Point) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

const PANEL_ANGLE: f64 = PI / 16.0;
const PANEL_NODES: usize = 16;

fn panel_rule(a: f64, b: f64) -> Vec<(f64, f64)> {
    let n = ((b - a) / PANEL_ANGLE).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(n * PANEL_NODES);
    for k in 0..n {
        let lo = a + (b - a) * k as f64 / n as f64;
        let hi = a + (b - a) * (k + 1) as f64 / n as f64;
        let (t, w) = gauss_legendre_on(PANEL_NODES, lo, hi);
        out.extend(t.into_iter().zip(w));
    }
    out
}

/// Node set for `∂B(x,r) ∩ Ω`.
///
/// Composite Gauss–Legendre panels over the arcs between crossing angles; in
/// 3D the azimuth is split adaptively (Gauss–Kronrod panels) until the cap
/// area converges to `tol` relative to the full sphere.
pub fn sphere_cap_quadrature(domain: &GraphDomain, x: &Point, r: f64, tol: f64) -> Result<CapQuadrature> {
    domain.check_ball(x, r)?;
    let graph = &domain.graph;
    let mut q = CapQuadrature::default();
    let mut push = |p: Point, w: f64| {
        if graph.height(&p) > 0.0 {
            q.nodes.push(p);
            q.weights.push(w);
        }
    };
    if graph.dim == 2 {
        for (a, b) in circle_arcs(graph, x, r, Side::Above) {
            for (t, w) in panel_rule(a, b) {
                push(sphere_point(2, x, r, t, 0.0), w * r);
            }
        }
        return Ok(q);
    }
    let full = sphere_area(3, r);
    let area_of = |psi: f64| -> f64 {
        meridian_arcs(graph, x, r, psi, Side::Above)
            .iter()
            .map(|(a, b)| r * r * (a.cos() - b.cos()))
            .sum()
    };
    let limit = 4096;
    let ptol = Tolerance { rel: 0.0, abs: tol * full, max_intervals: limit };
    let breaks: Vec<f64> = (1..16).map(|k| k as f64 * PI / 8.0).collect();
    let (area, panels) = adaptive_panels(|psi| [area_of(psi)], 0.0, 2.0 * PI, &breaks, ptol);
    if !area.converged {
        return Err(Error::MaxRefinementExceeded { limit, error: area.error[0] });
    }
    for (pa, pb) in panels {
        let (psis, pw) = kronrod_on(pa, pb);
        for (psi, wpsi) in psis.iter().zip(pw.iter()) {
            for (a, b) in meridian_arcs(graph, x, r, *psi, Side::Above) {
                for (t, w) in panel_rule(a, b) {
                    push(sphere_point(3, x, r, t, *psi), wpsi * w * r * r * t.sin());
                }
            }
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::{dist, norm, sub};

    fn flat(dim: usize) -> GraphDomain {
        GraphDomain::at_origin(LipschitzGraph::flat(dim).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn half_circle() {
        let q = sphere_cap_quadrature(&flat(2), &[0.0; 3], 1.0, 1e-8).unwrap();
        assert!((q.total_weight() - PI).abs() < 1e-8 * PI);
    }

    #[test]
    fn interior_circle() {
        let q = sphere_cap_quadrature(&flat(2), &[0.0, 0.0, 1.0], 0.5, 1e-8).unwrap();
        assert!((q.total_weight() - PI).abs() < 1e-8 * PI);
    }

    #[test]
    fn ramp_cap_matches_crossings() {
        let d = GraphDomain::at_origin(LipschitzGraph::ramp(2, 0.1).unwrap(), 1.0).unwrap();
        let q = sphere_cap_quadrature(&d, &[0.0; 3], 1.0, 1e-8).unwrap();
        // Line through the centre: the cap is exactly a half circle, from
        // atan(0.1) to π + atan(0.1).
        assert!((q.total_weight() - PI).abs() < 1e-10);
        let arcs = circle_arcs(&d.graph, &[0.0; 3], 1.0, Side::Above);
        assert_eq!(arcs.len(), 1);
        assert!((arcs[0].0 - 0.1f64.atan()).abs() < 1e-12);
        assert!((arcs[0].1 - (PI + 0.1f64.atan())).abs() < 1e-12);
        // Off-centre: chord of the line x_2 = 0.1 x_1 at distance 0.2/√1.01.
        let x = [0.0, 0.0, 0.2];
        let c = 0.2 / 1.01f64.sqrt();
        let q = sphere_cap_quadrature(&d, &x, 1.0, 1e-8).unwrap();
        let expected = 2.0 * PI - 2.0 * c.acos();
        assert!((q.total_weight() - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn nodes_on_sphere_and_above() {
        let d = GraphDomain::at_origin(LipschitzGraph::sawtooth(3, 0.2, 0.5).unwrap(), 1.0).unwrap();
        let x = [0.05, -0.02, 0.03];
        let q = sphere_cap_quadrature(&d, &x, 0.7, 1e-8).unwrap();
        for p in &q.nodes {
            assert!((dist(p, &x) - 0.7).abs() <= 1e-12 * 0.7);
            assert!(d.graph.height(p) > 0.0);
        }
    }

    #[test]
    fn hemisphere_3d() {
        let q = sphere_cap_quadrature(&flat(3), &[0.0; 3], 1.0, 1e-8).unwrap();
        assert!((q.total_weight() - 2.0 * PI).abs() < 1e-8 * 4.0 * PI);
    }

    #[test]
    fn empty_cap_is_empty() {
        let q = sphere_cap_quadrature(&flat(2), &[0.0, 0.0, -1.0], 0.5, 1e-8).unwrap();
        assert!(q.is_empty());
    }

    #[test]
    fn cap_plus_complement_is_sphere() {
        for dim in [2, 3] {
            let g = LipschitzGraph::sawtooth(dim, 0.25, 0.6).unwrap();
            let x = [0.1, 0.0, 0.05];
            let tol = Tolerance::relative(1e-9);
            let up = sphere_integral(&g, &x, 0.8, Side::Above, tol, |_| [1.0]);
            let down = sphere_integral(&g, &x, 0.8, Side::Below, tol, |_| [1.0]);
            let full = sphere_area(dim, 0.8);
            assert!(((up.value[0] + down.value[0]) - full).abs() < 2e-9 * full, "dim {dim}");
        }
    }

    #[test]
    fn half_ball_volume_and_moment() {
        let g = LipschitzGraph::flat(2).unwrap();
        let v = ball_integral(&g, &[0.0; 3], 1.0, Side::Above, Tolerance::relative(1e-10), |p| [1.0, p[2]]);
        assert!((v.value[0] - PI / 2.0).abs() < 1e-10);
        assert!((v.value[1] - 2.0 / 3.0).abs() < 1e-10);
        let g3 = LipschitzGraph::flat(3).unwrap();
        let v = ball_integral(&g3, &[0.0, 0.0, 0.3], 1.0, Side::Above, Tolerance::relative(1e-8), |_| [1.0]);
        // Ball minus the cap below the plane at depth 0.3.
        let h: f64 = 0.7;
        let cap = PI * h * h * (3.0 - h) / 3.0;
        assert!((v.value[0] - (4.0 * PI / 3.0 - cap)).abs() < 1e-8);
    }

    #[test]
    fn boundary_disk_area() {
        let d = flat(3);
        let b = boundary_integral(&d, &[0.0, 0.0, 0.6], 1.0, &[], Tolerance::relative(1e-10), |_, _| [1.0]);
        assert!((b.value[0] - PI * 0.64).abs() < 1e-9);
        let d2 = GraphDomain::at_origin(LipschitzGraph::ramp(2, 0.1).unwrap(), 1.0).unwrap();
        let b = boundary_integral(&d2, &[0.0; 3], 1.0, &[], Tolerance::relative(1e-12), |y, nu| {
            [1.0, norm(&sub(y, &[0.0; 3])) * nu[2]]
        });
        assert!((b.value[0] - 2.0).abs() < 1e-12);
    }
}
