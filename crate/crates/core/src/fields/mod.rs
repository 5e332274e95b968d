//! Harmonic functions on the domain, extended by zero below the graph.

pub mod catalog;
pub mod mfs;
pub mod nontangential;

use serde::Serialize;

use crate::geometry::LipschitzGraph;
use crate::point::{add, scale, Point};

pub use catalog::{CatalogField, Term};
pub use mfs::{mfs_fit, FittedField, MfsParams};
pub use nontangential::{nontangential_gradient, NontangentialLimit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Catalog,
    Fitted,
}

/// A harmonic function near the domain of interest.
///
/// `value` and `gradient` evaluate the harmonic expression itself; the
/// extension by zero is applied by [`extended_value`] or by integrating only
/// over the part of a sphere above the graph.
pub trait HarmonicField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, p: &Point) -> f64;
    fn gradient(&self, p: &Point) -> Point;
    fn provenance(&self) -> Provenance;

    /// Largest value of `|u|` observed on Σ collocation points.
    fn boundary_residual(&self) -> f64 {
        0.0
    }

    /// Radius of a ball about `p` on which the expression is harmonic.
    fn harmonic_radius(&self, _p: &Point) -> f64 {
        f64::INFINITY
    }
}

/// `u(p)` with `u ≡ 0` on and below the graph.
pub fn extended_value(field: &dyn HarmonicField, graph: &LipschitzGraph, p: &Point) -> f64 {
    if graph.is_above(p) {
        field.value(p)
    } else {
        0.0
    }
}

fn axes(dim: usize) -> &'static [usize] {
    if dim == 2 {
        &[0, 2]
    } else {
        &[0, 1, 2]
    }
}

/// Centred second-difference Laplacian with step `h`.
pub fn laplacian_fd(field: &dyn HarmonicField, p: &Point, h: f64) -> f64 {
    let u0 = field.value(p);
    axes(field.dim())
        .iter()
        .map(|&i| {
            let mut e = [0.0; 3];
            e[i] = h;
            (field.value(&add(p, &e)) - 2.0 * u0 + field.value(&add(p, &scale(&e, -1.0)))) / (h * h)
        })
        .sum()
}

/// Centred first differences of `u`.
pub fn gradient_fd(field: &dyn HarmonicField, p: &Point, h: f64) -> Point {
    let mut g = [0.0; 3];
    for &i in axes(field.dim()) {
        let mut e = [0.0; 3];
        e[i] = h;
        g[i] = (field.value(&add(p, &e)) - field.value(&add(p, &scale(&e, -1.0)))) / (2.0 * h);
    }
    g
}
