//! Points in R^2 and R^3 share one representation.
//!
//! A point is `[f64; 3]` with the vertical (graph) axis always stored at
//! index 2. In dimension 2 the middle slot is unused and kept at zero, so
//! `(x_1, x_2)` is stored as `[x_1, 0, x_2]`. Euclidean norms and dot products
//! can then be taken over all three slots in either dimension.

use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Index of the vertical coordinate `x_n`.
pub const VERTICAL: usize = 2;

pub fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("dimension {dim} not supported (2 or 3)")))
    }
}

/// Builds an internal point from user coordinates `(x_1, ..., x_n)`.
pub fn embed(dim: usize, coords: &[f64]) -> Result<Point> {
    check_dim(dim)?;
    if coords.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "expected {dim} coordinates, got {}",
            coords.len()
        )));
    }
    Ok(match dim {
        2 => [coords[0], 0.0, coords[1]],
        _ => [coords[0], coords[1], coords[2]],
    })
}

/// Inverse of [`embed`].
pub fn unembed(dim: usize, p: &Point) -> Vec<f64> {
    match dim {
        2 => vec![p[0], p[2]],
        _ => p.to_vec(),
    }
}

/// Unit vector `e_n`.
pub const E_N: Point = [0.0, 0.0, 1.0];

#[inline]
pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn axpy(x: &Point, t: f64, d: &Point) -> Point {
    [x[0] + t * d[0], x[1] + t * d[1], x[2] + t * d[2]]
}

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm2(a: &Point) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

/// Area of the unit sphere `S^{n-1}`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    match dim {
        2 => 2.0 * std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI,
    }
}

/// `σ(∂B_r)` in dimension `dim`.
pub fn sphere_area(dim: usize, r: f64) -> f64 {
    unit_sphere_area(dim) * r.powi(dim as i32 - 1)
}

/// Lebesgue measure of `B_r`.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    unit_sphere_area(dim) * r.powi(dim as i32) / dim as f64
}

/// Point on `∂B(x, r)` with angular coordinates.
///
/// In 2D `theta` is the polar angle in the `(x_1, x_2)` plane measured from
/// `e_1`; `psi` is ignored. In 3D `theta` is measured from `+e_n` and `psi` is
/// the azimuth in the horizontal plane.
#[inline]
pub fn sphere_point(dim: usize, x: &Point, r: f64, theta: f64, psi: f64) -> Point {
    if dim == 2 {
        [x[0] + r * theta.cos(), 0.0, x[2] + r * theta.sin()]
    } else {
        let st = theta.sin();
        [
            x[0] + r * st * psi.cos(),
            x[1] + r * st * psi.sin(),
            x[2] + r * theta.cos(),
        ]
    }
}
