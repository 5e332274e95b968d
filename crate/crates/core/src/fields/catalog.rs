use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{HarmonicField, Provenance};
use crate::error::{Error, Result};
use crate::point::{check_dim, sub, Point};

/// Closed-form harmonic building blocks, written in local coordinates
/// `(q_1, q_2, q_n)` where the flat boundary is `q_n = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "term", rename_all = "snake_case")]
pub enum Term {
    /// `q_n`
    Linear,
    /// `q_1 q_n` (axis 0) or `q_2 q_n` (axis 1, 3D only).
    Bilinear { axis: usize },
    /// `Im((q_1 + i q_n)^k)`, vanishing on `q_n = 0`.
    OddHarmonic { k: u32 },
    /// `Re((q_1 + i q_n)^k)`; does not vanish on the boundary.
    ReHarmonic { k: u32 },
    Constant,
    /// Poisson kernel of the half space with pole at `(pole, 0, 0)`:
    /// `q_n / |q - pole·e_1|^n`.
    Poisson { pole: f64 },
}

impl Term {
    fn vanishes_on_boundary(&self) -> bool {
        !matches!(self, Term::ReHarmonic { .. } | Term::Constant)
    }

    /// Degree of homogeneity at the local origin, if the term is homogeneous.
    pub fn degree(&self) -> Option<u32> {
        match self {
            Term::Linear => Some(1),
            Term::Bilinear { .. } => Some(2),
            Term::OddHarmonic { k } | Term::ReHarmonic { k } => Some(*k),
            Term::Constant => Some(0),
            Term::Poisson { .. } => None,
        }
    }

    fn eval(&self, dim: usize, q: &Point) -> (f64, Point) {
        match *self {
            Term::Linear => (q[2], [0.0, 0.0, 1.0]),
            Term::Bilinear { axis } => (q[axis] * q[2], {
                let mut g = [0.0; 3];
                g[axis] = q[2];
                g[2] = q[axis];
                g
            }),
            Term::OddHarmonic { k } | Term::ReHarmonic { k } => {
                let z = Complex64::new(q[0], q[2]);
                let f = z.powu(k);
                let df = if k == 0 { Complex64::new(0.0, 0.0) } else { z.powu(k - 1) * k as f64 };
                if matches!(self, Term::OddHarmonic { .. }) {
                    (f.im, [df.im, 0.0, df.re])
                } else {
                    (f.re, [df.re, 0.0, -df.im])
                }
            }
            Term::Constant => (1.0, [0.0; 3]),
            Term::Poisson { pole } => {
                let d = [q[0] - pole, if dim == 3 { q[1] } else { 0.0 }, q[2]];
                let rho2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                let p = dim as f64;
                let rho_n = rho2.powf(0.5 * p);
                let u = q[2] / rho_n;
                let mut g = [0.0; 3];
                for i in 0..3 {
                    g[i] = -p * q[2] * d[i] / (rho_n * rho2);
                }
                g[2] += 1.0 / rho_n;
                (u, g)
            }
        }
    }
}

/// A finite combination of catalog terms, optionally translated and tilted
/// so that its zero set is a given straight line through `origin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogField {
    pub dim: usize,
    pub terms: Vec<(f64, Term)>,
    pub origin: Point,
    /// Slope of the tilted boundary `x_n - o_n = slope·(x_1 - o_1)`.
    pub slope: f64,
}

impl CatalogField {
    pub fn mix(dim: usize, terms: Vec<(f64, Term)>) -> Result<Self> {
        check_dim(dim)?;
        for (_, t) in &terms {
            if let Term::Bilinear { axis } = t {
                if *axis > 1 || (*axis == 1 && dim == 2) {
                    return Err(Error::InvalidArgument(format!("bilinear axis {axis} invalid in dimension {dim}")));
                }
            }
        }
        Ok(CatalogField { dim, terms, origin: [0.0; 3], slope: 0.0 })
    }

    pub fn single(dim: usize, term: Term) -> Result<Self> {
        Self::mix(dim, vec![(1.0, term)])
    }

    /// Looks up a field by name: `linear`, `bilinear`, `bilinear-2`,
    /// `odd-harmonic-<k>`, `re-harmonic-<k>`, `constant`, `zero`,
    /// `poisson` (pole at `x_1 = 3`).
    pub fn named(dim: usize, name: &str) -> Result<Self> {
        let term = match name {
            "linear" => Term::Linear,
            "bilinear" => Term::Bilinear { axis: 0 },
            "bilinear-2" if dim == 3 => Term::Bilinear { axis: 1 },
            "constant" => Term::Constant,
            "zero" => return Self::mix(dim, Vec::new()),
            "poisson" => Term::Poisson { pole: 3.0 },
            _ => {
                let parse = |prefix: &str| name.strip_prefix(prefix).and_then(|k| k.parse::<u32>().ok());
                if let Some(k) = parse("odd-harmonic-") {
                    Term::OddHarmonic { k }
                } else if let Some(k) = parse("re-harmonic-") {
                    Term::ReHarmonic { k }
                } else {
                    return Err(Error::UnknownName(name.to_string()));
                }
            }
        };
        Self::single(dim, term)
    }

    /// Moves the local frame to `origin` and tilts it to the line of slope
    /// `slope`; the field then vanishes on that line (for vanishing terms).
    pub fn placed(mut self, origin: Point, slope: f64) -> Self {
        self.origin = origin;
        self.slope = slope;
        self
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.terms.iter_mut().for_each(|(c, _)| *c *= factor);
        self
    }

    pub fn vanishes_on_boundary(&self) -> bool {
        self.terms.iter().all(|(_, t)| t.vanishes_on_boundary())
    }

    /// Common homogeneity degree when every term has the same one.
    pub fn degree(&self) -> Option<u32> {
        let mut it = self.terms.iter().filter(|(c, _)| *c != 0.0).map(|(_, t)| t.degree());
        let first = it.next()??;
        it.all(|d| d == Some(first)).then_some(first)
    }

    fn rotation(&self) -> (f64, f64) {
        let k = (1.0 + self.slope * self.slope).sqrt();
        (1.0 / k, self.slope / k)
    }

    fn local(&self, p: &Point) -> Point {
        let d = sub(p, &self.origin);
        let (c, s) = self.rotation();
        [c * d[0] + s * d[2], d[1], -s * d[0] + c * d[2]]
    }

    fn eval(&self, p: &Point) -> (f64, Point) {
        let q = self.local(p);
        let mut u = 0.0;
        let mut gq = [0.0; 3];
        for (coef, t) in &self.terms {
            let (v, g) = t.eval(self.dim, &q);
            u += coef * v;
            for i in 0..3 {
                gq[i] += coef * g[i];
            }
        }
        let (c, s) = self.rotation();
        let g = [c * gq[0] - s * gq[2], if self.dim == 3 { gq[1] } else { 0.0 }, s * gq[0] + c * gq[2]];
        (u, g)
    }
}

impl HarmonicField for CatalogField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, p: &Point) -> f64 {
        self.eval(p).0
    }

    fn gradient(&self, p: &Point) -> Point {
        self.eval(p).1
    }

    fn provenance(&self) -> Provenance {
        Provenance::Catalog
    }

    fn harmonic_radius(&self, p: &Point) -> f64 {
        let q = self.local(p);
        self.terms
            .iter()
            .filter_map(|(c, t)| match t {
                Term::Poisson { pole } if *c != 0.0 => Some(((q[0] - pole).powi(2) + q[1] * q[1] + q[2] * q[2]).sqrt()),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{gradient_fd, laplacian_fd};

    #[test]
    fn linear_and_bilinear() {
        let u = CatalogField::named(2, "linear").unwrap();
        assert_eq!(u.value(&[0.3, 0.0, 0.7]), 0.7);
        assert_eq!(u.gradient(&[0.3, 0.0, 0.7]), [0.0, 0.0, 1.0]);
        let b = CatalogField::named(3, "bilinear").unwrap();
        assert_eq!(b.value(&[2.0, 5.0, 3.0]), 6.0);
        assert_eq!(b.gradient(&[2.0, 5.0, 3.0]), [3.0, 0.0, 2.0]);
        assert!(laplacian_fd(&b, &[0.2, 0.1, 0.4], 1e-3).abs() < 1e-9);
    }

    #[test]
    fn odd_harmonic_vanishes_on_line() {
        let u = CatalogField::named(2, "odd-harmonic-5").unwrap();
        for i in 0..1000 {
            let s = -2.0 + 4.0 * i as f64 / 999.0;
            assert!(u.value(&[s, 0.0, 0.0]).abs() <= 1e-14);
        }
    }

    #[test]
    fn unknown_name() {
        assert_eq!(CatalogField::named(2, "cubic").unwrap_err(), Error::UnknownName("cubic".into()));
    }

    #[test]
    fn gradients_match_differences() {
        let names = ["linear", "bilinear", "odd-harmonic-3", "re-harmonic-4", "poisson", "odd-harmonic-8"];
        for dim in [2, 3] {
            for name in names {
                let u = CatalogField::named(dim, name).unwrap().placed([0.1, 0.0, 0.01], 0.1);
                let p = [0.23, if dim == 3 { -0.3 } else { 0.0 }, 0.41];
                let g = u.gradient(&p);
                let fd = gradient_fd(&u, &p, 1e-5);
                for i in 0..3 {
                    assert!((g[i] - fd[i]).abs() <= 1e-6 * (1.0 + g[i].abs()), "{name} {dim} {i}");
                }
                let lap = laplacian_fd(&u, &p, 1e-3);
                assert!(lap.abs() < 1e-5 * (1.0 + u.value(&p).abs()), "{name} {dim} lap {lap}");
            }
        }
    }

    #[test]
    fn tilted_field_vanishes_on_ramp() {
        let u = CatalogField::named(2, "odd-harmonic-3").unwrap().placed([0.0; 3], 0.1);
        for s in [-1.0, -0.3, 0.4, 1.0] {
            assert!(u.value(&[s, 0.0, 0.1 * s]).abs() < 1e-15);
        }
    }

    #[test]
    fn degree_of_mixtures() {
        let m = CatalogField::mix(2, vec![(1.0, Term::Linear), (0.1, Term::OddHarmonic { k: 3 })]).unwrap();
        assert_eq!(m.degree(), None);
        let h = CatalogField::mix(2, vec![(1.0, Term::Bilinear { axis: 0 }), (0.3, Term::OddHarmonic { k: 2 })]).unwrap();
        assert_eq!(h.degree(), Some(2));
    }
}
