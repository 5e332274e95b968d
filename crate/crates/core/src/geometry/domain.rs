use serde::Serialize;

use super::graph::LipschitzGraph;
use crate::error::{Error, Result};
use crate::point::{dot, norm, sub, Point, VERTICAL};

/// The region above a Lipschitz graph, observed through a ball `B(x0, r)`
/// centred on the graph and a cubical bounding box.
#[derive(Debug, Clone)]
pub struct GraphDomain {
    pub graph: LipschitzGraph,
    pub center: Point,
    pub radius: f64,
    /// Half side of the bounding box around `center`.
    pub extent: f64,
}

/// A point of Σ with its outer normal, tangent frame and area density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub position: Point,
    pub normal: Point,
    pub tangents: Vec<Point>,
    pub density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConeOrientation {
    /// `X_a^+`, pointing into the domain.
    Inner,
    /// `X_a^-`, pointing out of it.
    Outer,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeSpec {
    pub aperture: f64,
    pub orientation: ConeOrientation,
    pub apex: Point,
    pub normal: Point,
}

impl ConeSpec {
    pub fn new(domain: &GraphDomain, apex: &Point, aperture: f64, orientation: ConeOrientation) -> Result<Self> {
        if !(aperture > 0.0 && aperture < 1.0) {
            return Err(Error::InvalidArgument(format!("cone aperture {aperture} outside (0,1)")));
        }
        let bp = domain.normal_at(apex)?;
        Ok(ConeSpec { aperture, orientation, apex: bp.position, normal: bp.normal })
    }

    pub fn contains(&self, y: &Point) -> bool {
        let d = sub(&self.apex, y);
        let along = match self.orientation {
            ConeOrientation::Inner => dot(&d, &self.normal),
            ConeOrientation::Outer => -dot(&d, &self.normal),
        };
        along > self.aperture * norm(&d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeCheck {
    pub holds: bool,
    pub worst_margin: f64,
    pub samples: usize,
}

impl GraphDomain {
    /// Domain observed through `B(center, radius)`; the centre must lie on
    /// the graph. The bounding box defaults to four radii.
    pub fn new(graph: LipschitzGraph, center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument("ball radius must be positive".into()));
        }
        let gap = (center[VERTICAL] - graph.phi(center[0])).abs();
        if gap > 1e-12 * (1.0 + radius) {
            return Err(Error::InvalidArgument(format!("ball centre is {gap:e} off the graph")));
        }
        if graph.dim == 2 && center[1] != 0.0 {
            return Err(Error::InvalidArgument("planar point with non-zero middle slot".into()));
        }
        Ok(GraphDomain { graph, center, radius, extent: 4.0 * radius })
    }

    /// Domain centred at the origin (every catalog graph passes through it).
    pub fn at_origin(graph: LipschitzGraph, radius: f64) -> Result<Self> {
        Self::new(graph, [0.0; 3], radius)
    }

    pub fn with_extent(mut self, extent: f64) -> Self {
        self.extent = extent;
        self
    }

    pub fn dim(&self) -> usize {
        self.graph.dim
    }

    pub fn in_box(&self, p: &Point) -> bool {
        (0..3).all(|i| (p[i] - self.center[i]).abs() <= self.extent)
    }

    /// Rejects balls that leave the bounding box.
    pub fn check_ball(&self, x: &Point, r: f64) -> Result<()> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidArgument(format!("radius {r} must be positive")));
        }
        let reach = (0..3)
            .filter(|&i| self.dim() == 3 || i != 1)
            .map(|i| (x[i] - self.center[i]).abs() + r)
            .fold(0.0, f64::max);
        if reach > self.extent * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "ball of radius {r} leaves the bounding box (half side {})",
                self.extent
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, p: &Point) -> bool {
        self.graph.is_above(p)
    }

    #[inline]
    pub fn distance_to_boundary(&self, p: &Point) -> f64 {
        self.graph.distance(p)
    }

    /// The point of Σ above horizontal coordinates `(s1, s2)`.
    #[inline]
    pub fn lift(&self, s1: f64, s2: f64) -> Point {
        let s2 = if self.dim() == 3 { s2 } else { 0.0 };
        [s1, s2, self.graph.phi(s1)]
    }

    /// Outer unit normal `(φ', 0, -1)/√(1+φ'²)` at horizontal coordinate `s`,
    /// without the crease test.
    #[inline]
    pub fn normal_unchecked(&self, s: f64) -> (Point, f64) {
        let g = self.graph.dphi(s);
        let density = (1.0 + g * g).sqrt();
        ([g / density, 0.0, -1.0 / density], density)
    }

    pub fn normal_at(&self, p: &Point) -> Result<BoundaryPoint> {
        let s = p[0];
        if (s - self.center[0]).abs() > self.extent {
            return Err(Error::InvalidArgument("point outside the bounding box".into()));
        }
        let band = self.graph.crease_band();
        if self.graph.near_crease(s) {
            return Err(Error::NonSmoothPoint { s, band });
        }
        let position = self.lift(s, p[1]);
        let (normal, density) = self.normal_unchecked(s);
        let g = self.graph.dphi(s);
        let mut tangents = vec![[1.0 / density, 0.0, g / density]];
        if self.dim() == 3 {
            tangents.push([0.0, 1.0, 0.0]);
        }
        Ok(BoundaryPoint { position, normal, tangents, density })
    }

    /// Horizontal intervals `[s_lo, s_hi]` of `s1` where the lifted graph
    /// point lies in `B(x, r)` (for `s2 = x_2`).
    pub fn boundary_intervals(&self, x: &Point, r: f64) -> Vec<(f64, f64)> {
        let q = |s: f64| {
            let dz = self.graph.phi(s) - x[VERTICAL];
            let ds = s - x[0];
            r * r - ds * ds - dz * dz
        };
        let (a, b) = (x[0] - r, x[0] + r);
        let mut knots = vec![a];
        knots.extend(crate::quad::sign_changes(q, a, b, 512, 1e-15 * r.max(1e-300)));
        knots.push(b);
        let mut out: Vec<(f64, f64)> = Vec::new();
        for w in knots.windows(2) {
            if w[1] > w[0] && q(0.5 * (w[0] + w[1])) > 0.0 {
                match out.last_mut() {
                    Some(last) if last.1 == w[0] => last.1 = w[1],
                    _ => out.push((w[0], w[1])),
                }
            }
        }
        out
    }

    /// Samples `(y - x)·ν(y)` at quasi-random points of `B(x, r_max) ∩ Σ`
    /// together with the ends of every straight piece. With no boundary in
    /// the ball the margin is `dist(x, Σ)`.
    pub fn cone_condition_check(&self, x: &Point, r_max: f64, samples: usize) -> ConeCheck {
        let intervals = self.boundary_intervals(x, r_max);
        let total: f64 = intervals.iter().map(|(a, b)| b - a).sum();
        if intervals.is_empty() || total <= 0.0 {
            return ConeCheck { holds: true, worst_margin: self.distance_to_boundary(x), samples: 0 };
        }
        let band = self.graph.crease_band();
        let margin = |s1: f64, s2: f64| {
            let y = self.lift(s1, s2);
            let (nu, _) = self.normal_unchecked(s1);
            dot(&sub(&y, x), &nu)
        };
        // s2 range at a given s1 (3D only).
        let half_width = |s1: f64| {
            let dz = self.graph.phi(s1) - x[VERTICAL];
            let ds = s1 - x[0];
            (r_max * r_max - ds * ds - dz * dz).max(0.0).sqrt()
        };
        let mut worst = f64::INFINITY;
        let mut count = 0usize;
        let mut probe = |s1: f64, t: f64| {
            if self.graph.near_crease(s1) {
                return;
            }
            let s2 = if self.dim() == 3 { x[1] + (2.0 * t - 1.0) * half_width(s1) } else { 0.0 };
            worst = worst.min(margin(s1, s2));
            count += 1;
        };
        // Golden-ratio (2D) and plastic-number (3D) low-discrepancy sequences.
        let g1 = 0.618_033_988_749_894_9;
        let (p1, p2) = (0.754_877_666_246_693, 0.569_840_290_998_053_3);
        for i in 0..samples.max(1) {
            let (u, v) = if self.dim() == 2 {
                ((0.5 + g1 * i as f64).fract(), 0.5)
            } else {
                ((0.5 + p1 * i as f64).fract(), (0.5 + p2 * i as f64).fract())
            };
            let mut acc = u * total;
            for &(a, b) in &intervals {
                if acc <= b - a {
                    probe(a + acc, v);
                    break;
                }
                acc -= b - a;
            }
        }
        // Margins are affine on straight pieces, so piece ends carry the minimum.
        if self.graph.is_piecewise_linear() {
            for &(a, b) in &intervals {
                let mut ends = vec![a, b];
                for c in self.graph.creases_in(a, b) {
                    ends.push(c - 2.0 * band);
                    ends.push(c + 2.0 * band);
                }
                for s in ends {
                    let s = s.clamp(a, b);
                    if self.dim() == 3 {
                        probe(s, 0.0);
                        probe(s, 1.0);
                    } else {
                        probe(s, 0.5);
                    }
                }
            }
        }
        ConeCheck { holds: worst >= -1e-12, worst_margin: worst, samples: count }
    }
}
