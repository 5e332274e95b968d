//! Lipschitz graph profiles.
//!
//! The boundary is `{x_n = φ(x_1)}`: in dimension 3 the profile is extruded
//! along `x_2`, so every distance and crossing computation reduces to the
//! `(x_1, x_n)` cross-section.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{check_dim, Point, VERTICAL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKind {
    Flat,
    Ramp { slope: f64 },
    /// Triangle wave through the origin with creases at `period/4 + k·period/2`.
    Sawtooth { slope: f64, period: f64 },
    /// Gaussian dip `a·(exp(-s²/w²) - 1)` scaled so that `max|φ'| = slope`.
    Bump { slope: f64, width: f64 },
    /// Piecewise-linear interpolant of `values[i]` at `s = (i - origin)·spacing`,
    /// constant beyond the ends.
    Grid { spacing: f64, origin: usize, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzGraph {
    pub dim: usize,
    pub tau0: f64,
    pub kind: GraphKind,
}

/// Segment `(s0, z0) → (s1, z1)` of a profile polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub s0: f64,
    pub z0: f64,
    pub s1: f64,
    pub z1: f64,
}

const BUMP_SAMPLES_PER_WIDTH: f64 = 512.0;

impl LipschitzGraph {
    pub fn flat(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(LipschitzGraph { dim, tau0: 0.0, kind: GraphKind::Flat })
    }

    pub fn ramp(dim: usize, slope: f64) -> Result<Self> {
        check_dim(dim)?;
        check_slope(slope)?;
        Ok(LipschitzGraph { dim, tau0: slope.abs(), kind: GraphKind::Ramp { slope } })
    }

    pub fn sawtooth(dim: usize, slope: f64, period: f64) -> Result<Self> {
        check_dim(dim)?;
        check_slope(slope)?;
        if !(period > 0.0) {
            return Err(Error::InvalidArgument("sawtooth period must be positive".into()));
        }
        Ok(LipschitzGraph { dim, tau0: slope.abs(), kind: GraphKind::Sawtooth { slope, period } })
    }

    pub fn bump(dim: usize, slope: f64, width: f64) -> Result<Self> {
        check_dim(dim)?;
        check_slope(slope)?;
        if !(width > 0.0) {
            return Err(Error::InvalidArgument("bump width must be positive".into()));
        }
        Ok(LipschitzGraph { dim, tau0: slope.abs(), kind: GraphKind::Bump { slope, width } })
    }

    /// Random piecewise-linear graph on `[-half_count·Δ, half_count·Δ]` whose
    /// increments are uniform in `[-τ0·Δ, τ0·Δ]`, anchored at `φ(0) = 0`.
    pub fn random_grid(dim: usize, tau0: f64, spacing: f64, half_count: usize, seed: u64) -> Result<Self> {
        check_dim(dim)?;
        check_slope(tau0)?;
        if !(spacing > 0.0) || half_count == 0 {
            return Err(Error::InvalidArgument("grid needs positive spacing and nodes".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2 * half_count + 1;
        let mut values = vec![0.0; n];
        for i in half_count + 1..n {
            values[i] = values[i - 1] + rng.gen_range(-1.0..=1.0) * tau0 * spacing;
        }
        for i in (0..half_count).rev() {
            values[i] = values[i + 1] + rng.gen_range(-1.0..=1.0) * tau0 * spacing;
        }
        Ok(LipschitzGraph {
            dim,
            tau0: tau0.abs(),
            kind: GraphKind::Grid { spacing, origin: half_count, values },
        })
    }

    pub fn from_kind(dim: usize, kind: GraphKind) -> Result<Self> {
        match kind {
            GraphKind::Flat => Self::flat(dim),
            GraphKind::Ramp { slope } => Self::ramp(dim, slope),
            GraphKind::Sawtooth { slope, period } => Self::sawtooth(dim, slope, period),
            GraphKind::Bump { slope, width } => Self::bump(dim, slope, width),
            GraphKind::Grid { spacing, origin, values } => {
                check_dim(dim)?;
                if values.len() < 2 || origin >= values.len() || !(spacing > 0.0) {
                    return Err(Error::InvalidArgument("malformed grid graph".into()));
                }
                let tau0 = values
                    .windows(2)
                    .map(|w| ((w[1] - w[0]) / spacing).abs())
                    .fold(0.0, f64::max);
                check_slope(tau0)?;
                Ok(LipschitzGraph { dim, tau0, kind: GraphKind::Grid { spacing, origin, values } })
            }
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.kind, GraphKind::Flat)
    }

    /// Whether every piece of the profile is a straight line.
    pub fn is_piecewise_linear(&self) -> bool {
        !matches!(self.kind, GraphKind::Bump { .. })
    }

    pub fn phi(&self, s: f64) -> f64 {
        match &self.kind {
            GraphKind::Flat => 0.0,
            GraphKind::Ramp { slope } => slope * s,
            GraphKind::Sawtooth { slope, period } => {
                let p = *period;
                let t = ((s + 0.25 * p) / p).rem_euclid(1.0) * p - 0.5 * p;
                slope * (0.25 * p - t.abs())
            }
            GraphKind::Bump { slope, width } => {
                let a = bump_amplitude(*slope, *width);
                a * ((-(s * s) / (width * width)).exp() - 1.0)
            }
            GraphKind::Grid { spacing, origin, values } => {
                let t = s / spacing + *origin as f64;
                if t <= 0.0 {
                    values[0]
                } else if t >= (values.len() - 1) as f64 {
                    values[values.len() - 1]
                } else {
                    let i = t.floor() as usize;
                    let f = t - i as f64;
                    values[i] * (1.0 - f) + values[i + 1] * f
                }
            }
        }
    }

    /// `φ'(s)`; at a crease this is the right derivative.
    pub fn dphi(&self, s: f64) -> f64 {
        match &self.kind {
            GraphKind::Flat => 0.0,
            GraphKind::Ramp { slope } => *slope,
            GraphKind::Sawtooth { slope, period } => {
                let p = *period;
                let t = ((s + 0.25 * p) / p).rem_euclid(1.0) * p - 0.5 * p;
                if t < 0.0 {
                    *slope
                } else {
                    -*slope
                }
            }
            GraphKind::Bump { slope, width } => {
                let a = bump_amplitude(*slope, *width);
                -2.0 * a * s / (width * width) * (-(s * s) / (width * width)).exp()
            }
            GraphKind::Grid { spacing, origin, values } => {
                let t = s / spacing + *origin as f64;
                if t < 0.0 || t >= (values.len() - 1) as f64 {
                    0.0
                } else {
                    let i = t.floor() as usize;
                    (values[i + 1] - values[i]) / spacing
                }
            }
        }
    }

    /// Second derivative (zero away from creases for piecewise-linear graphs).
    pub fn d2phi(&self, s: f64) -> f64 {
        match &self.kind {
            GraphKind::Bump { slope, width } => {
                let a = bump_amplitude(*slope, *width);
                let w2 = width * width;
                2.0 * a / w2 * (2.0 * s * s / w2 - 1.0) * (-(s * s) / w2).exp()
            }
            _ => 0.0,
        }
    }

    /// Crease locations strictly inside `(a, b)`, increasing.
    pub fn creases_in(&self, a: f64, b: f64) -> Vec<f64> {
        match &self.kind {
            GraphKind::Sawtooth { period, .. } => {
                let half = 0.5 * period;
                let k0 = ((a - 0.25 * period) / half).floor() as i64;
                let mut out = Vec::new();
                let mut k = k0;
                loop {
                    let c = 0.25 * period + k as f64 * half;
                    if c >= b {
                        break;
                    }
                    if c > a {
                        out.push(c);
                    }
                    k += 1;
                }
                out
            }
            GraphKind::Grid { spacing, origin, values } => {
                let n = values.len();
                let i0 = ((a / spacing) + *origin as f64).floor().max(0.0) as usize;
                (i0..n)
                    .map(|i| (i as f64 - *origin as f64) * spacing)
                    .skip_while(|&c| c <= a)
                    .take_while(|&c| c < b)
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    /// Width `ε_edge` of the exclusion band around creases.
    pub fn crease_band(&self) -> f64 {
        match &self.kind {
            GraphKind::Sawtooth { period, .. } => 1e-9 * period,
            GraphKind::Grid { spacing, .. } => 1e-9 * spacing,
            _ => 0.0,
        }
    }

    pub fn near_crease(&self, s: f64) -> bool {
        let band = self.crease_band();
        if band == 0.0 {
            return false;
        }
        !self.creases_in(s - band, s + band).is_empty()
    }

    /// Signed vertical height of `p` above the graph.
    #[inline]
    pub fn height(&self, p: &Point) -> f64 {
        p[VERTICAL] - self.phi(p[0])
    }

    #[inline]
    pub fn is_above(&self, p: &Point) -> bool {
        self.height(p) > 0.0
    }

    /// Polyline representation of the profile over `[a, b]`.
    ///
    /// Exact for piecewise-linear graphs; the bump is sampled at
    /// `width/512` spacing.
    pub fn segments(&self, a: f64, b: f64) -> Vec<Segment> {
        let mut knots = vec![a];
        match &self.kind {
            GraphKind::Bump { width, .. } => {
                let h = width / BUMP_SAMPLES_PER_WIDTH;
                let n = ((b - a) / h).ceil().max(1.0) as usize;
                for i in 1..n {
                    knots.push(a + (b - a) * i as f64 / n as f64);
                }
            }
            _ => knots.extend(self.creases_in(a, b)),
        }
        knots.push(b);
        knots
            .windows(2)
            .map(|w| Segment { s0: w[0], z0: self.phi(w[0]), s1: w[1], z1: self.phi(w[1]) })
            .collect()
    }

    /// Euclidean distance from the cross-section point `(s, z)` to the graph.
    pub fn distance_2d(&self, s: f64, z: f64) -> f64 {
        match &self.kind {
            GraphKind::Flat => z.abs(),
            GraphKind::Ramp { slope } => (z - slope * s).abs() / (1.0 + slope * slope).sqrt(),
            _ => {
                let reach = (z - self.phi(s)).abs();
                if reach == 0.0 {
                    return 0.0;
                }
                self.segments(s - reach, s + reach)
                    .iter()
                    .map(|seg| point_segment_distance(s, z, seg))
                    .fold(reach, f64::min)
            }
        }
    }

    /// `dist(p, Σ)` for a point in space (extrusion makes `x_2` irrelevant).
    pub fn distance(&self, p: &Point) -> f64 {
        self.distance_2d(p[0], p[VERTICAL])
    }

    /// Distance from the closed rectangle `[s_lo, s_hi] × [z_lo, z_hi]` to the
    /// graph; zero when they intersect.
    pub fn rect_distance(&self, s_lo: f64, s_hi: f64, z_lo: f64, z_hi: f64) -> f64 {
        // Vertical gap at the rectangle's horizontal extent bounds the search.
        let mut reach: f64 = 0.0;
        for s in [s_lo, s_hi, 0.5 * (s_lo + s_hi)] {
            let f = self.phi(s);
            let gap = if f < z_lo {
                z_lo - f
            } else if f > z_hi {
                f - z_hi
            } else {
                0.0
            };
            reach = reach.max(gap);
        }
        let reach = reach + self.tau0 * (s_hi - s_lo) + 1e-300;
        let segs = self.segments(s_lo - reach, s_hi + reach);
        segs.iter()
            .map(|seg| rect_segment_distance(s_lo, s_hi, z_lo, z_hi, seg))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `|φ(s) - φ(t)| / |s - t|` over `n` deterministic sample pairs
    /// in `[-extent, extent]`, including every crease neighbourhood.
    pub fn sampled_lipschitz_ratio(&self, extent: f64, n: usize) -> f64 {
        let mut pts: Vec<f64> = (0..=n).map(|i| -extent + 2.0 * extent * i as f64 / n as f64).collect();
        pts.extend(self.creases_in(-extent, extent));
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|b, a| *b - *a < 1e-9 * extent);
        let mut worst: f64 = 0.0;
        for w in pts.windows(2) {
            if w[1] > w[0] {
                worst = worst.max((self.phi(w[1]) - self.phi(w[0])).abs() / (w[1] - w[0]));
            }
        }
        // Long-range pairs too.
        for i in 0..pts.len().min(64) {
            let j = pts.len() - 1 - i;
            if pts[j] > pts[i] {
                worst = worst.max((self.phi(pts[j]) - self.phi(pts[i])).abs() / (pts[j] - pts[i]));
            }
        }
        worst
    }
}

fn check_slope(slope: f64) -> Result<()> {
    if slope.is_finite() && slope.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("slope bound {slope} must lie in [0, 1)")))
    }
}

fn bump_amplitude(slope: f64, width: f64) -> f64 {
    // max |d/ds e^{-s²/w²}| = √2·e^{-1/2}/w
    slope * width * (0.5f64).exp() / std::f64::consts::SQRT_2
}

pub fn point_segment_distance(s: f64, z: f64, seg: &Segment) -> f64 {
    let ds = seg.s1 - seg.s0;
    let dz = seg.z1 - seg.z0;
    let len2 = ds * ds + dz * dz;
    let t = if len2 > 0.0 { (((s - seg.s0) * ds + (z - seg.z0) * dz) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let ps = seg.s0 + t * ds - s;
    let pz = seg.z0 + t * dz - z;
    (ps * ps + pz * pz).sqrt()
}

fn point_rect_distance(s: f64, z: f64, s_lo: f64, s_hi: f64, z_lo: f64, z_hi: f64) -> f64 {
    let ds = (s_lo - s).max(0.0).max(s - s_hi);
    let dz = (z_lo - z).max(0.0).max(z - z_hi);
    (ds * ds + dz * dz).sqrt()
}

fn segment_hits_rect(s_lo: f64, s_hi: f64, z_lo: f64, z_hi: f64, seg: &Segment) -> bool {
    // Liang–Barsky clipping.
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let ds = seg.s1 - seg.s0;
    let dz = seg.z1 - seg.z0;
    for (p, q) in [
        (-ds, seg.s0 - s_lo),
        (ds, s_hi - seg.s0),
        (-dz, seg.z0 - z_lo),
        (dz, z_hi - seg.z0),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

pub fn rect_segment_distance(s_lo: f64, s_hi: f64, z_lo: f64, z_hi: f64, seg: &Segment) -> f64 {
    if segment_hits_rect(s_lo, s_hi, z_lo, z_hi, seg) {
        return 0.0;
    }
    let mut d = point_rect_distance(seg.s0, seg.z0, s_lo, s_hi, z_lo, z_hi)
        .min(point_rect_distance(seg.s1, seg.z1, s_lo, s_hi, z_lo, z_hi));
    for (s, z) in [(s_lo, z_lo), (s_lo, z_hi), (s_hi, z_lo), (s_hi, z_hi)] {
        d = d.min(point_segment_distance(s, z, seg));
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchored_at_origin() {
        for g in [
            LipschitzGraph::flat(2).unwrap(),
            LipschitzGraph::ramp(2, 0.1).unwrap(),
            LipschitzGraph::sawtooth(2, 0.3, 0.5).unwrap(),
            LipschitzGraph::bump(3, 0.05, 0.4).unwrap(),
            LipschitzGraph::random_grid(2, 0.1, 0.05, 40, 7).unwrap(),
        ] {
            assert_eq!(g.phi(0.0), 0.0, "{:?}", g.kind);
        }
    }

    #[test]
    fn sawtooth_shape() {
        let g = LipschitzGraph::sawtooth(2, 0.2, 1.0).unwrap();
        assert!((g.phi(0.25) - 0.05).abs() < 1e-15);
        assert!((g.phi(0.75) + 0.05).abs() < 1e-15);
        assert_eq!(g.creases_in(-0.5, 1.0), vec![-0.25, 0.25, 0.75]);
        assert!(g.near_crease(0.25));
        assert!(!g.near_crease(0.3));
        assert_eq!(g.dphi(0.1), 0.2);
        assert_eq!(g.dphi(0.4), -0.2);
    }

    #[test]
    fn bump_slope_matches_bound() {
        let g = LipschitzGraph::bump(2, 0.07, 0.3).unwrap();
        let worst = (0..20001)
            .map(|i| -1.0 + i as f64 * 1e-4)
            .map(|s| g.dphi(s).abs())
            .fold(0.0, f64::max);
        assert!((worst - 0.07).abs() < 1e-6);
    }

    #[test]
    fn lipschitz_bound_holds_on_samples() {
        for seed in 0..5 {
            let g = LipschitzGraph::random_grid(2, 0.1, 0.03, 50, seed).unwrap();
            assert!(g.sampled_lipschitz_ratio(2.0, 997) <= 0.1 + 1e-12);
        }
        let s = LipschitzGraph::sawtooth(2, 0.3, 0.2).unwrap();
        assert!(s.sampled_lipschitz_ratio(1.0, 1001) <= 0.3 + 1e-12);
    }

    #[test]
    fn distance_to_ramp_and_sawtooth() {
        let g = LipschitzGraph::ramp(2, 0.1).unwrap();
        let d = g.distance_2d(0.0, 1.0);
        assert!((d - 1.0 / 1.01f64.sqrt()).abs() < 1e-14);
        let saw = LipschitzGraph::sawtooth(2, 0.1, 1.0).unwrap();
        // Above the peak at s = 1/4 the nearest point is the peak itself.
        let d = saw.distance_2d(0.25, 0.025 + 0.5);
        assert!((d - 0.5).abs() < 1e-14);
    }

    #[test]
    fn rect_distance_flat() {
        let g = LipschitzGraph::flat(2).unwrap();
        assert!((g.rect_distance(-1.0, 1.0, 0.5, 0.75) - 0.5).abs() < 1e-15);
        assert_eq!(g.rect_distance(-1.0, 1.0, -0.5, 0.75), 0.0);
    }
}
