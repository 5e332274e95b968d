use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::HarmonicField;
use crate::frequency::h_average;
use crate::geometry::GraphDomain;
use crate::point::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DoublingParams {
    pub n0: f64,
    /// Multiplies `48^{N0}` in the bound check.
    pub safety: f64,
    pub tol: f64,
}

impl Default for DoublingParams {
    fn default() -> Self {
        DoublingParams { n0: 10.0, safety: 1.0, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingPoint {
    pub x: Point,
    /// Radii actually surveyed (the grid above the quadrature floor).
    pub radii: Vec<f64>,
    /// `h(x,12r)/h(x,r)`.
    pub ratios: Vec<f64>,
    pub running_min: Vec<f64>,
    pub min: f64,
    pub within_bound: bool,
    /// `h` vanished at some radius.
    pub zero_average: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingSurvey {
    pub bound: f64,
    pub points: Vec<DoublingPoint>,
}

impl DoublingSurvey {
    pub fn all_within_bound(&self) -> bool {
        self.points.iter().all(|p| p.within_bound)
    }

    /// `x, min, within_bound` per point.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x1,x2,xn,min_ratio,within_bound\n");
        for p in &self.points {
            s.push_str(&format!("{:.17e},{:.17e},{:.17e},{:.17e},{}\n", p.x[0], p.x[1], p.x[2], p.min, p.within_bound));
        }
        s
    }
}

/// Points of Σ above a uniform sample of `Π(B(center, radius))`'s bounding
/// square, shrunk by `shrink`.
pub fn boundary_sample(domain: &GraphDomain, count: usize, shrink: f64, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = shrink * domain.radius;
    (0..count)
        .map(|_| {
            let s1 = domain.center[0] + rng.gen_range(-half..=half);
            let s2 = if domain.dim() == 3 { domain.center[1] + rng.gen_range(-half..=half) } else { 0.0 };
            domain.lift(s1, s2)
        })
        .collect()
}

/// `h(x,12r)/h(x,r)` along a decreasing radius grid at each point of Σ,
/// with running minima and the check `min ≤ safety·48^{N0}`.
pub fn doubling_survey(
    field: &dyn HarmonicField,
    domain: &GraphDomain,
    points: &[Point],
    r_grid: &[f64],
    params: &DoublingParams,
) -> Result<DoublingSurvey> {
    if r_grid.is_empty() || r_grid.windows(2).any(|w| !(w[1] < w[0])) || !(r_grid[r_grid.len() - 1] > 0.0) {
        return Err(Error::InvalidArgument("radius grid must be positive and decreasing".into()));
    }
    let floor = 1e3 * f64::EPSILON * domain.radius;
    let radii: Vec<f64> = r_grid.iter().copied().take_while(|&r| 12.0 * r >= floor).collect();
    for x in points {
        domain
            .check_ball(x, 12.0 * r_grid[0])
            .map_err(|e| Error::PreconditionFailed(format!("12·r_max leaves the window: {e}")))?;
    }
    let bound = params.safety * 48f64.powf(params.n0);
    let survey: Vec<DoublingPoint> = points
        .par_iter()
        .map(|x| -> Result<DoublingPoint> {
            let mut ratios = Vec::with_capacity(radii.len());
            let mut zero = false;
            for &r in &radii {
                let small = h_average(field, domain, x, r, params.tol)?;
                let big = h_average(field, domain, x, 12.0 * r, params.tol)?;
                if !(small > 0.0) {
                    zero = true;
                    ratios.push(f64::INFINITY);
                } else {
                    ratios.push(big / small);
                }
            }
            let mut running_min = Vec::with_capacity(ratios.len());
            let mut m = f64::INFINITY;
            for &q in &ratios {
                m = m.min(q);
                running_min.push(m);
            }
            Ok(DoublingPoint {
                x: *x,
                radii: radii.clone(),
                ratios,
                running_min,
                min: m,
                within_bound: m <= bound,
                zero_average: zero,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DoublingSurvey { bound, points: survey })
}
