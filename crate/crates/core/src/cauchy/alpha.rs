use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::mfs::{kernel, kernel_gradient};
use crate::fields::{CatalogField, HarmonicField};
use crate::point::{check_dim, norm, Point, VERTICAL};
use crate::quad::gauss_legendre_on;

/// The half ball `B_1^+`, the flat face `Γ = {|x| < 3/4, x_n = 0}` and the
/// observation ball `B((1/2)e_n, 1/4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HalfBallProblem {
    pub dim: usize,
    pub gamma_radius: f64,
    pub obs_height: f64,
    pub obs_radius: f64,
}

impl Default for HalfBallProblem {
    fn default() -> Self {
        HalfBallProblem { dim: 2, gamma_radius: 0.75, obs_height: 0.5, obs_radius: 0.25 }
    }
}

impl HalfBallProblem {
    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        let (h, r) = (self.obs_height, self.obs_radius);
        if !(self.gamma_radius > 0.0 && self.gamma_radius < 1.0 && r > 0.0 && h - r > 0.0 && h + r < 1.0) {
            return Err(Error::InvalidArgument(format!("observation ball or Γ outside the half ball: {self:?}")));
        }
        Ok(())
    }

    pub fn obs_center(&self) -> Point {
        let mut c = [0.0; 3];
        c[VERTICAL] = self.obs_height;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CauchyFamily {
    /// `v_ε = ε·w` with `w` a catalog field scaled to unit Cauchy data and bulk norm ≤ 1.
    LinearScaling { field: String },
    /// Worst case over an MFS basis: maximise `∫_{obs} v²` subject to
    /// `∫_{B_1^+} v² + ε^{-2} ∫_Γ (v² + |∇v|²) ≤ 1`.
    MfsConstrained { n_sources: usize, source_radius: f64 },
}

impl Default for CauchyFamily {
    fn default() -> Self {
        CauchyFamily::MfsConstrained { n_sources: 48, source_radius: 1.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlphaParams {
    pub problem: HalfBallProblem,
    pub family: CauchyFamily,
    /// Positive, decreasing.
    pub eps: Vec<f64>,
    /// Gauss–Legendre nodes per direction for the Gram matrices.
    pub nodes: usize,
    /// Points on `∂B_obs` and on `Γ` for the suprema.
    pub sup_samples: usize,
    /// Basis directions with bulk Gram eigenvalue below `cutoff·λ_max` are dropped.
    pub cutoff: f64,
}

impl Default for AlphaParams {
    fn default() -> Self {
        AlphaParams {
            problem: HalfBallProblem::default(),
            family: CauchyFamily::default(),
            eps: vec![1e-1, 1e-2, 1e-3, 1e-4],
            nodes: 48,
            sup_samples: 2048,
            cutoff: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchySample {
    /// Requested data bound.
    pub eps: f64,
    /// `sup_Γ |v| + sup_Γ |∇v|` actually reached, used as the abscissa of the fit.
    pub eps_achieved: f64,
    pub bulk: f64,
    /// `sup_{B(e_n/2, 1/4)} |v|`.
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyFitResult {
    pub samples: Vec<CauchySample>,
    /// Slope of `log sup` against `log ε_achieved`.
    pub alpha: f64,
    pub log_c: f64,
    pub r2: f64,
    pub basis_rank: usize,
}

/// Weighted nodes of a product rule on a ball piece: `(point, weight)`.
fn ball_nodes(dim: usize, center: &Point, radius: f64, upper_half: bool, n: usize) -> Vec<(Point, f64)> {
    let (rs, rw) = gauss_legendre_on(n, 0.0, radius);
    let mut out = Vec::new();
    if dim == 2 {
        let (a, b) = if upper_half { (0.0, PI) } else { (0.0, 2.0 * PI) };
        let (ts, tw) = gauss_legendre_on(if upper_half { 2 * n } else { 4 * n }, a, b);
        for (r, wr) in rs.iter().zip(&rw) {
            for (t, wt) in ts.iter().zip(&tw) {
                out.push(([center[0] + r * t.cos(), 0.0, center[2] + r * t.sin()], wr * wt * r));
            }
        }
    } else {
        let theta_max = if upper_half { 0.5 * PI } else { PI };
        let (ts, tw) = gauss_legendre_on(n, 0.0, theta_max);
        let (ps, pw) = gauss_legendre_on(2 * n, 0.0, 2.0 * PI);
        for (r, wr) in rs.iter().zip(&rw) {
            for (t, wt) in ts.iter().zip(&tw) {
                for (p, wp) in ps.iter().zip(&pw) {
                    let st = t.sin();
                    let x = [center[0] + r * st * p.cos(), center[1] + r * st * p.sin(), center[2] + r * t.cos()];
                    out.push((x, wr * wt * wp * r * r * st));
                }
            }
        }
    }
    out
}

/// Nodes on the flat face `{|x'| < ρ, x_n = 0}`.
fn face_nodes(dim: usize, rho: f64, n: usize) -> Vec<(Point, f64)> {
    if dim == 2 {
        let (xs, ws) = gauss_legendre_on(2 * n, -rho, rho);
        return xs.into_iter().zip(ws).map(|(x, w)| ([x, 0.0, 0.0], w)).collect();
    }
    let (rs, rw) = gauss_legendre_on(n, 0.0, rho);
    let (ps, pw) = gauss_legendre_on(2 * n, 0.0, 2.0 * PI);
    let mut out = Vec::new();
    for (r, wr) in rs.iter().zip(&rw) {
        for (p, wp) in ps.iter().zip(&pw) {
            out.push(([r * p.cos(), r * p.sin(), 0.0], wr * wp * r));
        }
    }
    out
}

/// Roughly uniform points on a circle or sphere.
fn sphere_samples(dim: usize, c: &Point, rho: f64, count: usize) -> Vec<Point> {
    (0..count)
        .map(|i| {
            if dim == 2 {
                let t = 2.0 * PI * i as f64 / count as f64;
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

fn face_samples(dim: usize, rho: f64, count: usize) -> Vec<Point> {
    if dim == 2 {
        return (0..count).map(|i| [-rho + 2.0 * rho * i as f64 / (count - 1) as f64, 0.0, 0.0]).collect();
    }
    let m = (count as f64).sqrt().ceil() as usize;
    let mut out = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let p = [-rho + 2.0 * rho * i as f64 / (m - 1) as f64, -rho + 2.0 * rho * j as f64 / (m - 1) as f64, 0.0];
            if p[0] * p[0] + p[1] * p[1] <= rho * rho {
                out.push(p);
            }
        }
    }
    out
}

/// A harmonic function given by coefficients over a fixed basis.
trait Basis: Sync {
    fn len(&self) -> usize;
    /// Values and gradients of every basis function at `p`.
    fn eval(&self, p: &Point) -> (Vec<f64>, Vec<Point>);
}

struct MfsBasis {
    dim: usize,
    sources: Vec<Point>,
}

impl Basis for MfsBasis {
    fn len(&self) -> usize {
        self.sources.len() + 1
    }
    fn eval(&self, p: &Point) -> (Vec<f64>, Vec<Point>) {
        let mut v = vec![1.0];
        let mut g = vec![[0.0; 3]];
        for y in &self.sources {
            let d = [p[0] - y[0], p[1] - y[1], p[2] - y[2]];
            v.push(kernel(self.dim, &d));
            g.push(kernel_gradient(self.dim, &d));
        }
        (v, g)
    }
}

struct Sampled {
    values: Vec<f64>,
    gradients: Vec<Point>,
}

fn combine(basis: &dyn Basis, coef: &DVector<f64>, pts: &[Point]) -> Sampled {
    let (values, gradients) = pts
        .par_iter()
        .map(|p| {
            let (v, g) = basis.eval(p);
            let mut s = 0.0;
            let mut gs = [0.0; 3];
            for i in 0..v.len() {
                s += coef[i] * v[i];
                for a in 0..3 {
                    gs[a] += coef[i] * g[i][a];
                }
            }
            (s, gs)
        })
        .unzip();
    Sampled { values, gradients }
}

/// `Σ_q w_q f_i(q) f_j(q)` with `f` the values (and, if asked, gradients).
fn gram(basis: &dyn Basis, nodes: &[(Point, f64)], with_gradient: bool) -> DMatrix<f64> {
    let m = basis.len();
    nodes
        .par_iter()
        .fold(
            || DMatrix::<f64>::zeros(m, m),
            |mut acc, (p, w)| {
                let (v, g) = basis.eval(p);
                for i in 0..m {
                    for j in i..m {
                        let mut s = v[i] * v[j];
                        if with_gradient {
                            s += g[i][0] * g[j][0] + g[i][1] * g[j][1] + g[i][2] * g[j][2];
                        }
                        acc[(i, j)] += w * s;
                    }
                }
                acc
            },
        )
        .reduce(|| DMatrix::<f64>::zeros(m, m), |a, b| a + b)
        .symmetric_part_upper()
}

trait SymmetricUpper {
    fn symmetric_part_upper(self) -> Self;
}

impl SymmetricUpper for DMatrix<f64> {
    fn symmetric_part_upper(mut self) -> Self {
        let m = self.nrows();
        for i in 0..m {
            for j in 0..i {
                self[(i, j)] = self[(j, i)];
            }
        }
        self
    }
}

struct Measures {
    face: Vec<Point>,
    obs: Vec<Point>,
}

impl Measures {
    fn new(p: &HalfBallProblem, count: usize) -> Self {
        Measures {
            face: face_samples(p.dim, p.gamma_radius, count),
            obs: sphere_samples(p.dim, &p.obs_center(), p.obs_radius, count),
        }
    }

    /// `(sup_Γ |v| + sup_Γ |∇v|, sup_obs |v|)`; the latter on `∂B_obs` by the maximum principle.
    fn sups(&self, basis: &dyn Basis, coef: &DVector<f64>) -> (f64, f64) {
        let f = combine(basis, coef, &self.face);
        let data = f.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            + f.gradients.iter().fold(0.0f64, |m, g| m.max(norm(g)));
        let o = combine(basis, coef, &self.obs);
        (data, o.values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }
}

fn fit(samples: &[CauchySample]) -> Result<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = samples.iter().filter(|s| s.sup > 0.0).map(|s| (s.eps_achieved.ln(), s.sup.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateFamily("fewer than two samples with non-zero supremum".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFamily("achieved data bounds do not vary".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    if !slope.is_finite() || !intercept.is_finite() {
        return Err(Error::FitDiverged { residual: f64::NAN, tolerance: 0.0 });
    }
    Ok((slope, intercept, r2))
}

/// Fits `sup_{B(e_n/2,1/4)} |v| ≈ C ε^α` over the ε grid for the chosen family.
pub fn estimate_alpha(params: &AlphaParams) -> Result<CauchyFitResult> {
    let p = &params.problem;
    p.validate()?;
    if params.eps.is_empty() || params.eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) || params.eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("ε grid must be positive, below 1 and decreasing".into()));
    }
    if params.nodes < 4 || params.sup_samples < 16 {
        return Err(Error::InvalidArgument("too few quadrature nodes or samples".into()));
    }
    let measures = Measures::new(p, params.sup_samples);
    let (samples, rank) = match &params.family {
        CauchyFamily::LinearScaling { field } => {
            let w = CatalogField::named(p.dim, field)?;
            (linear_scaling(&w, p, params, &measures)?, 1)
        }
        CauchyFamily::MfsConstrained { n_sources, source_radius } => {
            if *n_sources < 4 || !(*source_radius > 1.0) {
                return Err(Error::InvalidArgument("MFS family needs ≥ 4 sources outside the unit ball".into()));
            }
            let basis = MfsBasis { dim: p.dim, sources: sphere_samples(p.dim, &[0.0; 3], *source_radius, *n_sources) };
            constrained(&basis, p, params, &measures)?
        }
    };
    if samples.last().map(|s| s.sup) >= samples.first().map(|s| s.sup) {
        return Err(Error::DegenerateFamily(format!(
            "supremum does not decrease with ε: {:?}",
            samples.iter().map(|s| s.sup).collect::<Vec<_>>()
        )));
    }
    let (alpha, log_c, r2) = fit(&samples)?;
    Ok(CauchyFitResult { samples, alpha, log_c, r2, basis_rank: rank })
}

struct Scaled<'a>(&'a CatalogField);

impl Basis for Scaled<'_> {
    fn len(&self) -> usize {
        1
    }
    fn eval(&self, p: &Point) -> (Vec<f64>, Vec<Point>) {
        (vec![self.0.value(p)], vec![self.0.gradient(p)])
    }
}

fn linear_scaling(w: &CatalogField, p: &HalfBallProblem, params: &AlphaParams, m: &Measures) -> Result<Vec<CauchySample>> {
    let basis = Scaled(w);
    let bulk = gram(&basis, &ball_nodes(p.dim, &[0.0; 3], 1.0, true, params.nodes), false)[(0, 0)];
    let (data, _) = m.sups(&basis, &DVector::from_element(1, 1.0));
    if !(data > 0.0 && bulk > 0.0) {
        return Err(Error::DegenerateFamily("scaling field has no Cauchy data on Γ".into()));
    }
    // Unit Cauchy data, bulk norm at most one for every ε < 1.
    let s0 = (1.0 / data).min(1.0 / bulk.sqrt());
    Ok(params
        .eps
        .iter()
        .map(|&eps| {
            let c = DVector::from_element(1, eps * s0);
            let (d, sup) = m.sups(&basis, &c);
            CauchySample { eps, eps_achieved: d, bulk: bulk * (eps * s0).powi(2), sup }
        })
        .collect())
}

fn constrained(basis: &dyn Basis, p: &HalfBallProblem, params: &AlphaParams, m: &Measures) -> Result<(Vec<CauchySample>, usize)> {
    let n = params.nodes;
    let bulk = gram(basis, &ball_nodes(p.dim, &[0.0; 3], 1.0, true, n), false);
    let data = gram(basis, &face_nodes(p.dim, p.gamma_radius, n), true);
    let obs = gram(basis, &ball_nodes(p.dim, &p.obs_center(), p.obs_radius, false, n / 2), false);

    // Orthonormal directions for the bulk inner product.
    let eig = SymmetricEigen::new(bulk);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > params.cutoff * lmax).collect();
    if keep.is_empty() {
        return Err(Error::IllConditioned);
    }
    let mut t = DMatrix::<f64>::zeros(basis.len(), keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let s = 1.0 / eig.eigenvalues[i].sqrt();
        t.set_column(c, &(eig.eigenvectors.column(i) * s));
    }
    let cd = t.transpose() * &data * &t;
    // Positive semidefinite in exact arithmetic; clamp the roundoff.
    let ce = SymmetricEigen::new(0.5 * (&cd + cd.transpose()));
    let cd = &ce.eigenvectors * DMatrix::from_diagonal(&ce.eigenvalues.map(|l| l.max(0.0))) * ce.eigenvectors.transpose();
    let od = t.transpose() * &obs * &t;
    let k = keep.len();

    let mut samples = Vec::with_capacity(params.eps.len());
    for &eps in &params.eps {
        let mm = DMatrix::<f64>::identity(k, k) + &cd / (eps * eps);
        // `M^{-1/2}` from the eigen-decomposition; `M ≥ I` keeps it bounded.
        let me = SymmetricEigen::new(0.5 * (&mm + mm.transpose()));
        if me.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::IllConditioned);
        }
        let d_inv = DMatrix::from_diagonal(&me.eigenvalues.map(|l| 1.0 / l.sqrt()));
        let w = &me.eigenvectors * d_inv * me.eigenvectors.transpose();
        let s = &w * &od * &w;
        let se = SymmetricEigen::new(0.5 * (&s + s.transpose()));
        let top = (0..k).max_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b])).unwrap();
        let x = &w * se.eigenvectors.column(top);
        let coef = &t * &x;
        let (d, _) = m.sups(basis, &coef);
        let b = x.norm_squared();
        // Rescale so that one of `bulk ≤ 1`, `data ≤ ε` is tight.
        let scale = 1.0 / b.sqrt().max(d / eps);
        let coef = coef * scale;
        let (d, sup) = m.sups(basis, &coef);
        samples.push(CauchySample { eps, eps_achieved: d, bulk: b * scale * scale, sup });
    }
    Ok((samples, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_scaling_has_unit_exponent() {
        for dim in [2, 3] {
            let params = AlphaParams {
                problem: HalfBallProblem { dim, ..Default::default() },
                family: CauchyFamily::LinearScaling { field: "re-harmonic-2".into() },
                nodes: 16,
                ..Default::default()
            };
            let fit = estimate_alpha(&params).unwrap();
            assert!((fit.alpha - 1.0).abs() < 1e-10 && fit.r2 > 1.0 - 1e-12, "{fit:?}");
            assert!(fit.samples.iter().all(|s| s.bulk <= 1.0 && (s.eps_achieved / s.eps - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn constrained_family_has_positive_exponent() {
        let fit = estimate_alpha(&AlphaParams::default()).unwrap();
        assert!(fit.alpha > 0.0 && fit.r2 >= 0.9, "{fit:?}");
        for s in &fit.samples {
            assert!(s.bulk <= 1.0 + 1e-9 && s.eps_achieved <= s.eps * (1.0 + 1e-9), "{s:?}");
        }
    }

    #[test]
    fn rejects_bad_grid() {
        let p = AlphaParams { eps: vec![1e-2, 1e-1], ..Default::default() };
        assert!(estimate_alpha(&p).is_err());
    }

    #[test]
    fn quadrature_measures_half_ball() {
        let nodes = ball_nodes(2, &[0.0; 3], 1.0, true, 8);
        let area: f64 = nodes.iter().map(|n| n.1).sum();
        assert!((area - PI / 2.0).abs() < 1e-13);
        let nodes = ball_nodes(3, &[0.0; 3], 1.0, true, 8);
        let vol: f64 = nodes.iter().map(|n| n.1).sum();
        assert!((vol - 2.0 * PI / 3.0).abs() < 1e-13);
    }
}
