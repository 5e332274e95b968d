//! The generation cascade: frequencies of Whitney cubes at scale `Aℓ(Q)`,
//! good sets, the functions `f_j`, a law-of-large-numbers harness and the
//! doubling survey at boundary points.

mod doubling;
mod fj;
mod lln;

pub use doubling::{boundary_sample, doubling_survey, DoublingParams, DoublingPoint, DoublingSurvey};
pub use fj::{build_fj, FjFamily, FjFunction, PushforwardMeasure};
pub use lln::{lln_harness, EtemadiConditions, LlnReport, LlnSpec};

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::HarmonicField;
use crate::frequency::frequency_value;
use crate::geometry::GraphDomain;
use crate::point::{Point, VERTICAL};
use crate::whitney::{
    select_cell, select_r0_translating, shadows, Ball, CubeIndex, DyadicCube, LazyWhitney, RootChoice, WhitneyParams,
    Window,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CascadeParams {
    /// Dilation `A`.
    pub a: f64,
    /// Frequency threshold `N0`.
    pub n0: f64,
    /// Generation stride; `None` gives `⌈log2 A⌉ + j`.
    pub k: Option<u32>,
    /// Depth parameter `j` of the stride and of `δ0 ≈ 2^{-j(n-1)}`.
    pub j: u32,
    /// Expected good fraction; `None` gives `2^{-j(n-1)}`.
    pub delta0_expected: Option<f64>,
    /// Root side bound `ℓ(R0) ≤ C r(B0)`.
    pub c_root: f64,
    /// Outer dilation bound `R0 ⊂ (M/2) B0`.
    pub m_outer: f64,
    /// Stride levels below `R0` to compute.
    pub levels: u32,
    /// Horizon `h` of the functions `f_j`.
    pub horizon: u32,
    pub seed: u64,
    /// Quadrature tolerance of each frequency.
    pub tol: f64,
    /// Cap on frequency evaluations.
    pub max_evaluations: usize,
    pub whitney: WhitneyParams,
}

impl Default for CascadeParams {
    fn default() -> Self {
        CascadeParams {
            a: 16.0,
            n0: 10.0,
            k: None,
            j: 2,
            delta0_expected: None,
            c_root: 8.0,
            m_outer: f64::INFINITY,
            levels: 2,
            horizon: 0,
            seed: 42,
            tol: 1e-8,
            max_evaluations: 200_000,
            whitney: WhitneyParams { c0: 0.25, k_max: 8, enforce_smallness: false, ..Default::default() },
        }
    }
}

impl CascadeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 1.0) {
            return Err(Error::InvalidArgument(format!("A = {} must exceed 1", self.a)));
        }
        if !(self.n0 > 1.0) {
            return Err(Error::InvalidArgument(format!("N0 = {} must exceed 1", self.n0)));
        }
        if self.stride() == 0 {
            return Err(Error::InvalidArgument("stride K must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidArgument(format!("tol = {} outside (0,1)", self.tol)));
        }
        self.whitney.validate()
    }

    pub fn stride(&self) -> u32 {
        self.k.unwrap_or_else(|| self.a.log2().ceil() as u32 + self.j)
    }

    pub fn delta0(&self, dim: usize) -> f64 {
        self.delta0_expected.unwrap_or_else(|| (-((self.j * (dim as u32 - 1)) as f64)).exp2())
    }
}

/// Frequency of one cube at scale `Aℓ(Q)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubeFrequency {
    /// Shadow index at its generation below `R0`.
    pub shadow: [i64; 2],
    pub cube: DyadicCube,
    pub center: Point,
    pub side: f64,
    /// `F(x_Q, Aℓ(Q))`; `None` when `h` vanishes.
    pub f: Option<f64>,
    /// `(1-τ0)·height(x_Q) - 2τ0·Aℓ(Q)`: non-negative margin certifies
    /// the cone condition on `(0, Aℓ(Q))`.
    pub margin: f64,
}

impl CubeFrequency {
    pub fn admissible(&self) -> bool {
        self.margin >= 0.0
    }
}

fn cube_frequency(
    field: &dyn HarmonicField,
    domain: &GraphDomain,
    index: &LazyWhitney,
    r0: &DyadicCube,
    gen: u32,
    shadow: [i64; 2],
    a: f64,
    tol: f64,
) -> Result<CubeFrequency> {
    let cube = select_cell(index, r0, gen, shadow)?;
    let center = index.lattice.center(&cube);
    let side = index.lattice.side(&cube);
    let radius = a * side;
    let tau = domain.graph.tau0;
    let height = center[VERTICAL] - domain.graph.phi(center[0]);
    let margin = (1.0 - tau) * height - 2.0 * tau * radius;
    let f = match frequency_value(field, domain, &center, radius, tol) {
        Ok(f) => Some(f),
        Err(Error::ZeroAverage { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(CubeFrequency { shadow, cube, center, side, f, margin })
}

/// `Q ↦ F(x_Q, Aℓ(Q))` over the whole generation `gen` below `R0`.
pub fn generation_frequencies(
    field: &dyn HarmonicField,
    domain: &GraphDomain,
    index: &LazyWhitney,
    r0: &DyadicCube,
    gen: u32,
    a: f64,
    tol: f64,
) -> Result<Vec<CubeFrequency>> {
    shadows(index.dim(), gen)
        .par_iter()
        .map(|&s| cube_frequency(field, domain, index, r0, gen, s, a, tol))
        .collect()
}

/// One computed node of the cascade at stride level `level`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeNode {
    pub level: u32,
    pub freq: CubeFrequency,
    /// `F ≤ N0`: the node belongs to `T_level`.
    pub in_t: bool,
    /// No ancestor-or-self at levels `≥ h` lies in `T`.
    pub live: bool,
    /// Shadow index of the parent node at `level - 1`.
    pub parent: Option<[i64; 2]>,
}

/// `G_K(R)` for one expanded node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoodSet {
    pub level: u32,
    pub shadow: [i64; 2],
    pub f_r: f64,
    pub above_threshold: bool,
    /// Shadows (next level) of the good children.
    pub good: Vec<[i64; 2]>,
    pub children: usize,
    /// `μ(G) / μ(Π(R))`, exact from equal-area shadows.
    pub fraction: f64,
    /// `max_Q F(x_Q,Aℓ(Q)) / F(x_R,Aℓ(R))`.
    pub max_growth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub level: u32,
    pub generation: u32,
    pub nodes: usize,
    pub in_t: usize,
    pub live: usize,
    pub undefined: usize,
    pub inadmissible: usize,
    pub f_min: f64,
    pub f_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyLemmaSummary {
    pub a: f64,
    pub stride: u32,
    pub delta0_expected: f64,
    /// Nodes with `F ≥ N0` whose children were computed.
    pub tested: usize,
    pub min_fraction: f64,
    pub max_growth: f64,
    /// `max(0, g - 1 - 5·tol)·√A`: growth within quadrature slack counts as none.
    pub c_hat: f64,
    pub fraction_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeReport {
    pub params: CascadeParams,
    pub dim: usize,
    pub root: RootChoice,
    pub root_side: f64,
    pub c0: f64,
    pub levels: Vec<LevelSummary>,
    pub nodes: Vec<Vec<CascadeNode>>,
    pub good_sets: Vec<GoodSet>,
    pub key_lemma: KeyLemmaSummary,
    pub evaluations: usize,
    pub truncated: bool,
    /// Some cube had `h = 0`: the field vanishes near it.
    pub degenerate: bool,
}

impl CascadeReport {
    pub fn node(&self, level: u32, shadow: [i64; 2]) -> Option<&CascadeNode> {
        let v = self.nodes.get(level as usize)?;
        v.binary_search_by(|n| n.freq.shadow.cmp(&shadow)).ok().map(|i| &v[i])
    }
}

/// Builds the Whitney cubes around `B0`, picks `R0`, and runs the cascade
/// for `params.levels` strides, expanding every node that is above the
/// threshold or still live for the `f_j` construction.
pub fn run_cascade(field: &dyn HarmonicField, domain: &GraphDomain, b0: &Ball, params: &CascadeParams) -> Result<CascadeReport> {
    params.validate()?;
    let dim = domain.dim();
    let r = b0.radius;
    let stride = params.stride();
    let c0 = params.whitney.c0;
    let mut lo = b0.center;
    let mut hi = b0.center;
    for &i in DyadicCube::axes(dim) {
        if i == VERTICAL {
            lo[i] = b0.center[i] - params.c_root * r * domain.graph.tau0.max(0.05);
            hi[i] = b0.center[i] + (2.0 / c0 + 2.0) * params.c_root * r;
        } else {
            lo[i] = b0.center[i] - params.c_root * r;
            hi[i] = b0.center[i] + params.c_root * r;
        }
    }
    let window = Window::new(lo, hi)?;
    let base_guess = window_max_side(&window, dim).log2().ceil().exp2();
    let built_depth = ((base_guess / (0.25 * r)).log2().ceil() as i32).clamp(1, 30);
    let wp = WhitneyParams { k_max: built_depth, ..params.whitney };
    let (dec, root) = select_r0_translating(domain, &wp, &window, b0, params.c_root, params.m_outer)?;
    let r0 = root.cube;
    let needed = r0.k + ((params.levels + 1) * stride) as i32 + 2;
    if needed > 60 {
        return Err(Error::DepthExceeded { needed: needed as u32, built: 60 });
    }
    let lazy = dec.lazy(needed.max(dec.params.k_max))?;
    let root_side = lazy.lattice.side(&r0);
    domain
        .check_ball(&lazy.lattice.center(&r0), params.a * root_side)
        .map_err(|e| Error::PreconditionFailed(format!("ball B(x_R0, Aℓ(R0)) outside the domain window: {e}")))?;

    let eval = |gen: u32, s: [i64; 2]| cube_frequency(field, domain, &lazy, &r0, gen, s, params.a, params.tol);
    let root_f = eval(0, [0, 0])?;
    let mk = |level: u32, freq: CubeFrequency, parent: Option<&CascadeNode>| {
        let in_t = freq.f.map_or(true, |f| f <= params.n0);
        let parent_live = parent.map_or(true, |p| p.live);
        let live = parent_live && !(level >= params.horizon && in_t) && freq.f.is_some();
        CascadeNode { level, in_t, live, parent: parent.map(|p| p.freq.shadow), freq }
    };
    let mut nodes: Vec<Vec<CascadeNode>> = vec![vec![mk(0, root_f, None)]];
    let mut good_sets = Vec::new();
    let mut evaluations = 1usize;
    let mut truncated = false;
    let per_node = 1usize << (stride * (dim as u32 - 1));
    for level in 0..params.levels {
        let expand: Vec<&CascadeNode> = nodes[level as usize]
            .iter()
            .filter(|n| n.live || n.freq.f.map_or(false, |f| f >= params.n0))
            .collect();
        if evaluations + expand.len() * per_node > params.max_evaluations {
            truncated = true;
            break;
        }
        let gen = (level + 1) * stride;
        let jobs: Vec<(usize, [i64; 2])> = expand
            .iter()
            .enumerate()
            .flat_map(|(pi, p)| {
                let s = p.freq.shadow;
                let k = stride as i64;
                shadows(dim, stride).into_iter().map(move |c| (pi, [(s[0] << k) + c[0], (s[1] << k) + c[1]]))
            })
            .collect();
        let freqs: Vec<CubeFrequency> = jobs.par_iter().map(|&(_, s)| eval(gen, s)).collect::<Result<Vec<_>>>()?;
        evaluations += freqs.len();
        let mut children: Vec<CascadeNode> = Vec::with_capacity(freqs.len());
        let mut by_parent: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, ((pi, _), fq)) in jobs.iter().zip(freqs).enumerate() {
            children.push(mk(level + 1, fq, Some(expand[*pi])));
            by_parent.entry(*pi).or_default().push(i);
        }
        for (pi, p) in expand.iter().enumerate() {
            let kids = &by_parent[&pi];
            let f_r = p.freq.f.unwrap_or(0.0);
            let above = p.freq.f.map_or(false, |f| f >= params.n0);
            let good: Vec<[i64; 2]> = if above {
                kids.iter()
                    .filter(|&&i| children[i].freq.f.map_or(false, |f| f <= 0.5 * f_r))
                    .map(|&i| children[i].freq.shadow)
                    .collect()
            } else {
                kids.iter().map(|&i| children[i].freq.shadow).collect()
            };
            let max_growth = kids
                .iter()
                .filter_map(|&i| children[i].freq.f)
                .map(|f| f / f_r)
                .fold(f64::NEG_INFINITY, f64::max);
            good_sets.push(GoodSet {
                level,
                shadow: p.freq.shadow,
                f_r,
                above_threshold: above,
                fraction: good.len() as f64 / kids.len() as f64,
                good,
                children: kids.len(),
                max_growth,
            });
        }
        children.sort_by(|a, b| a.freq.shadow.cmp(&b.freq.shadow));
        nodes.push(children);
    }
    let levels: Vec<LevelSummary> = nodes
        .iter()
        .enumerate()
        .map(|(l, v)| {
            let fs: Vec<f64> = v.iter().filter_map(|n| n.freq.f).collect();
            LevelSummary {
                level: l as u32,
                generation: l as u32 * stride,
                nodes: v.len(),
                in_t: v.iter().filter(|n| n.in_t).count(),
                live: v.iter().filter(|n| n.live).count(),
                undefined: v.len() - fs.len(),
                inadmissible: v.iter().filter(|n| !n.freq.admissible()).count(),
                f_min: fs.iter().copied().fold(f64::INFINITY, f64::min),
                f_max: fs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    let tested: Vec<&GoodSet> = good_sets.iter().filter(|g| g.above_threshold).collect();
    let min_fraction = tested.iter().map(|g| g.fraction).fold(1.0, f64::min);
    let max_growth = tested.iter().map(|g| g.max_growth).fold(f64::NEG_INFINITY, f64::max);
    let delta0 = params.delta0(dim);
    let key_lemma = KeyLemmaSummary {
        a: params.a,
        stride,
        delta0_expected: delta0,
        tested: tested.len(),
        min_fraction,
        max_growth,
        c_hat: if tested.is_empty() { 0.0 } else { (max_growth - 1.0 - 5.0 * params.tol).max(0.0) * params.a.sqrt() },
        fraction_ok: min_fraction >= delta0,
    };
    let degenerate = levels.iter().any(|l| l.undefined > 0);
    Ok(CascadeReport {
        params: *params,
        dim,
        root,
        root_side,
        c0: dec.params.c0,
        levels,
        nodes,
        good_sets,
        key_lemma,
        evaluations,
        truncated,
        degenerate,
    })
}

fn window_max_side(w: &Window, dim: usize) -> f64 {
    DyadicCube::axes(dim).iter().map(|&i| w.hi[i] - w.lo[i]).fold(0.0, f64::max)
}

/// `G_K(R)` for a node of a finished cascade.
pub fn good_set(report: &CascadeReport, level: u32, shadow: [i64; 2]) -> Option<&GoodSet> {
    report.good_sets.iter().find(|g| g.level == level && g.shadow == shadow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::CatalogField;
    use crate::geometry::LipschitzGraph;

    fn flat() -> GraphDomain {
        GraphDomain::at_origin(LipschitzGraph::flat(2).unwrap(), 1.0).unwrap().with_extent(16.0)
    }

    fn b0() -> Ball {
        Ball { center: [0.0; 3], radius: 1.0 / 64.0 }
    }

    #[test]
    fn linear_field_is_below_threshold_everywhere() {
        let u = CatalogField::named(2, "linear").unwrap();
        let p = CascadeParams { levels: 2, k: Some(2), horizon: 1, ..Default::default() };
        let rep = run_cascade(&u, &flat(), &b0(), &p).unwrap();
        assert!(rep.nodes.iter().flatten().all(|n| n.in_t && n.freq.f.unwrap() < 2.0 && n.freq.admissible()));
        assert!(rep.good_sets.iter().all(|g| g.fraction == 1.0 && !g.above_threshold));
        assert_eq!(rep.key_lemma.tested, 0);
        // Only the root expands: nothing below it is live or above threshold.
        assert_eq!(rep.nodes[1].len(), 4);
        assert!(rep.nodes[2].is_empty());
    }

    /// `u = y⁺` about `(s, t)` with `0 < t < r`: `H = r∫(t + r sin θ)² dθ` over the arc
    /// above the axis, `I` = area of the disc segment.
    fn linear_closed_form(t: f64, r: f64) -> f64 {
        let a = (t / r).asin();
        let (lo, hi) = (-a, std::f64::consts::PI + a);
        let prim = |th: f64| t * t * th - 2.0 * t * r * th.cos() + r * r * (th / 2.0 - (2.0 * th).sin() / 4.0);
        let h = r * (prim(hi) - prim(lo));
        let phi = 2.0 * (t / r).acos();
        let area = std::f64::consts::PI * r * r - 0.5 * r * r * (phi - phi.sin());
        2.0 * r * area / h
    }

    #[test]
    fn linear_field_frequency_matches_closed_form() {
        let u = CatalogField::named(2, "linear").unwrap();
        let p = CascadeParams { levels: 1, k: Some(1), a: 64.0, horizon: 1, ..Default::default() };
        let rep = run_cascade(&u, &flat(), &b0(), &p).unwrap();
        assert_eq!(rep.nodes[1].len(), 2);
        for n in rep.nodes.iter().flatten() {
            let f = n.freq.f.unwrap();
            let exact = linear_closed_form(n.freq.center[2], 64.0 * n.freq.side);
            assert!((f - exact).abs() < 1e-6 * exact, "{f} {exact}");
            assert!(f < 2.0);
        }
    }

    #[test]
    fn zero_field_is_flagged() {
        let z = CatalogField::named(2, "zero").unwrap();
        let rep = run_cascade(&z, &flat(), &b0(), &CascadeParams { levels: 1, k: Some(1), ..Default::default() }).unwrap();
        assert!(rep.degenerate);
        assert!(rep.nodes[0][0].freq.f.is_none());
    }

    #[test]
    fn high_frequency_field_has_good_sets() {
        let u = CatalogField::named(2, "odd-harmonic-8").unwrap();
        let p = CascadeParams { levels: 1, ..Default::default() };
        let rep = run_cascade(&u, &flat(), &b0(), &p).unwrap();
        assert!(rep.nodes[0][0].freq.f.unwrap() > 10.0, "{:?}", rep.nodes[0][0]);
        assert!(rep.key_lemma.tested >= 1);
        assert!(rep.key_lemma.fraction_ok, "{:?}", rep.key_lemma);
        assert_eq!(rep.key_lemma.delta0_expected, 0.25);
        for g in &rep.good_sets {
            assert!((0.0..=1.0).contains(&g.fraction));
        }
    }
}
