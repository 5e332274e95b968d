use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cube::{DyadicCube, Lattice};
use crate::error::{Error, Result};
use crate::geometry::GraphDomain;
use crate::point::{Point, VERTICAL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WhitneyParams {
    /// Acceptance constant: `ℓ(Q) ≤ c0 · dist(Q, ∂Ω)`.
    pub c0: f64,
    /// Deepest generation, counted from the base lattice.
    pub k_max: i32,
    /// Base side; `None` picks the smallest power of two covering the window.
    pub base: Option<f64>,
    /// Lattice offset as a fraction of the base side.
    pub offset_fraction: [f64; 3],
    /// Halve `c0` until `diam(Q) < dist(Q,∂Ω)/20` holds for every cube.
    pub enforce_smallness: bool,
}

impl Default for WhitneyParams {
    fn default() -> Self {
        WhitneyParams {
            c0: 1.0 / 32.0,
            k_max: 12,
            base: None,
            offset_fraction: [1.0 / 3.0, 1.0 / 3.0, 0.0],
            enforce_smallness: true,
        }
    }
}

impl WhitneyParams {
    /// Defaults with `c0` small enough for the smallness bound in dimension `dim`.
    pub fn for_dim(dim: usize) -> Self {
        WhitneyParams { c0: if dim == 3 { 1.0 / 64.0 } else { 1.0 / 32.0 }, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0 && self.c0 < 0.5) {
            return Err(Error::InvalidArgument(format!("c0 = {} outside (0, 1/2)", self.c0)));
        }
        if !(0..=40).contains(&self.k_max) {
            return Err(Error::InvalidArgument(format!("k_max = {} outside [0, 40]", self.k_max)));
        }
        if let Some(b) = self.base {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidArgument(format!("base side {b} must be positive")));
            }
        }
        Ok(())
    }

    /// Dilation bound implied by maximality: `1 + 4/c0 + 4√n`.
    pub fn lambda_bound(&self, dim: usize) -> f64 {
        1.0 + 4.0 / self.c0 + 4.0 * (dim as f64).sqrt()
    }
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Point,
    pub hi: Point,
}

impl Window {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        if (0..3).any(|i| lo[i] > hi[i]) {
            return Err(Error::InvalidArgument("window corners out of order".into()));
        }
        Ok(Window { lo, hi })
    }

    fn max_side(&self, dim: usize) -> f64 {
        DyadicCube::axes(dim).iter().map(|&i| self.hi[i] - self.lo[i]).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    Internal,
    Whitney(usize),
    /// Still touching `∂Ω` at `k_max`.
    Unresolved,
    /// Entirely below the graph.
    Exterior,
    OffWindow,
}

#[derive(Debug, Clone)]
pub struct WhitneyDecomposition {
    pub domain: GraphDomain,
    pub params: WhitneyParams,
    pub c0_requested: f64,
    pub lattice: Lattice,
    pub window: Window,
    pub roots: Vec<DyadicCube>,
    /// Accepted cubes, sorted.
    pub cubes: Vec<DyadicCube>,
    /// `dist(Q, ∂Ω)` for each accepted cube.
    pub distances: Vec<f64>,
    pub unresolved: Vec<DyadicCube>,
    pub tree: HashMap<DyadicCube, Node>,
}

/// Result of locating a point among the Whitney cubes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Located {
    Whitney(DyadicCube),
    Unresolved(DyadicCube),
    Exterior,
    Outside,
}

/// Point location in fine integer units, shared by the built tree and the
/// lazy top-down locator.
pub trait CubeIndex: Sync {
    fn dim(&self) -> usize;
    /// Generation of the integer unit: every cube has side ≥ 2 units.
    fn fine(&self) -> i32;
    fn k_max(&self) -> i32;
    /// Locates an integer point with the (lo, hi] convention.
    fn locate_units(&self, u: &[i64; 3]) -> Located;
}

fn cube_distance(domain: &GraphDomain, lattice: &Lattice, q: &DyadicCube) -> (f64, bool) {
    let lo = lattice.lo(q);
    let l = lattice.side(q);
    let d = domain.graph.rect_distance(lo[0], lo[0] + l, lo[VERTICAL], lo[VERTICAL] + l);
    let above = domain.contains(&lattice.center(q));
    (d, above)
}

fn box_distance(domain: &GraphDomain, lo: &Point, hi: &Point) -> f64 {
    domain.graph.rect_distance(lo[0], hi[0], lo[VERTICAL], hi[VERTICAL])
}

fn meets_window(lattice: &Lattice, q: &DyadicCube, w: &Window) -> bool {
    let lo = lattice.lo(q);
    let l = lattice.side(q);
    DyadicCube::axes(lattice.dim).iter().all(|&i| lo[i] < w.hi[i] && lo[i] + l > w.lo[i])
}

fn roots_for(lattice: &Lattice, w: &Window) -> Vec<DyadicCube> {
    let dim = lattice.dim;
    let a = lattice.cube_at(&w.lo, 0);
    let b = lattice.cube_at(&w.hi, 0);
    // `cube_at` uses the (lo, hi] rule; the window's lower face may sit on a lattice plane.
    let mut out = Vec::new();
    let ys = if dim == 3 { a.c[1]..=b.c[1] } else { 0..=0 };
    for i in a.c[0]..=b.c[0] {
        for j in ys.clone() {
            for k in a.c[2]..=b.c[2] {
                let q = DyadicCube { k: 0, c: [i, j, k] };
                if meets_window(lattice, &q, w) {
                    out.push(q);
                }
            }
        }
    }
    out
}

/// Top-down construction of the maximal dyadic cubes with
/// `ℓ(Q) ≤ c0 · inf_Q d` meeting the window, to generation `k_max`.
fn build_once(domain: &GraphDomain, params: &WhitneyParams, window: &Window) -> WhitneyDecomposition {
    let dim = domain.dim();
    let mut base = params.base.unwrap_or_else(|| window.max_side(dim).max(f64::MIN_POSITIVE).log2().ceil().exp2());
    // Grow the base until no generation-0 cube is itself acceptable.
    let (lattice, roots) = loop {
        let mut offset = [0.0; 3];
        for &i in DyadicCube::axes(dim) {
            offset[i] = params.offset_fraction[i] * base;
        }
        let lattice = Lattice { dim, base, offset };
        let roots = roots_for(&lattice, window);
        let acceptable = roots.iter().any(|q| {
            let (d, above) = cube_distance(domain, &lattice, q);
            above && d > 0.0 && lattice.side(q) <= params.c0 * d
        });
        if !acceptable {
            break (lattice, roots);
        }
        base *= 2.0;
    };

    let mut tree = HashMap::new();
    let mut accepted = Vec::new();
    let mut unresolved = Vec::new();
    let mut stack = roots.clone();
    while let Some(q) = stack.pop() {
        if !meets_window(&lattice, &q, window) {
            tree.insert(q, Node::OffWindow);
            continue;
        }
        let (d, above) = cube_distance(domain, &lattice, &q);
        if d > 0.0 && !above {
            tree.insert(q, Node::Exterior);
        } else if d > 0.0 && lattice.side(&q) <= params.c0 * d {
            accepted.push((q, d));
        } else if q.k >= params.k_max {
            tree.insert(q, Node::Unresolved);
            unresolved.push(q);
        } else {
            tree.insert(q, Node::Internal);
            stack.extend(q.children(dim));
        }
    }
    accepted.sort_by(|a, b| a.0.cmp(&b.0));
    unresolved.sort();
    for (i, (q, _)) in accepted.iter().enumerate() {
        tree.insert(*q, Node::Whitney(i));
    }
    WhitneyDecomposition {
        domain: domain.clone(),
        params: *params,
        c0_requested: params.c0,
        lattice,
        window: *window,
        roots,
        cubes: accepted.iter().map(|a| a.0).collect(),
        distances: accepted.iter().map(|a| a.1).collect(),
        unresolved,
        tree,
    }
}

/// Builds the Whitney cubes of the domain meeting `window`. With
/// `enforce_smallness`, `c0` is halved until property (i) holds everywhere;
/// the final value is stored in `params.c0`.
pub fn build_whitney(domain: &GraphDomain, params: &WhitneyParams, window: &Window) -> Result<WhitneyDecomposition> {
    params.validate()?;
    let dim = domain.dim();
    for corner in [window.lo, window.hi] {
        if !domain.in_box(&corner) {
            return Err(Error::PreconditionFailed("window leaves the bounding box".into()));
        }
    }
    let mut p = *params;
    loop {
        let mut dec = build_once(domain, &p, window);
        dec.c0_requested = params.c0;
        if !p.enforce_smallness {
            return Ok(dec);
        }
        let failures = dec.cubes.par_iter().enumerate().filter(|(i, q)| !dec.property_i(q, dec.distances[*i])).count();
        if failures == 0 {
            return Ok(dec);
        }
        p.c0 *= 0.5;
        if p.c0 < 1e-6 {
            return Err(Error::PreconditionFailed(format!("smallness not reached in dimension {dim}")));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhitneyAudit {
    pub cubes: usize,
    pub unresolved: usize,
    pub c0: f64,
    pub c0_requested: f64,
    /// `ℓ(Q) ≤ c0 · dist(Q,∂Ω)` with the parent violating it.
    pub maximal_pass: usize,
    /// `10Q ⊂ Ω` and `diam(Q) < dist(Q,∂Ω)/20`.
    pub property_i_pass: usize,
    /// Smallest dilation meeting `∂Ω` is within the maximality bound.
    pub property_ii_pass: usize,
    /// Every cube whose `10`-dilate meets `10Q` has side ratio in `{1/2, 1, 2}`.
    pub property_iii_pass: usize,
    /// Measured `Λ`: the largest minimal dilation over all cubes.
    pub lambda: f64,
    pub lambda_bound: f64,
    /// Measured `D0`: the largest neighbour count.
    pub d0: usize,
    pub overlapping_pairs: usize,
    pub dist_ratio_min: f64,
    pub dist_ratio_max: f64,
    pub dist_ratio_ok: bool,
    /// Integer volume accounting of the cube tree balances exactly.
    pub volume_balanced: bool,
    pub coverage_samples: usize,
    pub coverage_misses: usize,
}

impl WhitneyAudit {
    pub fn all_pass(&self) -> bool {
        self.maximal_pass == self.cubes
            && self.property_i_pass == self.cubes
            && self.property_ii_pass == self.cubes
            && self.property_iii_pass == self.cubes
            && self.lambda > 20.0
            && self.overlapping_pairs == 0
            && self.dist_ratio_ok
            && self.volume_balanced
            && self.coverage_misses == 0
    }
}

impl WhitneyDecomposition {
    pub fn side(&self, q: &DyadicCube) -> f64 {
        self.lattice.side(q)
    }

    pub fn center(&self, q: &DyadicCube) -> Point {
        self.lattice.center(q)
    }

    /// Index of an accepted cube.
    pub fn index_of(&self, q: &DyadicCube) -> Option<usize> {
        match self.tree.get(q) {
            Some(Node::Whitney(i)) => Some(*i),
            _ => None,
        }
    }

    /// Top-down locator on the same lattice and constant, reaching `k_max`
    /// without building the collar.
    pub fn lazy(&self, k_max: i32) -> Result<LazyWhitney> {
        if !(self.params.k_max..=60).contains(&k_max) {
            return Err(Error::InvalidArgument(format!("lazy depth {k_max} outside [{}, 60]", self.params.k_max)));
        }
        Ok(LazyWhitney {
            domain: self.domain.clone(),
            lattice: self.lattice,
            c0: self.params.c0,
            k_max,
            roots: self.roots.iter().copied().collect(),
        })
    }

    /// Fails with `WindowTouchesBoundary` when an unresolved collar exists.
    pub fn require_resolved(&self) -> Result<()> {
        if self.unresolved.is_empty() {
            Ok(())
        } else {
            Err(Error::WindowTouchesBoundary { unresolved: self.unresolved.len() })
        }
    }

    fn property_i(&self, q: &DyadicCube, d: f64) -> bool {
        let (lo, hi) = self.lattice.dilated(q, 10.0);
        let inside = box_distance(&self.domain, &lo, &hi) > 0.0 && self.domain.contains(&self.center(q));
        inside && self.lattice.diameter(q) < d / 20.0
    }

    /// Smallest `λ ≥ 1` with `λQ ∩ ∂Ω ≠ ∅`, to relative precision `1e-10`.
    pub fn minimal_dilation(&self, q: &DyadicCube, d: f64) -> f64 {
        let hits = |lam: f64| {
            let (lo, hi) = self.lattice.dilated(q, lam);
            box_distance(&self.domain, &lo, &hi) == 0.0
        };
        let mut a = 1.0;
        let mut b = 1.0 + 2.0 * d / self.side(q) + 1e-9;
        while !hits(b) {
            a = b;
            b *= 2.0;
        }
        while b - a > 1e-10 * b {
            let m = 0.5 * (a + b);
            if hits(m) {
                b = m;
            } else {
                a = m;
            }
        }
        b
    }

    fn units_box(&self, q: &DyadicCube, pad_num: i64, pad_den: i64) -> ([i64; 3], [i64; 3]) {
        let f = self.fine();
        let s = q.side_units(f);
        let lo = q.lo_units(f);
        let pad = s * pad_num / pad_den;
        let mut a = [0i64; 3];
        let mut b = [0i64; 3];
        for &i in DyadicCube::axes(self.dim()) {
            a[i] = lo[i] - pad;
            b[i] = lo[i] + s + pad;
        }
        (a, b)
    }

    fn boxes_meet(&self, a: &([i64; 3], [i64; 3]), b: &([i64; 3], [i64; 3])) -> bool {
        DyadicCube::axes(self.dim()).iter().all(|&i| a.0[i] <= b.1[i] && b.0[i] <= a.1[i])
    }

    /// Indices of cubes `Q′ ≠ Q` with `10Q ∩ 10Q′ ≠ ∅` (closed dilates).
    pub fn neighbors(&self, idx: usize) -> Vec<usize> {
        let q = self.cubes[idx];
        let target = self.units_box(&q, 9, 2);
        let mut out = Vec::new();
        let mut stack: Vec<DyadicCube> = self.roots.clone();
        while let Some(n) = stack.pop() {
            match self.tree.get(&n) {
                Some(Node::Internal) => {
                    // Descendants have side ≤ ℓ/2, so their 10-dilates stay within 9ℓ/4.
                    if self.boxes_meet(&self.units_box(&n, 9, 4), &target) {
                        stack.extend(n.children(self.dim()));
                    }
                }
                Some(Node::Whitney(j)) if *j != idx => {
                    if self.boxes_meet(&self.units_box(&n, 9, 2), &target) {
                        out.push(*j);
                    }
                }
                _ => {}
            }
        }
        out.sort_unstable();
        out
    }

    /// Locates `p` in the cube tree.
    pub fn locate(&self, p: &Point) -> Located {
        let mut q = self.lattice.cube_at(p, 0);
        loop {
            match self.tree.get(&q) {
                None | Some(Node::OffWindow) => return Located::Outside,
                Some(Node::Exterior) => return Located::Exterior,
                Some(Node::Unresolved) => return Located::Unresolved(q),
                Some(Node::Whitney(_)) => return Located::Whitney(q),
                Some(Node::Internal) => q = self.lattice.cube_at(p, q.k + 1),
            }
        }
    }

    /// Exhaustive audit of every accepted cube.
    pub fn audit(&self) -> WhitneyAudit {
        let dim = self.dim();
        let c0 = self.params.c0;
        let lambda_bound = self.params.lambda_bound(dim);
        struct Row {
            maximal: bool,
            i: bool,
            lambda: f64,
            iii: bool,
            neighbors: usize,
            overlap: bool,
            ratio: f64,
        }
        let rows: Vec<Row> = (0..self.cubes.len())
            .into_par_iter()
            .map(|idx| {
                let q = self.cubes[idx];
                let d = self.distances[idx];
                let l = self.side(&q);
                let parent = q.parent();
                let (dp, _) = cube_distance(&self.domain, &self.lattice, &parent);
                let maximal = l <= c0 * d && 2.0 * l > c0 * dp;
                let lambda = self.minimal_dilation(&q, d);
                let nb = self.neighbors(idx);
                let iii = nb.iter().all(|&j| (self.cubes[j].k - q.k).abs() <= 1);
                let overlap = (0..q.k).any(|k| !matches!(self.tree.get(&q.ancestor(k)), Some(Node::Internal)));
                Row { maximal, i: self.property_i(&q, d), lambda, iii, neighbors: nb.len(), overlap, ratio: d / l }
            })
            .collect();
        let ratio_min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        let ratio_max = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
        let (samples, misses) = self.coverage_check(2000, 7);
        WhitneyAudit {
            cubes: self.cubes.len(),
            unresolved: self.unresolved.len(),
            c0,
            c0_requested: self.c0_requested,
            maximal_pass: rows.iter().filter(|r| r.maximal).count(),
            property_i_pass: rows.iter().filter(|r| r.i).count(),
            property_ii_pass: rows.iter().filter(|r| r.lambda <= lambda_bound).count(),
            property_iii_pass: rows.iter().filter(|r| r.iii).count(),
            lambda: rows.iter().map(|r| r.lambda).fold(0.0, f64::max),
            lambda_bound,
            d0: rows.iter().map(|r| r.neighbors).max().unwrap_or(0),
            overlapping_pairs: rows.iter().filter(|r| r.overlap).count(),
            dist_ratio_min: ratio_min,
            dist_ratio_max: ratio_max,
            dist_ratio_ok: rows.is_empty() || (ratio_min >= 0.5 / c0 && ratio_max <= 4.0 / c0),
            volume_balanced: self.volume_balanced(),
            coverage_samples: samples,
            coverage_misses: misses,
        }
    }

    /// Every leaf volume sums to the root volume, in integer units.
    fn volume_balanced(&self) -> bool {
        let f = self.fine();
        let n = self.dim() as u32;
        let vol = |q: &DyadicCube| (q.side_units(f) as i128).pow(n);
        let roots: i128 = self.roots.iter().map(vol).sum();
        let leaves: i128 = self.tree.iter().filter(|(_, n)| !matches!(n, Node::Internal)).map(|(q, _)| vol(q)).sum();
        // Internal nodes must have all children present.
        let closed = self
            .tree
            .iter()
            .filter(|(_, n)| matches!(n, Node::Internal))
            .all(|(q, _)| q.children(self.dim()).iter().all(|c| self.tree.contains_key(c)));
        closed && roots == leaves
    }

    /// Random points of `window ∩ Ω` must land in a Whitney cube or the
    /// unresolved collar.
    fn coverage_check(&self, n: usize, seed: u64) -> (usize, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = 0;
        let mut misses = 0;
        let mut tries = 0;
        while samples < n && tries < 20 * n {
            tries += 1;
            let mut p = [0.0; 3];
            for &i in DyadicCube::axes(self.dim()) {
                p[i] = rng.gen_range(self.window.lo[i]..=self.window.hi[i]);
            }
            if !self.domain.contains(&p) {
                continue;
            }
            samples += 1;
            match self.locate(&p) {
                Located::Whitney(q) if self.lattice.contains(&q, &p) => {}
                Located::Unresolved(_) => {}
                _ => misses += 1,
            }
        }
        (samples, misses)
    }

    /// CSV with columns `k, c1[, c2], cn, side, x1[, x2], xn, dist`.
    pub fn to_csv(&self) -> String {
        let dim = self.dim();
        let axes = DyadicCube::axes(dim);
        let mut s = String::new();
        let names: Vec<String> = axes.iter().map(|&i| if i == VERTICAL { "n".to_string() } else { (i + 1).to_string() }).collect();
        let _ = writeln!(
            s,
            "k,{},side,{},dist_to_boundary",
            names.iter().map(|n| format!("c{n}")).collect::<Vec<_>>().join(","),
            names.iter().map(|n| format!("x{n}")).collect::<Vec<_>>().join(",")
        );
        for (q, d) in self.cubes.iter().zip(&self.distances) {
            let c = self.center(q);
            let coords: Vec<String> = axes.iter().map(|&i| q.c[i].to_string()).collect();
            let center: Vec<String> = axes.iter().map(|&i| format!("{:.17e}", c[i])).collect();
            let _ = writeln!(s, "{},{},{:.17e},{},{:.17e}", q.k, coords.join(","), self.side(q), center.join(","), d);
        }
        s
    }
}

impl CubeIndex for WhitneyDecomposition {
    fn dim(&self) -> usize {
        self.lattice.dim
    }

    fn fine(&self) -> i32 {
        self.params.k_max + 1
    }

    fn k_max(&self) -> i32 {
        self.params.k_max
    }

    fn locate_units(&self, u: &[i64; 3]) -> Located {
        let f = self.fine();
        let mut k = 0;
        loop {
            let s = 1i64 << (f - k);
            let mut c = [0i64; 3];
            for &i in DyadicCube::axes(self.lattice.dim) {
                c[i] = (u[i] - 1).div_euclid(s);
            }
            let q = DyadicCube { k, c };
            match self.tree.get(&q) {
                None | Some(Node::OffWindow) => return Located::Outside,
                Some(Node::Exterior) => return Located::Exterior,
                Some(Node::Unresolved) => return Located::Unresolved(q),
                Some(Node::Whitney(_)) => return Located::Whitney(q),
                Some(Node::Internal) => k += 1,
            }
        }
    }
}

/// Whitney cubes found on demand by descending from the generation-0 cube
/// containing a point; agrees with the built tree wherever both are defined.
#[derive(Debug, Clone)]
pub struct LazyWhitney {
    pub domain: GraphDomain,
    pub lattice: Lattice,
    pub c0: f64,
    pub k_max: i32,
    roots: HashSet<DyadicCube>,
}

impl CubeIndex for LazyWhitney {
    fn dim(&self) -> usize {
        self.lattice.dim
    }

    fn fine(&self) -> i32 {
        self.k_max + 1
    }

    fn k_max(&self) -> i32 {
        self.k_max
    }

    fn locate_units(&self, u: &[i64; 3]) -> Located {
        let f = self.fine();
        let mut k = 0;
        loop {
            let s = 1i64 << (f - k);
            let mut c = [0i64; 3];
            for &i in DyadicCube::axes(self.lattice.dim) {
                c[i] = (u[i] - 1).div_euclid(s);
            }
            let q = DyadicCube { k, c };
            if k == 0 && !self.roots.contains(&q) {
                return Located::Outside;
            }
            let (d, above) = cube_distance(&self.domain, &self.lattice, &q);
            if d > 0.0 && !above {
                return Located::Exterior;
            }
            if d > 0.0 && self.lattice.side(&q) <= self.c0 * d {
                return Located::Whitney(q);
            }
            if k >= self.k_max {
                return Located::Unresolved(q);
            }
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LipschitzGraph;

    fn half_plane() -> GraphDomain {
        GraphDomain::at_origin(LipschitzGraph::flat(2).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn half_plane_quarter_constant() {
        let p = WhitneyParams { c0: 0.25, k_max: 9, enforce_smallness: false, ..Default::default() };
        let w = Window::new([-1.0, 0.0, 0.0], [1.0, 0.0, 1.0]).unwrap();
        let dec = build_whitney(&half_plane(), &p, &w).unwrap();
        assert!(!dec.cubes.is_empty());
        for (q, d) in dec.cubes.iter().zip(&dec.distances) {
            let l = dec.side(q);
            let lo = dec.lattice.lo(q);
            assert_eq!(*d, lo[2]);
            assert!(l <= 0.25 * d);
            // The parent has bottom at height ≤ t and side 2ℓ > t/4.
            assert!(2.0 * l > 0.25 * dec.lattice.lo(&q.parent())[2]);
            let t = dec.center(q)[2];
            assert!(l >= t / 9.0 && l <= t / 4.0, "side {l} at height {t}");
        }
        let a = dec.audit();
        assert_eq!(a.maximal_pass, a.cubes);
        assert_eq!(a.overlapping_pairs, 0);
        assert!(a.volume_balanced && a.coverage_misses == 0);
        assert!(a.unresolved > 0);
        assert!(matches!(dec.require_resolved(), Err(Error::WindowTouchesBoundary { .. })));
    }

    #[test]
    fn audited_constant_passes_everything() {
        let d = GraphDomain::at_origin(LipschitzGraph::ramp(2, 0.1).unwrap(), 1.0).unwrap();
        let w = Window::new([-1.0, 0.0, -0.1], [1.0, 0.0, 2.0]).unwrap();
        let dec = build_whitney(&d, &WhitneyParams { k_max: 9, ..WhitneyParams::for_dim(2) }, &w).unwrap();
        let a = dec.audit();
        assert!(a.all_pass(), "{a:?}");
        assert!(a.lambda > 20.0 && a.lambda <= a.lambda_bound);
    }

    #[test]
    fn shrinking_records_final_constant() {
        let d = half_plane();
        let w = Window::new([-1.0, 0.0, 0.0], [1.0, 0.0, 1.0]).unwrap();
        let p = WhitneyParams { c0: 0.25, k_max: 10, ..Default::default() };
        let dec = build_whitney(&d, &p, &w).unwrap();
        assert_eq!(dec.c0_requested, 0.25);
        assert!(dec.params.c0 < 0.25);
        assert_eq!(dec.audit().property_i_pass, dec.cubes.len());
    }

    #[test]
    fn three_dimensional_audit() {
        // Audited c0 = 1/64 stacks ~64 cube layers per generation; keep the window narrow.
        let d = GraphDomain::at_origin(LipschitzGraph::ramp(3, 0.05).unwrap(), 1.0).unwrap();
        let w = Window::new([-0.1, -0.1, 2.0], [0.1, 0.1, 3.0]).unwrap();
        let dec = build_whitney(&d, &WhitneyParams { k_max: 8, ..WhitneyParams::for_dim(3) }, &w).unwrap();
        assert!(dec.unresolved.is_empty());
        let a = dec.audit();
        assert!(a.all_pass(), "{a:?}");
    }

    #[test]
    fn csv_has_one_row_per_cube() {
        let p = WhitneyParams { c0: 0.25, k_max: 6, enforce_smallness: false, ..Default::default() };
        let w = Window::new([-1.0, 0.0, 0.0], [1.0, 0.0, 1.0]).unwrap();
        let dec = build_whitney(&half_plane(), &p, &w).unwrap();
        let csv = dec.to_csv();
        assert!(csv.starts_with("k,c1,cn,side,x1,xn,dist_to_boundary\n"));
        assert_eq!(csv.lines().count(), dec.cubes.len() + 1);
    }
}
