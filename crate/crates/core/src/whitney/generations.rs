use std::collections::HashSet;

use serde::Serialize;

use super::cube::DyadicCube;
use super::decomp::{build_whitney, CubeIndex, Located, WhitneyDecomposition, WhitneyParams, Window};
use crate::error::{Error, Result};
use crate::geometry::GraphDomain;
use crate::point::{dist, Point, VERTICAL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootChoice {
    pub cube: DyadicCube,
    pub index: usize,
    /// `ℓ(R0) / r(B0)`.
    pub c: f64,
    /// Smallest `M` with `R0 ⊂ (M/2) B0`.
    pub m: f64,
}

pub(crate) fn horizontal_axes(dim: usize) -> &'static [usize] {
    if dim == 2 {
        &[0]
    } else {
        &[0, 1]
    }
}

/// Whitney cube `R0` with `Π(B0) ⊂ Π(R0)`, `ℓ(R0) ≤ C r(B0)` and
/// `R0 ⊂ (M/2) B0`; the closest such cube to the centre of `B0`.
pub fn select_r0(dec: &WhitneyDecomposition, b0: &Ball, c_max: f64, m_max: f64) -> Result<RootChoice> {
    let dim = dec.lattice.dim;
    let r = b0.radius;
    let mut best: Option<(f64, RootChoice)> = None;
    for (i, q) in dec.cubes.iter().enumerate() {
        let lo = dec.lattice.lo(q);
        let l = dec.side(q);
        let covers = horizontal_axes(dim).iter().all(|&a| lo[a] <= b0.center[a] - r && b0.center[a] + r <= lo[a] + l);
        if !covers || l > c_max * r {
            continue;
        }
        let mut far: f64 = 0.0;
        for corner in 0..(1 << 3) {
            let mut p = lo;
            for (bit, &a) in DyadicCube::axes(dim).iter().enumerate() {
                if corner >> bit & 1 == 1 {
                    p[a] += l;
                }
            }
            far = far.max(dist(&p, &b0.center));
        }
        let m = 2.0 * far / r;
        if m > m_max {
            continue;
        }
        let key = dist(&dec.center(q), &b0.center);
        if best.as_ref().map_or(true, |(k, _)| key < *k) {
            best = Some((key, RootChoice { cube: *q, index: i, c: l / r, m }));
        }
    }
    best.map(|b| b.1).ok_or(Error::NoRootFound)
}

/// Builds a decomposition and selects `R0`; on `NoRootFound` translates the
/// lattice by half a cell of the largest admissible side and retries once.
pub fn select_r0_translating(
    domain: &GraphDomain,
    params: &WhitneyParams,
    window: &Window,
    b0: &Ball,
    c_max: f64,
    m_max: f64,
) -> Result<(WhitneyDecomposition, RootChoice)> {
    let dec = build_whitney(domain, params, window)?;
    match select_r0(&dec, b0, c_max, m_max) {
        Ok(r) => Ok((dec, r)),
        Err(Error::NoRootFound) => {
            let base = dec.lattice.base;
            let k = (base / (c_max * b0.radius)).log2().ceil().max(0.0);
            let half = 0.5 * base * (-k).exp2();
            let mut p = *params;
            for &a in horizontal_axes(domain.dim()) {
                p.offset_fraction[a] += half / base;
            }
            p.base = Some(base);
            let dec = build_whitney(domain, &p, window)?;
            let r = select_r0(&dec, b0, c_max, m_max)?;
            Ok((dec, r))
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GenerationCell {
    /// Index of `Q′ ∈ J_k(R0)` inside `Π(R0)`, in `[0, 2^k)^{n-1}`.
    pub j: [i64; 2],
    /// Selected Whitney cube `s(Q′)`.
    pub cube: DyadicCube,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationLevel {
    pub k: u32,
    pub root: DyadicCube,
    pub cells: Vec<GenerationCell>,
    /// Integer check that the shadows tile `Π(R0)` with no overlap.
    pub partition_exact: bool,
    pub all_below: bool,
}

/// `s(Q′)` for the shadow `j` of level `k`: the first cube of side
/// `≤ 2^{-k} ℓ(R0)` on the vertical chain from `R0` through the centre of `Q′`.
pub fn select_cell(index: &dyn CubeIndex, r0: &DyadicCube, k: u32, j: [i64; 2]) -> Result<DyadicCube> {
    let target = r0.k + k as i32;
    let depth = || Error::DepthExceeded { needed: target as u32, built: index.k_max().max(0) as u32 };
    if target > index.k_max() {
        return Err(depth());
    }
    let f = index.fine();
    let r0_lo = r0.lo_units(f);
    let side_t = 1i64 << (f - target);
    let mut u = [0i64; 3];
    u[0] = r0_lo[0] + j[0] * side_t + side_t / 2;
    if index.dim() == 3 {
        u[1] = r0_lo[1] + j[1] * side_t + side_t / 2;
    }
    u[VERTICAL] = r0_lo[VERTICAL] + 1;
    loop {
        match index.locate_units(&u) {
            Located::Whitney(q) if q.k >= target => return Ok(q),
            Located::Whitney(q) => u[VERTICAL] = q.lo_units(f)[VERTICAL] - 1,
            Located::Unresolved(_) => return Err(depth()),
            _ => return Err(Error::PreconditionFailed("vertical descent left the decomposition window".into())),
        }
    }
}

/// All shadows of level `k`, row-major in `j`.
pub fn shadows(dim: usize, k: u32) -> Vec<[i64; 2]> {
    let count = 1i64 << k;
    let j2 = if dim == 3 { count } else { 1 };
    (0..count).flat_map(|a| (0..j2).map(move |b| [a, b])).collect()
}

/// `D_W^k(R0)`: one Whitney cube per dyadic shadow of side `2^{-k} ℓ(R0)`.
pub fn generations(index: &dyn CubeIndex, r0: &DyadicCube, k: u32) -> Result<GenerationLevel> {
    let dim = index.dim();
    let cells = shadows(dim, k)
        .into_iter()
        .map(|j| select_cell(index, r0, k, j).map(|cube| GenerationCell { j, cube }))
        .collect::<Result<Vec<_>>>()?;
    let f = index.fine();
    let target = r0.k + k as i32;
    let side_t = 1i64 << (f - target);
    // Shadows: exact generation, inside Π(R0), pairwise distinct, full count.
    let mut seen = HashSet::new();
    let mut exact = true;
    let mut area: i128 = 0;
    for c in &cells {
        let q = c.cube;
        let inside = horizontal_axes(dim).iter().all(|&a| (q.c[a] >> k) == r0.c[a] && q.k == target);
        exact &= inside && seen.insert((q.c[0], q.c[1]));
        area += (side_t as i128).pow(dim as u32 - 1);
    }
    exact &= area == (1i128 << (f - r0.k)).pow(dim as u32 - 1);
    let bottom = r0.lo_units(f)[VERTICAL];
    let all_below = k == 0 || cells.iter().all(|c| c.cube.lo_units(f)[VERTICAL] + side_t <= bottom);
    Ok(GenerationLevel { k, root: *r0, cells, partition_exact: exact, all_below })
}

/// Levels `0..=k_max` of the generation map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationMap {
    pub root: DyadicCube,
    pub levels: Vec<GenerationLevel>,
}

impl GenerationMap {
    pub fn build(dec: &dyn CubeIndex, r0: &DyadicCube, k_max: u32) -> Result<Self> {
        let levels = (0..=k_max).map(|k| generations(dec, r0, k)).collect::<Result<Vec<_>>>()?;
        Ok(GenerationMap { root: *r0, levels })
    }

    /// Cells of level `k2 > k1` whose shadows lie in the shadow of cell `j1` of level `k1`.
    pub fn descendants(&self, k1: u32, j1: [i64; 2], k2: u32) -> Vec<GenerationCell> {
        let s = k2 - k1;
        self.levels[k2 as usize].cells.iter().filter(|c| c.j[0] >> s == j1[0] && c.j[1] >> s == j1[1]).copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LipschitzGraph;

    fn half_plane() -> GraphDomain {
        GraphDomain::at_origin(LipschitzGraph::flat(2).unwrap(), 1.0).unwrap().with_extent(64.0)
    }

    fn unit_ball() -> Ball {
        Ball { center: [0.0; 3], radius: 1.0 }
    }

    fn quarter() -> WhitneyParams {
        WhitneyParams { c0: 0.25, k_max: 12, enforce_smallness: false, ..Default::default() }
    }

    #[test]
    fn half_plane_root_and_columns() {
        let w = Window::new([-4.0, 0.0, 0.0], [4.0, 0.0, 40.0]).unwrap();
        let dec = build_whitney(&half_plane(), &quarter(), &w).unwrap();
        let r = select_r0(&dec, &unit_ball(), 8.0, f64::INFINITY).unwrap();
        assert!(r.c >= 2.0 && r.c <= 8.0, "{r:?}");
        let c = dec.center(&r.cube);
        assert!(c[0] - 0.5 * dec.side(&r.cube) <= -1.0 && c[0] + 0.5 * dec.side(&r.cube) >= 1.0);
        for k in 0..=6 {
            let g = generations(&dec, &r.cube, k).unwrap();
            assert_eq!(g.cells.len(), 1 << k);
            assert!(g.partition_exact && g.all_below);
            for cell in &g.cells {
                let q = cell.cube;
                assert_eq!(dec.side(&q), dec.side(&r.cube) * (-(k as f64)).exp2());
                let lo = dec.lattice.lo(&r.cube)[0];
                let shadow_mid = lo + (cell.j[0] as f64 + 0.5) * dec.side(&q);
                assert!((dec.center(&q)[0] - shadow_mid).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lazy_locator_matches_tree() {
        let d = GraphDomain::at_origin(LipschitzGraph::sawtooth(2, 0.1, 0.5).unwrap(), 1.0).unwrap().with_extent(64.0);
        let w = Window::new([-4.0, 0.0, -0.5], [4.0, 0.0, 40.0]).unwrap();
        let dec = build_whitney(&d, &WhitneyParams { k_max: 11, ..quarter() }, &w).unwrap();
        let lazy = dec.lazy(20).unwrap();
        let r = select_r0(&dec, &unit_ball(), 8.0, f64::INFINITY).unwrap();
        for k in 0..=6 {
            assert_eq!(generations(&dec, &r.cube, k).unwrap().cells, generations(&lazy, &r.cube, k).unwrap().cells);
        }
        let deep = generations(&lazy, &r.cube, 12).unwrap();
        assert!(deep.partition_exact && deep.all_below);
    }

    #[test]
    fn aligned_lattice_needs_translation() {
        let w = Window::new([-4.0, 0.0, 0.0], [4.0, 0.0, 40.0]).unwrap();
        let p = WhitneyParams { offset_fraction: [0.0; 3], ..quarter() };
        let dec = build_whitney(&half_plane(), &p, &w).unwrap();
        assert_eq!(select_r0(&dec, &unit_ball(), 8.0, f64::INFINITY).unwrap_err(), Error::NoRootFound);
        let (dec, r) = select_r0_translating(&half_plane(), &p, &w, &unit_ball(), 8.0, f64::INFINITY).unwrap();
        assert!(r.c <= 8.0);
        assert!(generations(&dec, &r.cube, 3).unwrap().partition_exact);
    }

    #[test]
    fn ramp_partition_exact_to_six() {
        let d = GraphDomain::at_origin(LipschitzGraph::ramp(2, 0.1).unwrap(), 1.0).unwrap().with_extent(64.0);
        let w = Window::new([-4.0, 0.0, -0.5], [4.0, 0.0, 40.0]).unwrap();
        let p = WhitneyParams { k_max: 14, ..quarter() };
        let dec = build_whitney(&d, &p, &w).unwrap();
        let b0 = Ball { center: [0.0; 3], radius: 1.0 };
        let r = select_r0(&dec, &b0, 8.0, f64::INFINITY).unwrap();
        let map = GenerationMap::build(&dec, &r.cube, 6).unwrap();
        assert!(map.levels.iter().all(|l| l.partition_exact && l.all_below));
        let kids = map.descendants(2, map.levels[2].cells[1].j, 5);
        assert_eq!(kids.len(), 8);
    }

    #[test]
    fn slope_005_root_postconditions() {
        let d = GraphDomain::at_origin(LipschitzGraph::ramp(2, 0.05).unwrap(), 1.0).unwrap().with_extent(64.0);
        let w = Window::new([-4.0, 0.0, -0.5], [4.0, 0.0, 40.0]).unwrap();
        let dec = build_whitney(&d, &quarter(), &w).unwrap();
        let b0 = Ball { center: [0.0; 3], radius: 1.0 };
        let r = select_r0(&dec, &b0, 8.0, 100.0).unwrap();
        let lo = dec.lattice.lo(&r.cube);
        let l = dec.side(&r.cube);
        assert!(lo[0] <= -1.0 && lo[0] + l >= 1.0);
        assert!(l <= 8.0 && r.m <= 100.0);
    }

    #[test]
    fn too_shallow_is_reported() {
        let w = Window::new([-4.0, 0.0, 0.0], [4.0, 0.0, 40.0]).unwrap();
        let p = WhitneyParams { k_max: 6, ..quarter() };
        let dec = build_whitney(&half_plane(), &p, &w).unwrap();
        let r = select_r0(&dec, &unit_ball(), 8.0, f64::INFINITY).unwrap();
        assert!(matches!(generations(&dec, &r.cube, 5), Err(Error::DepthExceeded { .. })));
    }

    #[test]
    fn three_dimensional_counts() {
        let d = GraphDomain::at_origin(LipschitzGraph::flat(3).unwrap(), 1.0).unwrap().with_extent(64.0);
        let w = Window::new([-4.0, -4.0, 0.0], [4.0, 4.0, 36.0]).unwrap();
        let dec = build_whitney(&d, &WhitneyParams { k_max: 9, ..quarter() }, &w).unwrap();
        let r = select_r0(&dec, &unit_ball(), 8.0, f64::INFINITY).unwrap();
        for k in 0..=3 {
            let g = generations(&dec, &r.cube, k).unwrap();
            assert_eq!(g.cells.len(), 1 << (2 * k));
            assert!(g.partition_exact);
        }
    }
}
