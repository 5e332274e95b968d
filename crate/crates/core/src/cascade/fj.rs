use serde::Serialize;

use super::CascadeReport;

/// `μ = Π_Σ0 # (m_{n-1} restricted to the shadow of R0)`: the measure of a
/// lifted shadow equals the area of the shadow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PushforwardMeasure {
    pub dim: usize,
    pub root_side: f64,
}

impl PushforwardMeasure {
    /// `μ(Π_Σ0(Q))` for a shadow at generation `gen` below `R0`.
    pub fn of_generation(&self, gen: u32) -> f64 {
        (self.root_side * (-(gen as f64)).exp2()).powi(self.dim as i32 - 1)
    }

    /// Area of a generation-`gen` shadow in units of generation `fine`.
    pub fn units(&self, gen: u32, fine: u32) -> i128 {
        1i128 << ((fine - gen) * (self.dim as u32 - 1))
    }

    pub fn total(&self) -> f64 {
        self.of_generation(0)
    }
}

/// `f_j`: piecewise constant on the shadows of generation `(j+1)K`; only the
/// non-zero cells are stored, sorted by shadow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FjFunction {
    pub j: u32,
    pub resolution: u32,
    pub cells: Vec<([i64; 2], f64)>,
    /// Live cubes whose good set was empty (`f_Q` set to zero).
    pub empty_good_sets: usize,
}

impl FjFunction {
    pub fn value_at_cell(&self, shadow: [i64; 2]) -> f64 {
        self.cells.binary_search_by(|c| c.0.cmp(&shadow)).map(|i| self.cells[i].1).unwrap_or(0.0)
    }

    /// Value at relative position `x ∈ [0,1)^{n-1}` of the shadow of `R0`.
    pub fn value_at(&self, x: [f64; 2]) -> f64 {
        self.value_at_cell(cell_of(x, self.resolution))
    }

    pub fn integral(&self, mu: &PushforwardMeasure) -> f64 {
        let w = mu.of_generation(self.resolution);
        self.cells.iter().map(|c| c.1 * w).sum()
    }

    /// `∫ f_j f_k dμ`, evaluated on the finer of the two partitions.
    pub fn inner(&self, other: &FjFunction, mu: &PushforwardMeasure) -> f64 {
        let (fine, coarse) = if self.resolution >= other.resolution { (self, other) } else { (other, self) };
        let shift = fine.resolution - coarse.resolution;
        let w = mu.of_generation(fine.resolution);
        fine.cells
            .iter()
            .map(|(s, v)| v * coarse.value_at_cell([s[0] >> shift, s[1] >> shift]) * w)
            .sum()
    }
}

pub(crate) fn cell_of(x: [f64; 2], gen: u32) -> [i64; 2] {
    let n = (gen as f64).exp2();
    [(x[0] * n).floor() as i64, (x[1] * n).floor() as i64]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FjFamily {
    pub dim: usize,
    pub stride: u32,
    pub horizon: u32,
    pub measure: PushforwardMeasure,
    /// `f_h, f_{h+1}, …` up to the last level with computed children.
    pub functions: Vec<FjFunction>,
    /// Live shadows per computed level.
    pub live: Vec<Vec<[i64; 2]>>,
}

impl FjFamily {
    pub fn get(&self, j: u32) -> Option<&FjFunction> {
        j.checked_sub(self.horizon).and_then(|i| self.functions.get(i as usize))
    }

    /// First level `≥ h` at which the point is absorbed into some `T_i`;
    /// `None` if it stays live through every computed level.
    pub fn absorbed_at(&self, x: [f64; 2]) -> Option<u32> {
        (self.horizon..self.live.len() as u32).find(|&l| {
            let s = cell_of(x, l * self.stride);
            self.live[l as usize].binary_search(&s).is_err()
        })
    }
}

/// `f_j = Σ_Q f_Q` over the cubes `Q` of level `j`, with
/// `f_Q = μ(Q)/μ(G(Q))·χ_G(Q) - χ_Q` for live cubes and zero otherwise.
pub fn build_fj(report: &CascadeReport) -> FjFamily {
    let stride = report.key_lemma.stride;
    let horizon = report.params.horizon;
    let measure = PushforwardMeasure { dim: report.dim, root_side: report.root_side };
    let live: Vec<Vec<[i64; 2]>> = report
        .nodes
        .iter()
        .map(|v| v.iter().filter(|n| n.live).map(|n| n.freq.shadow).collect())
        .collect();
    let mut functions = Vec::new();
    for j in horizon..report.nodes.len().saturating_sub(1) as u32 {
        let mut cells = Vec::new();
        let mut empty = 0;
        for n in report.nodes[j as usize].iter().filter(|n| n.live) {
            let Some(g) = super::good_set(report, j, n.freq.shadow) else { continue };
            if g.good.is_empty() {
                empty += 1;
                continue;
            }
            let ratio = g.children as f64 / g.good.len() as f64;
            for c in report.nodes[j as usize + 1].iter().filter(|c| c.parent == Some(n.freq.shadow)) {
                let v = if g.good.contains(&c.freq.shadow) { ratio - 1.0 } else { -1.0 };
                cells.push((c.freq.shadow, v));
            }
        }
        cells.sort_by(|a, b| a.0.cmp(&b.0));
        functions.push(FjFunction { j, resolution: (j + 1) * stride, cells, empty_good_sets: empty });
    }
    FjFamily { dim: report.dim, stride, horizon, measure, functions, live }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_is_additive() {
        let mu = PushforwardMeasure { dim: 3, root_side: 0.75 };
        for g in 0..8 {
            let n = 1u64 << (2 * g);
            assert_eq!(mu.of_generation(g) * n as f64, mu.total());
            assert_eq!(mu.units(g, 8) * n as i128, mu.units(0, 8));
        }
    }

    #[test]
    fn hand_built_functions_are_orthogonal() {
        let mu = PushforwardMeasure { dim: 2, root_side: 1.0 };
        // f_0 on generation 1: good child 0 of two.
        let f0 = FjFunction { j: 0, resolution: 1, cells: vec![([0, 0], 1.0), ([1, 0], -1.0)], empty_good_sets: 0 };
        // f_1 on generation 2 inside cell 0 only: good set 1 of 2.
        let f1 = FjFunction { j: 1, resolution: 2, cells: vec![([0, 0], -1.0), ([1, 0], 1.0)], empty_good_sets: 0 };
        assert_eq!(f0.integral(&mu), 0.0);
        assert_eq!(f1.integral(&mu), 0.0);
        assert_eq!(f0.inner(&f1, &mu), 0.0);
        assert_eq!(f0.inner(&f0, &mu), 1.0);
        assert_eq!(f1.value_at([0.3, 0.0]), 1.0);
        assert_eq!(f1.value_at([0.9, 0.0]), 0.0);
    }

    #[test]
    fn cascade_functions_have_zero_mean_and_are_orthogonal() {
        use crate::cascade::{run_cascade, CascadeParams};
        use crate::fields::CatalogField;
        use crate::geometry::{GraphDomain, LipschitzGraph};
        use crate::whitney::Ball;

        let d = GraphDomain::at_origin(LipschitzGraph::flat(2).unwrap(), 1.0).unwrap().with_extent(64.0);
        let u = CatalogField::named(2, "odd-harmonic-8").unwrap();
        let p = CascadeParams { k: Some(3), levels: 7, ..Default::default() };
        let rep = run_cascade(&u, &d, &Ball { center: [0.0; 3], radius: 1.0 / 64.0 }, &p).unwrap();
        let fam = build_fj(&rep);
        assert_eq!(fam.functions.len(), 7);
        assert!(fam.functions.iter().any(|f| !f.cells.is_empty()));
        let mu = &fam.measure;
        let total = mu.total();
        for (i, f) in fam.functions.iter().enumerate() {
            assert!(f.integral(mu).abs() / total < 1e-12);
            for g in &fam.functions[i + 1..] {
                assert!(f.inner(g, mu).abs() / total < 1e-10);
            }
        }
    }

    #[test]
    fn below_threshold_field_gives_zero_functions() {
        use crate::cascade::{run_cascade, CascadeParams};
        use crate::fields::CatalogField;
        use crate::geometry::{GraphDomain, LipschitzGraph};
        use crate::whitney::Ball;

        let d = GraphDomain::at_origin(LipschitzGraph::flat(2).unwrap(), 1.0).unwrap().with_extent(16.0);
        let u = CatalogField::named(2, "linear").unwrap();
        let p = CascadeParams { k: Some(1), levels: 3, horizon: 2, ..Default::default() };
        let rep = run_cascade(&u, &d, &Ball { center: [0.0; 3], radius: 1.0 / 64.0 }, &p).unwrap();
        let fam = build_fj(&rep);
        assert!(fam.functions.iter().all(|f| f.cells.is_empty()));
        assert_eq!(fam.absorbed_at([0.5, 0.0]), Some(2));
    }
}
