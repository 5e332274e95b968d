use serde::{Deserialize, Serialize};

use crate::point::Point;

/// A dyadic cube: generation `k` and integer lattice coordinates.
///
/// The side is `2^{-k}·ℓ_base`; along axis `i` the cube is the half-open-closed
/// interval `(o_i + c_i ℓ, o_i + (c_i + 1) ℓ]`. In 2D `c[1]` is always 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub k: i32,
    pub c: [i64; 3],
}

/// The dyadic lattice: base side, offset and dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub dim: usize,
    pub base: f64,
    pub offset: Point,
}

impl DyadicCube {
    pub fn axes(dim: usize) -> &'static [usize] {
        if dim == 2 {
            &[0, 2]
        } else {
            &[0, 1, 2]
        }
    }

    pub fn parent(&self) -> DyadicCube {
        DyadicCube { k: self.k - 1, c: [self.c[0].div_euclid(2), self.c[1].div_euclid(2), self.c[2].div_euclid(2)] }
    }

    pub fn children(&self, dim: usize) -> Vec<DyadicCube> {
        let mut out = Vec::with_capacity(1 << dim);
        let ys: &[i64] = if dim == 3 { &[0, 1] } else { &[0] };
        for &dx in &[0i64, 1] {
            for &dy in ys {
                for &dz in &[0i64, 1] {
                    out.push(DyadicCube {
                        k: self.k + 1,
                        c: [2 * self.c[0] + dx, 2 * self.c[1] + dy, 2 * self.c[2] + dz],
                    });
                }
            }
        }
        out
    }

    /// Ancestor at generation `k ≤ self.k`.
    pub fn ancestor(&self, k: i32) -> DyadicCube {
        let s = self.k - k;
        debug_assert!(s >= 0);
        DyadicCube { k, c: [self.c[0] >> s, self.c[1] >> s, self.c[2] >> s] }
    }

    pub fn is_ancestor_of(&self, other: &DyadicCube) -> bool {
        other.k > self.k && other.ancestor(self.k) == *self
    }

    /// Side in fine integer units of generation `fine` (`fine ≥ k`).
    pub fn side_units(&self, fine: i32) -> i64 {
        1i64 << (fine - self.k)
    }

    /// Lower corner in fine integer units.
    pub fn lo_units(&self, fine: i32) -> [i64; 3] {
        let s = self.side_units(fine);
        [self.c[0] * s, self.c[1] * s, self.c[2] * s]
    }
}

impl Lattice {
    pub fn side(&self, q: &DyadicCube) -> f64 {
        self.base * (-q.k as f64).exp2()
    }

    pub fn lo(&self, q: &DyadicCube) -> Point {
        let l = self.side(q);
        let mut p = [0.0; 3];
        for &i in DyadicCube::axes(self.dim) {
            p[i] = self.offset[i] + q.c[i] as f64 * l;
        }
        p
    }

    pub fn center(&self, q: &DyadicCube) -> Point {
        let l = self.side(q);
        let mut p = self.lo(q);
        for &i in DyadicCube::axes(self.dim) {
            p[i] += 0.5 * l;
        }
        p
    }

    pub fn diameter(&self, q: &DyadicCube) -> f64 {
        self.side(q) * (self.dim as f64).sqrt()
    }

    /// Cube of generation `k` containing `p` (half-open-closed convention).
    pub fn cube_at(&self, p: &Point, k: i32) -> DyadicCube {
        let l = self.base * (-k as f64).exp2();
        let mut c = [0i64; 3];
        for &i in DyadicCube::axes(self.dim) {
            let t = (p[i] - self.offset[i]) / l;
            c[i] = t.ceil() as i64 - 1;
        }
        DyadicCube { k, c }
    }

    /// `(lo, hi)` of the cube dilated by `factor` about its centre.
    pub fn dilated(&self, q: &DyadicCube, factor: f64) -> (Point, Point) {
        let c = self.center(q);
        let h = 0.5 * factor * self.side(q);
        let mut lo = c;
        let mut hi = c;
        for &i in DyadicCube::axes(self.dim) {
            lo[i] -= h;
            hi[i] += h;
        }
        (lo, hi)
    }

    /// Cylinder `C(Q) = Π^{-1}(Π(Q))` membership.
    pub fn in_cylinder(&self, q: &DyadicCube, p: &Point) -> bool {
        let lo = self.lo(q);
        let l = self.side(q);
        DyadicCube::axes(self.dim)
            .iter()
            .filter(|&&i| i != 2)
            .all(|&i| p[i] > lo[i] && p[i] <= lo[i] + l)
    }

    pub fn contains(&self, q: &DyadicCube, p: &Point) -> bool {
        let lo = self.lo(q);
        let l = self.side(q);
        DyadicCube::axes(self.dim).iter().all(|&i| p[i] > lo[i] && p[i] <= lo[i] + l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn children_tile_parent() {
        for dim in [2, 3] {
            let q = DyadicCube { k: 3, c: [-5, if dim == 3 { 2 } else { 0 }, 7] };
            let ch = q.children(dim);
            assert_eq!(ch.len(), 1 << dim);
            let fine = 10;
            let vol: i64 = ch.iter().map(|c| c.side_units(fine).pow(dim as u32)).sum();
            assert_eq!(vol, q.side_units(fine).pow(dim as u32));
            assert!(ch.iter().all(|c| c.parent() == q && q.is_ancestor_of(c)));
        }
    }

    #[test]
    fn side_is_exact_power_of_two() {
        let l = Lattice { dim: 2, base: 3.0, offset: [0.0; 3] };
        for k in 0..30 {
            let q = DyadicCube { k, c: [0; 3] };
            assert_eq!(l.side(&q), 3.0 / (1u64 << k) as f64);
        }
    }

    #[test]
    fn cylinder_membership() {
        let l = Lattice { dim: 2, base: 1.0, offset: [0.1, 0.0, 0.2] };
        let q = DyadicCube { k: 2, c: [1, 0, 3] };
        let c = l.center(&q);
        assert!(l.contains(&q, &c) && l.in_cylinder(&q, &c));
        for t in [-100.0, -1.0, 0.0, 5.0, 1e6] {
            assert!(l.in_cylinder(&q, &[c[0], 0.0, c[2] + t]));
        }
        let other = DyadicCube { k: 2, c: [3, 0, 3] };
        assert!(!l.in_cylinder(&q, &l.center(&other)));
    }

    #[test]
    fn locate_round_trip() {
        let l = Lattice { dim: 3, base: 2.0, offset: [1.0 / 3.0, 0.0, -0.25] };
        let q = DyadicCube { k: 4, c: [-3, 5, 9] };
        assert_eq!(l.cube_at(&l.center(&q), 4), q);
    }
}
