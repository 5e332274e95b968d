//! One-dimensional quadrature and root bracketing.
//!
//! Everything the sphere, ball and boundary integrators need is built on a
//! globally adaptive Gauss–Kronrod (7, 15) rule with vector-valued integrands,
//! so several moments of one integrand share node evaluations.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Relative/absolute stopping rule for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Tolerance { rel, abs: 0.0, max_intervals: 400 }
    }

    /// Tolerance for an integral nested inside another adaptive integral.
    pub fn inner(&self) -> Self {
        Tolerance { rel: self.rel * 0.05, abs: self.abs * 0.05, max_intervals: self.max_intervals }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integral<const M: usize> {
    pub value: [f64; M],
    /// Integral of the componentwise absolute value (Kronrod estimate).
    pub l1: [f64; M],
    pub error: [f64; M],
    pub converged: bool,
    pub evaluations: usize,
}

impl<const M: usize> Integral<M> {
    pub fn zero() -> Self {
        Integral { value: [0.0; M], l1: [0.0; M], error: [0.0; M], converged: true, evaluations: 0 }
    }

    pub fn accumulate(&mut self, other: &Integral<M>) {
        for i in 0..M {
            self.value[i] += other.value[i];
            self.l1[i] += other.l1[i];
            self.error[i] += other.error[i];
        }
        self.converged &= other.converged;
        self.evaluations += other.evaluations;
    }
}

struct Piece<const M: usize> {
    a: f64,
    b: f64,
    value: [f64; M],
    l1: [f64; M],
    error: [f64; M],
}

fn gk15<const M: usize, F: FnMut(f64) -> [f64; M]>(f: &mut F, a: f64, b: f64) -> Piece<M> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = [0.0; M];
    let mut gauss = [0.0; M];
    let mut l1 = [0.0; M];
    let fc = f(c);
    for i in 0..M {
        kron[i] = WGK[7] * fc[i];
        gauss[i] = WG[3] * fc[i];
        l1[i] = WGK[7] * fc[i].abs();
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for i in 0..M {
            kron[i] += WGK[j] * (f1[i] + f2[i]);
            l1[i] += WGK[j] * (f1[i].abs() + f2[i].abs());
            if j % 2 == 1 {
                gauss[i] += WG[j / 2] * (f1[i] + f2[i]);
            }
        }
    }
    let mut error = [0.0; M];
    for i in 0..M {
        kron[i] *= h;
        gauss[i] *= h;
        l1[i] *= h.abs();
        error[i] = (kron[i] - gauss[i]).abs();
    }
    Piece { a, b, value: kron, l1, error }
}

/// Globally adaptive integral of a vector-valued function over `[a, b]`,
/// pre-split at `breaks` (which must lie inside and be increasing).
///
/// Stops when every component satisfies `err ≤ max(abs, rel·∫|f|)`.
pub fn integrate_with_breaks<const M: usize, F>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Integral<M>
where
    F: FnMut(f64) -> [f64; M],
{
    adaptive_panels(f, a, b, breaks, tol).0
}

/// Same as [`integrate_with_breaks`], also returning the final panels in
/// increasing order.
pub fn adaptive_panels<const M: usize, F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> (Integral<M>, Vec<(f64, f64)>)
where
    F: FnMut(f64) -> [f64; M],
{
    if !(b > a) {
        return (Integral::zero(), Vec::new());
    }
    let mut pieces: Vec<Piece<M>> = Vec::new();
    let mut last = a;
    for &p in breaks.iter().filter(|&&p| p > a && p < b) {
        if p > last {
            pieces.push(gk15(&mut f, last, p));
            last = p;
        }
    }
    pieces.push(gk15(&mut f, last, b));
    let mut evaluations = 15 * pieces.len();

    loop {
        let mut total = [0.0; M];
        let mut l1 = [0.0; M];
        let mut err = [0.0; M];
        for p in &pieces {
            for i in 0..M {
                total[i] += p.value[i];
                l1[i] += p.l1[i];
                err[i] += p.error[i];
            }
        }
        let limits: Vec<f64> = (0..M).map(|i| tol.abs.max(tol.rel * l1[i])).collect();
        let done = (0..M).all(|i| err[i] <= limits[i]);
        if done || pieces.len() >= tol.max_intervals {
            let panels = pieces.iter().map(|p| (p.a, p.b)).collect();
            return (Integral { value: total, l1, error: err, converged: done, evaluations }, panels);
        }
        // Split the piece contributing the largest normalised error.
        let mut worst = 0;
        let mut worst_score = -1.0;
        for (k, p) in pieces.iter().enumerate() {
            let score = (0..M)
                .map(|i| if limits[i] > 0.0 { p.error[i] / limits[i] } else { p.error[i] * 1e300 })
                .fold(0.0, f64::max);
            if score > worst_score {
                worst_score = score;
                worst = k;
            }
        }
        let p = pieces.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            // Interval at floating-point resolution; accept what we have.
            pieces.push(p);
            let mut out = Integral::<M>::zero();
            for q in &pieces {
                for i in 0..M {
                    out.value[i] += q.value[i];
                    out.l1[i] += q.l1[i];
                    out.error[i] += q.error[i];
                }
            }
            out.converged = false;
            out.evaluations = evaluations;
            pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
            let panels = pieces.iter().map(|p| (p.a, p.b)).collect();
            return (out, panels);
        }
        pieces.push(gk15(&mut f, p.a, mid));
        pieces.push(gk15(&mut f, mid, p.b));
        evaluations += 30;
        // Keep summation order independent of the split history.
        pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
    }
}

pub fn integrate<const M: usize, F>(f: F, a: f64, b: f64, tol: Tolerance) -> Integral<M>
where
    F: FnMut(f64) -> [f64; M],
{
    integrate_with_breaks(f, a, b, &[], tol)
}

/// Scalar convenience wrapper.
pub fn integrate_scalar<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> f64 {
    integrate(|t| [f(t)], a, b, tol).value[0]
}

/// The 15 Kronrod nodes and weights mapped to `[a, b]`.
pub fn kronrod_on(a: f64, b: f64) -> ([f64; 15], [f64; 15]) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [c; 15];
    let mut w = [WGK[7] * h; 15];
    for j in 0..7 {
        x[j] = c - h * XGK[j];
        w[j] = WGK[j] * h;
        x[14 - j] = c + h * XGK[j];
        w[14 - j] = WGK[j] * h;
    }
    (x, w)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / dp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    (x.iter().map(|t| c + h * t).collect(), w.iter().map(|v| v * h).collect())
}

/// Bisection on a bracket with `f(a)` and `f(b)` of opposite sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        if (b - a).abs() <= xtol {
            break;
        }
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Sign changes of `f` over `[a, b]` located by sampling at `samples`
/// interior points (plus the ends) and refined by bisection.
pub fn sign_changes<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, samples: usize, xtol: f64) -> Vec<f64> {
    let n = samples.max(2);
    let mut roots = Vec::new();
    let mut t_prev = a;
    let mut f_prev = f(a);
    for i in 1..=n {
        let t = a + (b - a) * i as f64 / n as f64;
        let ft = f(t);
        if f_prev == 0.0 && i == 1 {
            roots.push(t_prev);
        }
        if ft == 0.0 {
            roots.push(t);
        } else if f_prev != 0.0 && (ft > 0.0) != (f_prev > 0.0) {
            roots.push(bisect(&mut f, t_prev, t, xtol));
        }
        t_prev = t;
        f_prev = ft;
    }
    roots
}
