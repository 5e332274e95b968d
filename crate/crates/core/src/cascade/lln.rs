use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::fj::FjFamily;

/// Random variables fed to the harness.
#[derive(Debug, Clone, Copy)]
pub enum LlnSpec<'a> {
    /// i.i.d. uniform on `[0,1]`.
    Uniform,
    /// `X_j = f_{h+j} + 1` at one point drawn from `μ/μ(R_Σ0)`.
    Cascade(&'a FjFamily),
}

/// Numerical check of the hypotheses: bounded means, non-positive
/// covariances and a summable variance series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtemadiConditions {
    pub sup_mean: f64,
    pub max_covariance: f64,
    pub variance_series: f64,
    pub hold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlnReport {
    pub m_max: u64,
    /// Start of the tail window `[m0, m_max]`.
    pub m0: u64,
    /// `(m, (S_m - E S_m)/m)` at 1-2-5 checkpoints and at `m_max`.
    pub checkpoints: Vec<(u64, f64)>,
    pub final_value: f64,
    /// `sup_{m0 ≤ m ≤ m_max} |S_m - E S_m| / m`.
    pub tail_sup: f64,
    /// For cascade paths that stay live past the computed levels, the last
    /// `m` with a known value.
    pub truncated_at: Option<u64>,
    pub sample: Option<[f64; 2]>,
    pub conditions: EtemadiConditions,
}

fn is_checkpoint(m: u64) -> bool {
    let mut p = 1u64;
    while p <= m {
        if m == p || m == 2 * p || m == 5 * p {
            return true;
        }
        p *= 10;
    }
    false
}

fn conditions(family: &FjFamily) -> EtemadiConditions {
    let mu = &family.measure;
    let total = mu.total();
    let means: Vec<f64> = family.functions.iter().map(|f| f.integral(mu) / total).collect();
    let sup_mean = means.iter().map(|m| 1.0 + m).fold(1.0, f64::max);
    let mut max_cov: f64 = 0.0;
    let mut series = 0.0;
    for (i, fi) in family.functions.iter().enumerate() {
        let var = fi.inner(fi, mu) / total - means[i] * means[i];
        series += var / ((i + 1) as f64).powi(2);
        for (k, fk) in family.functions.iter().enumerate().skip(i + 1) {
            let cov = fi.inner(fk, mu) / total - means[i] * means[k];
            max_cov = max_cov.max(cov);
        }
    }
    EtemadiConditions {
        sup_mean,
        max_covariance: max_cov,
        variance_series: series,
        hold: sup_mean.is_finite() && max_cov <= 1e-10 && series.is_finite(),
    }
}

/// One sample path of `(S_m - E S_m)/m`, `m = 1..=m_max`.
pub fn lln_harness(spec: &LlnSpec, m_max: u64, seed: u64) -> LlnReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m0 = (m_max / 10).max(1);
    let mut checkpoints = Vec::new();
    let mut tail_sup: f64 = 0.0;
    let mut sum = 0.0;
    let mut last = 0.0;
    let mut truncated_at = None;
    let mut sample = None;
    let cond;
    match spec {
        LlnSpec::Uniform => {
            cond = EtemadiConditions {
                sup_mean: 0.5,
                max_covariance: 0.0,
                variance_series: std::f64::consts::PI.powi(2) / 72.0,
                hold: true,
            };
            for m in 1..=m_max {
                sum += rng.gen::<f64>() - 0.5;
                last = sum / m as f64;
                if m >= m0 {
                    tail_sup = tail_sup.max(last.abs());
                }
                if is_checkpoint(m) || m == m_max {
                    checkpoints.push((m, last));
                }
            }
        }
        LlnSpec::Cascade(family) => {
            cond = conditions(family);
            let x = [rng.gen::<f64>(), if family.dim == 3 { rng.gen::<f64>() } else { 0.0 }];
            sample = Some(x);
            let absorbed = family.absorbed_at(x);
            for m in 1..=m_max {
                let j = family.horizon as u64 + m;
                let f = match (family.get(j as u32).filter(|_| j <= u32::MAX as u64), absorbed) {
                    (_, Some(a)) if j >= a as u64 => 0.0,
                    (Some(fj), _) => fj.value_at(x),
                    (None, _) => {
                        truncated_at = Some(m - 1);
                        break;
                    }
                };
                sum += f;
                last = sum / m as f64;
                if m >= m0 {
                    tail_sup = tail_sup.max(last.abs());
                }
                if is_checkpoint(m) || m == m_max {
                    checkpoints.push((m, last));
                }
            }
        }
    }
    LlnReport { m_max, m0, checkpoints, final_value: last, tail_sup, truncated_at, sample, conditions: cond }
}
