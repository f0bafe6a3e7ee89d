//! Two-sample Kolmogorov–Smirnov test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Above this pooled size the p-value falls back to the asymptotic series.
pub const EXACT_LIMIT: usize = 20;
/// Rejection thresholds: a comparison is flagged when `p <= REJECT_P` or
/// `stat >= REJECT_STAT`.
pub const REJECT_P: f64 = 0.05;
pub const REJECT_STAT: f64 = 0.4;

const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KsMethod {
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub stat: f64,
    pub p_value: f64,
    pub n: usize,
    pub m: usize,
    pub method: KsMethod,
}

impl KsResult {
    pub fn rejects(&self) -> bool {
        self.p_value <= REJECT_P || self.stat >= REJECT_STAT
    }
}

fn sorted(sample: &[f64], which: &str) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::invalid(format!("{which} sample is empty")));
    }
    if sample.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid(format!("{which} sample contains NaN")));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// `sup_x |F1(x) - F2(x)|`, evaluated after every distinct pooled value so
/// ties move both ECDFs together.
pub fn ks_stat(sample1: &[f64], sample2: &[f64]) -> Result<f64> {
    let a = sorted(sample1, "first")?;
    let b = sorted(sample2, "second")?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    // once one sample is exhausted the gap only shrinks towards zero
    Ok(d)
}

/// Exact tail probability `P(D >= stat)` over all `C(n+m, n)` equally likely
/// interleavings, counted as lattice paths that stay strictly inside the band.
fn exact_pvalue(stat: f64, n: usize, m: usize) -> f64 {
    let limit = (stat - TIE_TOL) * (n * m) as f64;
    let inside = |i: usize, j: usize| ((i * m) as f64 - (j * n) as f64).abs() < limit;
    let mut row = vec![0.0f64; m + 1];
    for i in 0..=n {
        for j in 0..=m {
            row[j] = if !inside(i, j) {
                0.0
            } else if i == 0 && j == 0 {
                1.0
            } else {
                let up = if i > 0 { row[j] } else { 0.0 };
                let left = if j > 0 { row[j - 1] } else { 0.0 };
                up + left
            };
        }
    }
    let total = binomial(n + m, n);
    (1.0 - row[m] / total).clamp(0.0, 1.0)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Kolmogorov survival function `Q(λ) = 2 Σ (-1)^(k-1) exp(-2 k² λ²)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut prev = 0.0f64;
    for k in 1..=100 {
        let term = sign * 2.0 * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() <= 1e-10 * prev.abs() || term.abs() <= 1e-16 * sum.abs() {
            return sum.clamp(0.0, 1.0);
        }
        sign = -sign;
        prev = term;
    }
    // the alternating series did not settle, which only happens for tiny λ
    1.0
}

pub fn ks_method(n: usize, m: usize) -> KsMethod {
    if n + m <= EXACT_LIMIT {
        KsMethod::Exact
    } else {
        KsMethod::Asymptotic
    }
}

/// Probability of observing a statistic at least `stat` under the null for
/// sample sizes `n` and `m`.
pub fn ks_pvalue(stat: f64, n: usize, m: usize) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("sample sizes must be positive"));
    }
    if stat <= 0.0 {
        return Ok(1.0);
    }
    Ok(match ks_method(n, m) {
        KsMethod::Exact => exact_pvalue(stat, n, m),
        KsMethod::Asymptotic => {
            let ne = (n * m) as f64 / (n + m) as f64;
            let s = ne.sqrt();
            kolmogorov_q((s + 0.12 + 0.11 / s) * stat)
        }
    })
}

pub fn ks_test(sample1: &[f64], sample2: &[f64]) -> Result<KsResult> {
    let stat = ks_stat(sample1, sample2)?;
    let (n, m) = (sample1.len(), sample2.len());
    Ok(KsResult {
        stat,
        p_value: ks_pvalue(stat, n, m)?,
        n,
        m,
        method: ks_method(n, m),
    })
}
