//! Spread of count distributions in a corpus versus a subset.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts per key in the full corpus and in a subset, with their spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    /// Keys ordered by full-corpus count, largest first, ties by key.
    pub keys: Vec<String>,
    pub full: Vec<u64>,
    pub subset: Vec<u64>,
    pub std_full: f64,
    pub std_subset: f64,
    /// `std / mean`; zero when every count is zero.
    pub normalized_std_full: f64,
    pub normalized_std_subset: f64,
}

impl DistributionReport {
    /// True when the subset is relatively more even than the corpus.
    pub fn rebalanced(&self) -> bool {
        self.normalized_std_subset < self.normalized_std_full
    }

    /// The `k` most frequent keys with their full and subset counts.
    pub fn top(&self, k: usize) -> Vec<(&str, u64, u64)> {
        self.keys
            .iter()
            .zip(&self.full)
            .zip(&self.subset)
            .take(k)
            .map(|((key, &f), &s)| (key.as_str(), f, s))
            .collect()
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation.
pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mu = mean(values);
    (values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64).sqrt()
}

fn spread(counts: &[u64]) -> (f64, f64) {
    let v: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let mu = mean(&v);
    let sd = population_std(&v);
    (sd, if mu > 0.0 { sd / mu } else { 0.0 })
}

/// Like [`distribution_stats`] but accepts maps whose counts are all zero.
pub(crate) fn distribution_stats_lenient(
    full: &BTreeMap<String, u64>,
    subset: &BTreeMap<String, u64>,
) -> DistributionReport {
    let mut keys: Vec<String> = full.keys().chain(subset.keys()).cloned().collect();
    keys.sort();
    keys.dedup();
    let get = |m: &BTreeMap<String, u64>, k: &String| m.get(k).copied().unwrap_or(0);
    keys.sort_by(|a, b| get(full, b).cmp(&get(full, a)).then_with(|| a.cmp(b)));
    let f: Vec<u64> = keys.iter().map(|k| get(full, k)).collect();
    let s: Vec<u64> = keys.iter().map(|k| get(subset, k)).collect();
    let (std_full, normalized_std_full) = spread(&f);
    let (std_subset, normalized_std_subset) = spread(&s);
    DistributionReport {
        keys,
        full: f,
        subset: s,
        std_full,
        std_subset,
        normalized_std_full,
        normalized_std_subset,
    }
}

/// Compares two count maps over the union of their keys, missing keys
/// counting as zero.
pub fn distribution_stats(
    full: &BTreeMap<String, u64>,
    subset: &BTreeMap<String, u64>,
) -> Result<DistributionReport> {
    for (name, m) in [("full", full), ("subset", subset)] {
        if m.values().all(|&c| c == 0) {
            return Err(Error::invalid(format!("{name} counts are all zero")));
        }
    }
    Ok(distribution_stats_lenient(full, subset))
}
