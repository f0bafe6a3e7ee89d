use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

/// Fraction of points carrying the majority gold label of their cluster.
pub fn cluster_purity<L: Ord + Clone>(
    assignments: &BTreeMap<String, usize>,
    gold: &BTreeMap<String, L>,
) -> Result<f64> {
    if assignments.is_empty() {
        return Err(Error::invalid("no points to score"));
    }
    if assignments.len() != gold.len() || assignments.keys().any(|id| !gold.contains_key(id)) {
        let missing: Vec<&String> = assignments
            .keys()
            .filter(|id| !gold.contains_key(*id))
            .chain(gold.keys().filter(|id| !assignments.contains_key(*id)))
            .take(5)
            .collect();
        return Err(Error::invalid(format!(
            "assignment and gold ids differ, e.g. {missing:?}"
        )));
    }
    let mut table: HashMap<usize, BTreeMap<L, usize>> = HashMap::new();
    for (id, &k) in assignments {
        *table
            .entry(k)
            .or_default()
            .entry(gold[id].clone())
            .or_default() += 1;
    }
    let majority: usize = table
        .values()
        .map(|c| c.values().copied().max().unwrap_or(0))
        .sum();
    Ok(majority as f64 / assignments.len() as f64)
}
