//! Topic clusters over document embeddings.
//!
//! Spherical k-means stands in for a learned topic model; externally computed
//! assignments can be imported instead. The module also carries the
//! document/word mutual-information diagnostic.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Corpus;
use crate::embedding::{norm64, EmbeddingMatrix};
use crate::error::{Error, Result};

/// A partition of document ids into `t` non-empty clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicClustering {
    assignments: BTreeMap<String, usize>,
    t: usize,
    sizes: Vec<usize>,
    importances: Vec<f64>,
    /// Unit centroids, one per cluster. Empty for imported clusterings until
    /// [`TopicClustering::with_centroids`] is called.
    centroids: Vec<Vec<f32>>,
}

impl TopicClustering {
    pub fn from_assignments(assignments: BTreeMap<String, usize>, t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidClustering("t must be at least 1".into()));
        }
        let mut sizes = vec![0usize; t];
        for (id, &k) in &assignments {
            if k >= t {
                return Err(Error::InvalidClustering(format!(
                    "{id} assigned to cluster {k} but t = {t}"
                )));
            }
            sizes[k] += 1;
        }
        let empty: Vec<usize> = (0..t).filter(|&k| sizes[k] == 0).collect();
        if !empty.is_empty() {
            return Err(Error::InvalidClustering(format!(
                "empty clusters {empty:?}"
            )));
        }
        let n = assignments.len() as f64;
        let importances = sizes.iter().map(|&s| s as f64 / n).collect();
        Ok(Self {
            assignments,
            t,
            sizes,
            importances,
            centroids: Vec::new(),
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn assignments(&self) -> &BTreeMap<String, usize> {
        &self.assignments
    }

    pub fn cluster_of(&self, id: &str) -> Option<usize> {
        self.assignments.get(id).copied()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// `|C_i| / Σ_j |C_j|` for every cluster.
    pub fn importances(&self) -> &[f64] {
        &self.importances
    }

    pub fn centroids(&self) -> &[Vec<f32>] {
        &self.centroids
    }

    /// Member ids per cluster, each list sorted.
    pub fn members(&self) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new(); self.t];
        for (id, &k) in &self.assignments {
            out[k].push(id.as_str());
        }
        out
    }

    /// Recomputes unit centroids from the given embeddings.
    pub fn with_centroids(mut self, m: &EmbeddingMatrix) -> Result<Self> {
        let mut sums = vec![vec![0f64; m.dims()]; self.t];
        let mut missing = Vec::new();
        for (id, &k) in &self.assignments {
            match m.get(id) {
                Some(row) => add_into(&mut sums[k], row),
                None => missing.push(id.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::MissingEmbedding(missing));
        }
        self.centroids = sums.iter().map(|s| unit_f32(s)).collect();
        Ok(self)
    }

    /// Stable digest of the assignment map.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.t.to_le_bytes());
        for (id, k) in &self.assignments {
            h.update(id.as_bytes());
            h.update([0u8]);
            h.update(k.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Checks that exactly the corpus ids are assigned.
    pub fn check_covers(&self, corpus: &Corpus) -> Result<()> {
        let missing: Vec<&str> = corpus
            .ids()
            .filter(|id| !self.assignments.contains_key(*id))
            .collect();
        let unknown: Vec<&str> = self
            .assignments
            .keys()
            .map(String::as_str)
            .filter(|id| !corpus.contains(id))
            .collect();
        if missing.is_empty() && unknown.is_empty() {
            return Ok(());
        }
        Err(Error::InvalidClustering(format!(
            "missing ids {missing:?}, unknown ids {unknown:?}"
        )))
    }

    pub fn to_json(&self) -> ClusteringFile {
        ClusteringFile {
            t: self.t,
            assignments: self.assignments.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Clustering exchange format: `{"t": int, "assignments": {id: idx}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusteringFile {
    pub t: usize,
    pub assignments: BTreeMap<String, usize>,
}

/// Loads externally computed assignments and validates them against the corpus.
pub fn import_clustering(path: &Path, corpus: &Corpus) -> Result<TopicClustering> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ClusteringFile = serde_json::from_str(&text)?;
    let clustering = TopicClustering::from_assignments(file.assignments, file.t)?;
    clustering.check_covers(corpus)?;
    Ok(clustering)
}

/// Cluster count used when none is given: `max(2, round(sqrt(n / 2)))`,
/// never more than `n`.
pub fn default_cluster_count(n: usize) -> usize {
    let t = ((n as f64 / 2.0).sqrt().round() as usize).max(2);
    t.min(n.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub t: usize,
    pub seed: u64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub clustering: TopicClustering,
    /// Mean cosine of points to their own centroid after each update.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Spherical k-means over unit rows with cosine k-means++ seeding.
///
/// Assignment runs in parallel over points; centroid sums are reduced in row
/// order so the fit depends only on the seed.
pub fn spherical_kmeans(m: &EmbeddingMatrix, cfg: &KMeansConfig) -> Result<KMeansFit> {
    let n = m.rows();
    let t = cfg.t;
    if t == 0 {
        return Err(Error::invalid("cluster count must be at least 1"));
    }
    if t > n {
        return Err(Error::invalid(format!(
            "cluster count {t} exceeds the {n} available points"
        )));
    }
    if !m.is_normalized() {
        return Err(Error::invalid("spherical k-means needs unit-norm rows"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centroids = seed_centroids(m, t, &mut rng);
    let mut assign: Vec<usize> = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iter.max(1) {
        iterations += 1;
        let next: Vec<usize> = (0..n)
            .into_par_iter()
            .map(|i| nearest(m.row(i), &centroids).0)
            .collect();
        if next == assign {
            converged = true;
            break;
        }
        assign = next;
        repair_empty(m, &mut assign, &centroids, t);
        centroids = update_centroids(m, &assign, &centroids);
        history.push(objective(m, &assign, &centroids));
    }

    let assignments = m
        .ids()
        .iter()
        .cloned()
        .zip(assign.iter().copied())
        .collect();
    let mut clustering = TopicClustering::from_assignments(assignments, t)?;
    clustering.centroids = centroids
        .iter()
        .map(|c| c.iter().map(|&v| v as f32).collect())
        .collect();
    Ok(KMeansFit {
        clustering,
        objective_history: history,
        iterations,
        converged,
    })
}

/// Convenience wrapper returning only the clustering.
pub fn fit_spherical_kmeans(
    m: &EmbeddingMatrix,
    t: usize,
    seed: u64,
    max_iter: usize,
) -> Result<TopicClustering> {
    spherical_kmeans(m, &KMeansConfig { t, seed, max_iter }).map(|f| f.clustering)
}

fn seed_centroids(m: &EmbeddingMatrix, t: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = m.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = (0..n)
        .map(|i| cos_distance(m.row(i), m.row(chosen[0])))
        .collect();
    while chosen.len() < t {
        let weights: Vec<f64> = dist.iter().map(|d| d * d).collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 && r < *w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            if weights[pick] == 0.0 {
                // floating slack at the tail
                pick = (0..n).rev().find(|&i| weights[i] > 0.0).unwrap();
            }
            pick
        } else {
            // every remaining point duplicates a centre
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(pick);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(cos_distance(m.row(i), m.row(pick)));
        }
    }
    chosen
        .iter()
        .map(|&i| m.row(i).iter().map(|&v| f64::from(v)).collect())
        .collect()
}

fn cos_distance(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    (1.0 - dot).max(0.0)
}

fn dot_f64(row: &[f32], c: &[f64]) -> f64 {
    row.iter().zip(c).map(|(&x, &y)| f64::from(x) * y).sum()
}

/// Index and cosine of the closest unit centroid; ties go to the lower index.
fn nearest(row: &[f32], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let s = dot_f64(row, c);
        if s > best.1 {
            best = (k, s);
        }
    }
    best
}

fn repair_empty(m: &EmbeddingMatrix, assign: &mut [usize], centroids: &[Vec<f64>], t: usize) {
    let mut sizes = vec![0usize; t];
    for &k in assign.iter() {
        sizes[k] += 1;
    }
    for empty in 0..t {
        if sizes[empty] > 0 {
            continue;
        }
        // steal the point farthest from its own centroid
        let victim = (0..assign.len())
            .filter(|&i| sizes[assign[i]] > 1)
            .min_by(|&a, &b| {
                let ca = dot_f64(m.row(a), &centroids[assign[a]]);
                let cb = dot_f64(m.row(b), &centroids[assign[b]]);
                ca.total_cmp(&cb).then(a.cmp(&b))
            })
            .expect("t <= n guarantees a donor cluster");
        sizes[assign[victim]] -= 1;
        assign[victim] = empty;
        sizes[empty] = 1;
    }
}

fn update_centroids(m: &EmbeddingMatrix, assign: &[usize], prev: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0f64; m.dims()]; prev.len()];
    for (i, &k) in assign.iter().enumerate() {
        add_into(&mut sums[k], m.row(i));
    }
    sums.into_iter()
        .zip(prev)
        .map(|(s, p)| {
            let n = norm64(&s);
            if n > 0.0 {
                s.iter().map(|v| v / n).collect()
            } else {
                p.clone()
            }
        })
        .collect()
}

fn objective(m: &EmbeddingMatrix, assign: &[usize], centroids: &[Vec<f64>]) -> f64 {
    let total: f64 = assign
        .iter()
        .enumerate()
        .map(|(i, &k)| dot_f64(m.row(i), &centroids[k]))
        .sum();
    total / assign.len() as f64
}

fn add_into(acc: &mut [f64], row: &[f32]) {
    for (a, &v) in acc.iter_mut().zip(row) {
        *a += f64::from(v);
    }
}

fn unit_f32(v: &[f64]) -> Vec<f32> {
    let n = norm64(v);
    if n == 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x / n) as f32).collect()
}

/// Joint document × word counts with cached marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceTable {
    counts: Vec<Vec<f64>>,
    row_sums: Vec<f64>,
    col_sums: Vec<f64>,
    total: f64,
}

impl CooccurrenceTable {
    pub fn from_counts(counts: Vec<Vec<f64>>) -> Result<Self> {
        let cols = counts.first().map(|r| r.len()).unwrap_or(0);
        let mut col_sums = vec![0.0; cols];
        let mut row_sums = Vec::with_capacity(counts.len());
        for row in &counts {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid(
                    "co-occurrence counts must be finite and >= 0",
                ));
            }
            row_sums.push(row.iter().sum());
            for (c, v) in col_sums.iter_mut().zip(row) {
                *c += v;
            }
        }
        let total = row_sums.iter().sum();
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            total,
        })
    }

    /// Bag-of-words counts over lowercased alphanumeric tokens; columns follow
    /// the sorted vocabulary.
    pub fn from_corpus(corpus: &Corpus) -> Result<Self> {
        let docs: Vec<BTreeMap<String, f64>> = corpus
            .documents()
            .iter()
            .map(|d| {
                let mut bag = BTreeMap::new();
                for tok in d
                    .text
                    .split(|c: char| !c.is_alphanumeric())
                    .filter(|s| !s.is_empty())
                {
                    *bag.entry(tok.to_lowercase()).or_insert(0.0) += 1.0;
                }
                bag
            })
            .collect();
        let vocab: Vec<&String> = docs
            .iter()
            .flat_map(|b| b.keys())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let col: BTreeMap<&String, usize> =
            vocab.iter().enumerate().map(|(i, w)| (*w, i)).collect();
        let counts = docs
            .iter()
            .map(|bag| {
                let mut row = vec![0.0; vocab.len()];
                for (w, c) in bag {
                    row[col[w]] = *c;
                }
                row
            })
            .collect();
        Self::from_counts(counts)
    }

    pub fn counts(&self) -> &[Vec<f64>] {
        &self.counts
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[f64] {
        &self.col_sums
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

/// Mutual information `I(D; W)` in nats. Empty cells contribute nothing.
pub fn compute_mi(tbl: &CooccurrenceTable) -> Result<f64> {
    if tbl.total <= 0.0 {
        return Err(Error::invalid("co-occurrence table has no mass"));
    }
    let n = tbl.total;
    let mut mi = 0.0;
    for (row, &rs) in tbl.counts.iter().zip(&tbl.row_sums) {
        for (&c, &cs) in row.iter().zip(&tbl.col_sums) {
            if c > 0.0 {
                mi += (c / n) * ((c * n) / (rs * cs)).ln();
            }
        }
    }
    // rounding can leave a tiny negative value for independent tables
    Ok(mi.max(0.0))
}

/// Ids present in `ids` but missing from the matrix.
pub(crate) fn missing_ids<'a>(
    ids: impl Iterator<Item = &'a str>,
    m: &EmbeddingMatrix,
) -> Vec<String> {
    let mut seen = HashSet::new();
    ids.filter(|id| m.position(id).is_none() && seen.insert(*id))
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(rows: &[Vec<f32>]) -> EmbeddingMatrix {
        let ids = (0..rows.len()).map(|i| format!("p{i:02}")).collect();
        EmbeddingMatrix::from_rows(ids, rows)
            .unwrap()
            .normalize_rows()
            .unwrap()
    }

    #[test]
    fn antipodal_groups_split_evenly() {
        let mut rows = vec![vec![1.0, 0.0]; 5];
        rows.extend(vec![vec![-1.0, 0.0]; 5]);
        let m = matrix(&rows);
        let c = fit_spherical_kmeans(&m, 2, 3, 50).unwrap();
        assert_eq!(c.sizes(), &[5, 5]);
        assert_eq!(c.importances(), &[0.5, 0.5]);
        let first = c.cluster_of("p00").unwrap();
        for i in 0..5 {
            assert_eq!(c.cluster_of(&format!("p{i:02}")), Some(first));
            assert_ne!(c.cluster_of(&format!("p{:02}", i + 5)), Some(first));
        }
    }

    #[test]
    fn single_cluster_centroid_is_normalized_mean() {
        let m = matrix(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        let c = fit_spherical_kmeans(&m, 1, 0, 10).unwrap();
        assert_eq!(c.sizes(), &[3]);
        let mut mean = [0f64; 2];
        for i in 0..3 {
            mean[0] += f64::from(m.row(i)[0]);
            mean[1] += f64::from(m.row(i)[1]);
        }
        let n = (mean[0] * mean[0] + mean[1] * mean[1]).sqrt();
        assert!((f64::from(c.centroids()[0][0]) - mean[0] / n).abs() < 1e-6);
        assert!((f64::from(c.centroids()[0][1]) - mean[1] / n).abs() < 1e-6);
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        let m = matrix(&[vec![1.0, 0.0]]);
        assert!(fit_spherical_kmeans(&m, 2, 0, 10).is_err());
    }

    #[test]
    fn duplicate_points_still_fill_every_cluster() {
        let m = matrix(&vec![vec![1.0, 0.0]; 4]);
        let c = fit_spherical_kmeans(&m, 3, 1, 10).unwrap();
        assert_eq!(c.sizes().iter().sum::<usize>(), 4);
        assert!(c.sizes().iter().all(|&s| s >= 1));
    }

    #[test]
    fn default_t_heuristic() {
        assert_eq!(default_cluster_count(1000), 22);
        assert_eq!(default_cluster_count(4), 2);
        assert_eq!(default_cluster_count(1), 1);
    }

    #[test]
    fn import_validates() {
        let docs = (0..4)
            .map(|i| crate::corpus::Document {
                id: format!("d{i}"),
                dataset: "ds".into(),
                topic: "t".into(),
                text: "x".into(),
                raw_label: "pro".into(),
                label: crate::corpus::StanceLabel::Positive,
            })
            .collect();
        let corpus = Corpus::new(docs).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();

        std::fs::write(
            f.path(),
            r#"{"t":2,"assignments":{"d0":0,"d1":0,"d2":0,"d3":1}}"#,
        )
        .unwrap();
        let c = import_clustering(f.path(), &corpus).unwrap();
        assert_eq!(c.importances(), &[0.75, 0.25]);

        std::fs::write(f.path(), r#"{"t":2,"assignments":{"d0":0,"d1":0,"d2":1}}"#).unwrap();
        let err = import_clustering(f.path(), &corpus).unwrap_err();
        assert!(err.to_string().contains("d3"));

        std::fs::write(
            f.path(),
            r#"{"t":3,"assignments":{"d0":0,"d1":0,"d2":0,"d3":1}}"#,
        )
        .unwrap();
        assert!(matches!(
            import_clustering(f.path(), &corpus),
            Err(Error::InvalidClustering(_))
        ));
    }

    #[test]
    fn mi_closed_forms() {
        let ind = CooccurrenceTable::from_counts(vec![vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        assert!(compute_mi(&ind).unwrap().abs() < 1e-12);
        let diag = CooccurrenceTable::from_counts(vec![vec![5.0, 0.0], vec![0.0, 5.0]]).unwrap();
        assert!((compute_mi(&diag).unwrap() - 2f64.ln()).abs() < 1e-12);
        let zero = CooccurrenceTable::from_counts(vec![vec![0.0, 0.0]]).unwrap();
        assert!(compute_mi(&zero).is_err());
    }

    /// Independent recomputation straight from joint/marginal probabilities.
    fn mi_oracle(counts: &[Vec<f64>]) -> f64 {
        let total: f64 = counts.iter().flatten().sum();
        let mut out = 0.0;
        for i in 0..counts.len() {
            for j in 0..counts[i].len() {
                let pdw = counts[i][j] / total;
                if pdw == 0.0 {
                    continue;
                }
                let mut pd = 0.0;
                for v in &counts[i] {
                    pd += v / total;
                }
                let mut pw = 0.0;
                for row in counts {
                    pw += row[j] / total;
                }
                out += pdw * (pdw / (pd * pw)).ln();
            }
        }
        out
    }

    #[test]
    fn mi_matches_loop_oracle_on_3x4() {
        let counts = vec![
            vec![3.0, 0.0, 7.0, 1.0],
            vec![2.0, 5.0, 0.0, 4.0],
            vec![9.0, 1.0, 1.0, 0.0],
        ];
        let tbl = CooccurrenceTable::from_counts(counts.clone()).unwrap();
        assert!((compute_mi(&tbl).unwrap() - mi_oracle(&counts)).abs() < 1e-12);
    }

    #[test]
    fn corpus_table_marginals() {
        let docs = ["a b a", "b c"]
            .iter()
            .enumerate()
            .map(|(i, t)| crate::corpus::Document {
                id: format!("d{i}"),
                dataset: "ds".into(),
                topic: "t".into(),
                text: t.to_string(),
                raw_label: "pro".into(),
                label: crate::corpus::StanceLabel::Positive,
            })
            .collect();
        let tbl = CooccurrenceTable::from_corpus(&Corpus::new(docs).unwrap()).unwrap();
        assert_eq!(tbl.counts(), &[vec![2.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]]);
        assert_eq!(tbl.row_sums(), &[3.0, 2.0]);
        assert_eq!(tbl.col_sums(), &[2.0, 2.0, 1.0]);
        assert_eq!(tbl.total(), 5.0);
    }

    proptest! {
        #[test]
        fn mi_matches_oracle_and_is_permutation_invariant(
            counts in prop::collection::vec(prop::collection::vec(0u32..20, 4), 3),
            rot in 0usize..3,
        ) {
            let counts: Vec<Vec<f64>> = counts
                .iter()
                .map(|r| r.iter().map(|&v| f64::from(v)).collect())
                .collect();
            prop_assume!(counts.iter().flatten().sum::<f64>() > 0.0);
            let tbl = CooccurrenceTable::from_counts(counts.clone()).unwrap();
            let mi = compute_mi(&tbl).unwrap();
            prop_assert!(mi >= 0.0);
            prop_assert!((mi - mi_oracle(&counts)).abs() < 1e-9);

            let mut permuted = counts.clone();
            permuted.rotate_left(rot);
            for row in permuted.iter_mut() {
                row.reverse();
            }
            let p = compute_mi(&CooccurrenceTable::from_counts(permuted).unwrap()).unwrap();
            prop_assert!((mi - p).abs() < 1e-9);
        }

        #[test]
        fn kmeans_objective_never_decreases(
            rows in prop::collection::vec(prop::collection::vec(-1.0f32..1.0, 3), 6..40),
            t in 1usize..5,
            seed in 0u64..1000,
        ) {
            prop_assume!(rows.iter().all(|r| r.iter().map(|v| v * v).sum::<f32>() > 1e-3));
            let m = matrix(&rows);
            let fit = spherical_kmeans(&m, &KMeansConfig { t, seed, max_iter: 50 }).unwrap();
            for w in fit.objective_history.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9, "{:?}", fit.objective_history);
            }
            let total: f64 = fit.clustering.importances().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(fit.clustering.sizes().iter().all(|&s| s > 0));
        }

        #[test]
        fn relabeling_permutes_importances(
            labels in prop::collection::vec(0usize..4, 4..30),
        ) {
            let t = 4;
            prop_assume!((0..t).all(|k| labels.contains(&k)));
            let a: BTreeMap<String, usize> =
                labels.iter().enumerate().map(|(i, &k)| (format!("d{i}"), k)).collect();
            let perm = [2, 0, 3, 1];
            let b: BTreeMap<String, usize> = a.iter().map(|(id, &k)| (id.clone(), perm[k])).collect();
            let ca = TopicClustering::from_assignments(a, t).unwrap();
            let cb = TopicClustering::from_assignments(b, t).unwrap();
            for (k, &pk) in perm.iter().enumerate().take(t) {
                prop_assert_eq!(ca.importances()[k], cb.importances()[pk]);
            }
        }
    }
}
