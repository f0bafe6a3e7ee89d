//! Topic-efficient diversity sampling and the random/stratified baselines.
//!
//! Each topic cluster receives a quota `max(1, floor(S * I_i))` where `I_i` is
//! the cluster's share of the corpus. Inside a cluster the sampler repeatedly
//! takes the remaining member least similar (by cosine) to a running centroid
//! and then pulls the centroid towards the pick, so successive picks spread
//! out over the cluster.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, StanceLabel};
use crate::embedding::{norm64, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::topic::{missing_ids, TopicClustering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AvgMode {
    /// Running mean over the initial centroid and every pick so far.
    Moving,
    /// `cent <- alpha * e + (1 - alpha) * cent`.
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Total sampling threshold `S`.
    pub budget: usize,
    pub avg_mode: AvgMode,
    pub alpha: f64,
    /// Cycle through stance labels round-robin inside each cluster.
    pub label_balance: bool,
    /// Use the printed moving-average recurrence `cent_j = (j-1)/j * cent + e/j`
    /// (so the first pick replaces the cluster mean) instead of counting the
    /// initial centroid as one element of the running mean.
    pub literal_moving: bool,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            budget: 100,
            avg_mode: AvgMode::Moving,
            alpha: 0.9,
            label_balance: true,
            literal_moving: false,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget < 1 {
            return Err(Error::invalid("sampling budget S must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Topic,
    Random,
    Stratified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: SamplerKind,
    pub config: Option<SamplerConfig>,
    /// Requested size for the baselines.
    pub k: Option<usize>,
    pub seed: u64,
    pub clustering_fingerprint: Option<String>,
    pub quotas: Vec<usize>,
    /// Clusters whose members ran out before their quota was met.
    pub exhausted_clusters: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSubset {
    pub selected: Vec<String>,
    pub per_cluster_counts: BTreeMap<usize, usize>,
    pub per_label_counts: BTreeMap<StanceLabel, usize>,
    pub provenance: Provenance,
}

impl SampledSubset {
    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// One id per line.
    pub fn write_id_list(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for id in &self.selected {
            writeln!(f, "{id}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

/// Per-cluster selection thresholds `max(1, floor(S * I_i))`.
pub fn per_cluster_quota(budget: usize, importances: &[f64]) -> Vec<usize> {
    importances
        .iter()
        // the epsilon absorbs rounding in shares like 3/10 * 10
        .map(|&imp| ((budget as f64 * imp + 1e-9).floor() as usize).max(1))
        .collect()
}

struct Member<'a> {
    id: &'a str,
    row: &'a [f32],
    label: StanceLabel,
}

/// Runs the diversity selection over every cluster.
pub fn sample_topic_efficient(
    m: &EmbeddingMatrix,
    clustering: &TopicClustering,
    corpus: &Corpus,
    cfg: &SamplerConfig,
) -> Result<SampledSubset> {
    cfg.validate()?;
    if !m.is_normalized() {
        return Err(Error::invalid(
            "diversity sampling needs unit-norm embeddings",
        ));
    }
    let missing = missing_ids(clustering.assignments().keys().map(String::as_str), m);
    if !missing.is_empty() {
        return Err(Error::MissingEmbedding(missing));
    }
    let unknown: Vec<&String> = clustering
        .assignments()
        .keys()
        .filter(|id| !corpus.contains(id))
        .collect();
    if !unknown.is_empty() {
        return Err(Error::InvalidClustering(format!(
            "ids not in corpus: {unknown:?}"
        )));
    }

    let quotas = per_cluster_quota(cfg.budget, clustering.importances());
    let members = clustering.members();
    let picks: Vec<Vec<&str>> = members
        .par_iter()
        .zip(quotas.par_iter())
        .map(|(ids, &quota)| {
            let cluster: Vec<Member> = ids
                .iter()
                .map(|&id| Member {
                    id,
                    row: m.get(id).expect("checked above"),
                    label: corpus.get(id).expect("checked above").label,
                })
                .collect();
            select_in_cluster(&cluster, quota, cfg)
        })
        .collect();

    let mut selected = Vec::new();
    let mut per_cluster_counts = BTreeMap::new();
    let mut exhausted = Vec::new();
    for (k, ids) in picks.into_iter().enumerate() {
        if ids.len() < quotas[k] {
            exhausted.push(k);
        }
        per_cluster_counts.insert(k, ids.len());
        selected.extend(ids.into_iter().map(str::to_string));
    }
    let per_label_counts = label_counts(corpus, &selected);
    Ok(SampledSubset {
        selected,
        per_cluster_counts,
        per_label_counts,
        provenance: Provenance {
            method: SamplerKind::Topic,
            config: Some(*cfg),
            k: None,
            seed: cfg.seed,
            clustering_fingerprint: Some(clustering.fingerprint()),
            quotas,
            exhausted_clusters: exhausted,
        },
    })
}

fn select_in_cluster<'a>(
    members: &[Member<'a>],
    quota: usize,
    cfg: &SamplerConfig,
) -> Vec<&'a str> {
    let dims = members.first().map(|m| m.row.len()).unwrap_or(0);
    let mut centroid = vec![0f64; dims];
    for mem in members {
        for (c, &v) in centroid.iter_mut().zip(mem.row) {
            *c += f64::from(v);
        }
    }
    scale_to_unit(&mut centroid);

    let labels: Vec<StanceLabel> = StanceLabel::ALL
        .into_iter()
        .filter(|l| members.iter().any(|m| m.label == *l))
        .collect();
    let mut cursor = 0usize;
    let mut taken = vec![false; members.len()];
    let mut picks = Vec::with_capacity(quota.min(members.len()));

    while picks.len() < quota && picks.len() < members.len() {
        let allowed = if cfg.label_balance {
            let next = (0..labels.len())
                .map(|off| (cursor + off) % labels.len())
                .find(|&li| {
                    members
                        .iter()
                        .zip(&taken)
                        .any(|(m, &t)| !t && m.label == labels[li])
                })
                .expect("some member remains");
            cursor = next + 1;
            Some(labels[next])
        } else {
            None
        };

        let ranking = unit_copy(&centroid);
        let (best, _) = members
            .iter()
            .enumerate()
            .filter(|(i, m)| !taken[*i] && allowed.is_none_or(|l| m.label == l))
            .map(|(i, m)| (i, cosine_f64(m.row, ranking.as_deref())))
            .min_by(|a, b| {
                a.1.total_cmp(&b.1)
                    .then_with(|| members[a.0].id.cmp(members[b.0].id))
            })
            .expect("candidate pool is non-empty");

        taken[best] = true;
        picks.push(members[best].id);
        update_centroid(&mut centroid, members[best].row, picks.len(), cfg);
    }
    picks
}

/// Applies one centroid update after the `j`-th pick (1-based).
fn update_centroid(centroid: &mut [f64], picked: &[f32], j: usize, cfg: &SamplerConfig) {
    let (keep, add) = match cfg.avg_mode {
        AvgMode::Exp => (1.0 - cfg.alpha, cfg.alpha),
        AvgMode::Moving if cfg.literal_moving => {
            let j = j as f64;
            ((j - 1.0) / j, 1.0 / j)
        }
        AvgMode::Moving => {
            let j = j as f64;
            (j / (j + 1.0), 1.0 / (j + 1.0))
        }
    };
    for (c, &e) in centroid.iter_mut().zip(picked) {
        *c = keep * *c + add * f64::from(e);
    }
}

fn scale_to_unit(v: &mut [f64]) {
    let n = norm64(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Unit copy used for ranking; `None` when the centroid vanished.
fn unit_copy(v: &[f64]) -> Option<Vec<f64>> {
    let n = norm64(v);
    (n > 0.0).then(|| v.iter().map(|x| x / n).collect())
}

/// Cosine against a unit centroid. A vanished centroid ranks every
/// candidate equally, leaving the id tie-break to decide.
fn cosine_f64(row: &[f32], unit: Option<&[f64]>) -> f64 {
    let Some(c) = unit else { return 0.0 };
    let rn = row
        .iter()
        .map(|&x| f64::from(x).powi(2))
        .sum::<f64>()
        .sqrt();
    if rn == 0.0 {
        return 0.0;
    }
    row.iter()
        .zip(c)
        .map(|(&x, &y)| f64::from(x) * y)
        .sum::<f64>()
        / rn
}

fn label_counts(corpus: &Corpus, ids: &[String]) -> BTreeMap<StanceLabel, usize> {
    let mut out = BTreeMap::new();
    for id in ids {
        if let Some(d) = corpus.get(id) {
            *out.entry(d.label).or_insert(0) += 1;
        }
    }
    out
}

fn check_k(corpus: &Corpus, k: usize) -> Result<()> {
    if k < 1 || k > corpus.len() {
        return Err(Error::invalid(format!(
            "sample size {k} outside 1..={}",
            corpus.len()
        )));
    }
    Ok(())
}

fn baseline(
    corpus: &Corpus,
    selected: Vec<String>,
    kind: SamplerKind,
    k: usize,
    seed: u64,
) -> SampledSubset {
    SampledSubset {
        per_label_counts: label_counts(corpus, &selected),
        selected,
        per_cluster_counts: BTreeMap::new(),
        provenance: Provenance {
            method: kind,
            config: None,
            k: Some(k),
            seed,
            clustering_fingerprint: None,
            quotas: Vec::new(),
            exhausted_clusters: Vec::new(),
        },
    }
}

/// Uniform sample of `k` documents without replacement.
pub fn sample_random(corpus: &Corpus, k: usize, seed: u64) -> Result<SampledSubset> {
    check_k(corpus, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<String> = corpus.ids().map(str::to_string).collect();
    ids.shuffle(&mut rng);
    ids.truncate(k);
    Ok(baseline(corpus, ids, SamplerKind::Random, k, seed))
}

/// Largest-remainder allocation of `k` over stance labels, uniform within
/// each label.
pub fn sample_stratified(corpus: &Corpus, k: usize, seed: u64) -> Result<SampledSubset> {
    check_k(corpus, k)?;
    let mut strata: BTreeMap<StanceLabel, Vec<String>> = BTreeMap::new();
    for d in corpus.documents() {
        strata.entry(d.label).or_default().push(d.id.clone());
    }
    let counts: Vec<(StanceLabel, usize)> = strata.iter().map(|(l, v)| (*l, v.len())).collect();
    let alloc = largest_remainder(k, &counts, corpus.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = Vec::with_capacity(k);
    for (label, mut ids) in strata {
        ids.shuffle(&mut rng);
        ids.truncate(alloc[&label]);
        selected.extend(ids);
    }
    Ok(baseline(corpus, selected, SamplerKind::Stratified, k, seed))
}

fn largest_remainder(
    k: usize,
    counts: &[(StanceLabel, usize)],
    total: usize,
) -> HashMap<StanceLabel, usize> {
    let mut alloc: HashMap<StanceLabel, usize> = HashMap::new();
    let mut rema = Vec::new();
    let mut assigned = 0;
    for &(label, n) in counts {
        let exact = k * n;
        let base = exact / total;
        alloc.insert(label, base);
        assigned += base;
        rema.push((exact % total, label));
    }
    // larger remainder first, canonical label order on ties
    rema.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, label) in rema.into_iter().take(k - assigned) {
        *alloc.get_mut(&label).unwrap() += 1;
    }
    alloc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use std::collections::HashSet;

    fn corpus_with(labels: &[(&str, StanceLabel)]) -> Corpus {
        Corpus::new(
            labels
                .iter()
                .map(|(id, l)| Document {
                    id: id.to_string(),
                    dataset: "ds".into(),
                    topic: "t".into(),
                    text: "x".into(),
                    raw_label: l.name().into(),
                    label: *l,
                })
                .collect(),
        )
        .unwrap()
    }

    fn single_cluster(ids: &[&str]) -> TopicClustering {
        TopicClustering::from_assignments(ids.iter().map(|id| (id.to_string(), 0)).collect(), 1)
            .unwrap()
    }

    #[test]
    fn quota_examples() {
        assert_eq!(per_cluster_quota(5, &[0.8, 0.2]), vec![4, 1]);
        assert_eq!(per_cluster_quota(1, &[0.5, 0.5]), vec![1, 1]);
        assert_eq!(
            per_cluster_quota(100, &[0.335, 0.335, 0.33]),
            vec![33, 33, 33]
        );
    }

    #[test]
    fn picks_farthest_from_mean() {
        let ids = ["e1", "e2", "e3"];
        let m = EmbeddingMatrix::from_rows(
            ids.iter().map(|s| s.to_string()).collect(),
            &[vec![1.0, 0.0], vec![0.995, 0.0999], vec![-1.0, 0.0]],
        )
        .unwrap()
        .normalize_rows()
        .unwrap();
        let corpus = corpus_with(&[
            ("e1", StanceLabel::Positive),
            ("e2", StanceLabel::Positive),
            ("e3", StanceLabel::Positive),
        ]);
        let cfg = SamplerConfig {
            budget: 1,
            ..Default::default()
        };
        let s = sample_topic_efficient(&m, &single_cluster(&ids), &corpus, &cfg).unwrap();
        assert_eq!(s.selected, vec!["e3"]);
    }

    #[test]
    fn single_point_cluster_selected_once() {
        let m = EmbeddingMatrix::from_rows(vec!["a".into()], &[vec![0.0, 1.0]]).unwrap();
        let corpus = corpus_with(&[("a", StanceLabel::Neutral)]);
        let cfg = SamplerConfig {
            budget: 10,
            ..Default::default()
        };
        let s = sample_topic_efficient(&m, &single_cluster(&["a"]), &corpus, &cfg).unwrap();
        assert_eq!(s.selected, vec!["a"]);
        assert_eq!(s.provenance.exhausted_clusters, vec![0]);
    }

    #[test]
    fn whole_cluster_taken_once_each_and_deterministically() {
        let ids = ["a", "b", "c", "d"];
        let m = EmbeddingMatrix::from_rows(
            ids.iter().map(|s| s.to_string()).collect(),
            &[
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![-1.0, 0.2],
                vec![0.3, -1.0],
            ],
        )
        .unwrap()
        .normalize_rows()
        .unwrap();
        let corpus = corpus_with(&[
            ("a", StanceLabel::Positive),
            ("b", StanceLabel::Negative),
            ("c", StanceLabel::Positive),
            ("d", StanceLabel::Other),
        ]);
        for mode in [AvgMode::Moving, AvgMode::Exp] {
            for label_balance in [false, true] {
                let cfg = SamplerConfig {
                    budget: 4,
                    avg_mode: mode,
                    label_balance,
                    ..Default::default()
                };
                let c = single_cluster(&ids);
                let s1 = sample_topic_efficient(&m, &c, &corpus, &cfg).unwrap();
                let s2 = sample_topic_efficient(&m, &c, &corpus, &cfg).unwrap();
                assert_eq!(s1, s2);
                let set: HashSet<_> = s1.selected.iter().collect();
                assert_eq!(set.len(), 4);
            }
        }
    }

    #[test]
    fn missing_embedding_is_an_error() {
        let m = EmbeddingMatrix::from_rows(vec!["a".into()], &[vec![1.0]]).unwrap();
        let corpus = corpus_with(&[("a", StanceLabel::Other), ("b", StanceLabel::Other)]);
        let c = single_cluster(&["a", "b"]);
        assert!(matches!(
            sample_topic_efficient(&m, &c, &corpus, &SamplerConfig::default()),
            Err(Error::MissingEmbedding(ids)) if ids == vec!["b".to_string()]
        ));
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = SamplerConfig {
            alpha: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SamplerConfig {
            budget: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn label_balance_alternates_labels() {
        // Positives sit far from the mean, so without balancing they would all
        // be picked first.
        let ids = ["p1", "p2", "p3", "n1", "n2", "n3"];
        let rows = vec![
            vec![-1.0, 0.1],
            vec![-1.0, -0.1],
            vec![-0.9, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 0.05],
            vec![1.0, -0.05],
        ];
        let m = EmbeddingMatrix::from_rows(ids.iter().map(|s| s.to_string()).collect(), &rows)
            .unwrap()
            .normalize_rows()
            .unwrap();
        let corpus = corpus_with(&[
            ("p1", StanceLabel::Positive),
            ("p2", StanceLabel::Positive),
            ("p3", StanceLabel::Positive),
            ("n1", StanceLabel::Negative),
            ("n2", StanceLabel::Negative),
            ("n3", StanceLabel::Negative),
        ]);
        let cfg = SamplerConfig {
            budget: 4,
            label_balance: true,
            ..Default::default()
        };
        let s = sample_topic_efficient(&m, &single_cluster(&ids), &corpus, &cfg).unwrap();
        let labels: Vec<_> = s
            .selected
            .iter()
            .map(|id| corpus.get(id).unwrap().label)
            .collect();
        assert_eq!(
            labels,
            vec![
                StanceLabel::Positive,
                StanceLabel::Negative,
                StanceLabel::Positive,
                StanceLabel::Negative
            ]
        );
        assert_eq!(s.per_label_counts[&StanceLabel::Positive], 2);
    }

    #[test]
    fn literal_moving_first_pick_replaces_centroid() {
        let mut c = vec![0.6, 0.8];
        let cfg = SamplerConfig {
            literal_moving: true,
            ..Default::default()
        };
        update_centroid(&mut c, &[1.0, 0.0], 1, &cfg);
        assert_eq!(c, vec![1.0, 0.0]);

        let mut c = vec![0.6, 0.8];
        update_centroid(&mut c, &[1.0, 0.0], 1, &SamplerConfig::default());
        assert_eq!(c, vec![0.8, 0.4]);
    }

    fn labeled(n_pos: usize, n_neg: usize) -> Corpus {
        let mut docs = Vec::new();
        for i in 0..n_pos {
            docs.push((format!("p{i}"), StanceLabel::Positive));
        }
        for i in 0..n_neg {
            docs.push((format!("n{i}"), StanceLabel::Negative));
        }
        let refs: Vec<(&str, StanceLabel)> = docs.iter().map(|(s, l)| (s.as_str(), *l)).collect();
        corpus_with(&refs)
    }

    #[test]
    fn stratified_proportional_allocation() {
        let c = labeled(60, 40);
        let s = sample_stratified(&c, 10, 1).unwrap();
        assert_eq!(s.per_label_counts[&StanceLabel::Positive], 6);
        assert_eq!(s.per_label_counts[&StanceLabel::Negative], 4);
    }

    #[test]
    fn largest_remainder_hands_out_leftovers() {
        let c = labeled(5, 2);
        let s = sample_stratified(&c, 3, 1).unwrap();
        // exact shares 15/7 and 6/7
        assert_eq!(s.per_label_counts[&StanceLabel::Positive], 2);
        assert_eq!(s.per_label_counts[&StanceLabel::Negative], 1);
    }

    #[test]
    fn baselines_full_sample_and_determinism() {
        let c = labeled(7, 5);
        let all: HashSet<&str> = c.ids().collect();
        for s in [
            sample_random(&c, 12, 3).unwrap(),
            sample_stratified(&c, 12, 3).unwrap(),
        ] {
            let got: HashSet<&str> = s.selected.iter().map(String::as_str).collect();
            assert_eq!(got, all);
        }
        assert_eq!(
            sample_random(&c, 5, 9).unwrap(),
            sample_random(&c, 5, 9).unwrap()
        );
        assert_eq!(
            sample_stratified(&c, 5, 9).unwrap(),
            sample_stratified(&c, 5, 9).unwrap()
        );
        assert!(sample_random(&c, 0, 1).is_err());
        assert!(sample_random(&c, 13, 1).is_err());
        assert!(sample_stratified(&c, 13, 1).is_err());
    }
}
