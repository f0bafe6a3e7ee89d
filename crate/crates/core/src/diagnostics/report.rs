//! Inter-topic and per-topic label imbalance of a subset against its corpus.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ks::{ks_test, KsResult};
use super::stats::{distribution_stats_lenient, mean, DistributionReport};
use crate::corpus::{Corpus, Document, StanceLabel};
use crate::error::{Error, Result};

pub const DEFAULT_TOP_K: usize = 20;
/// Topics per dataset whose counts feed the per-dataset KS comparison.
pub const KS_TOPICS_PER_DATASET: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicLabelReport {
    pub topic: String,
    pub labels: DistributionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedKs {
    pub name: String,
    pub result: KsResult,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceReport {
    pub corpus_size: usize,
    pub subset_size: usize,
    /// Document counts of the `top_k` most frequent topics.
    pub inter_topic: DistributionReport,
    /// Label counts inside each of those topics.
    pub per_topic: Vec<TopicLabelReport>,
    pub mean_label_std_full: f64,
    pub mean_label_std_subset: f64,
    pub dataset_ks: Vec<NamedKs>,
    pub topic_ks: Vec<NamedKs>,
}

fn label_counts<'a>(docs: impl Iterator<Item = &'a Document>) -> BTreeMap<String, u64> {
    let mut c: BTreeMap<String, u64> = StanceLabel::ALL
        .iter()
        .map(|l| (l.name().to_string(), 0))
        .collect();
    for d in docs {
        *c.get_mut(d.label.name()).expect("all labels present") += 1;
    }
    c
}

fn topic_counts<'a>(docs: impl Iterator<Item = &'a Document>) -> BTreeMap<String, u64> {
    let mut c = BTreeMap::new();
    for d in docs {
        *c.entry(d.topic.clone()).or_insert(0) += 1;
    }
    c
}

fn ks_on(name: String, full: &[u64], subset: &[u64]) -> Result<NamedKs> {
    let a: Vec<f64> = full.iter().map(|&c| c as f64).collect();
    let b: Vec<f64> = subset.iter().map(|&c| c as f64).collect();
    let result = ks_test(&a, &b)?;
    Ok(NamedKs {
        name,
        flagged: result.rejects(),
        result,
    })
}

/// Compares `subset` with `corpus` on topic frequencies and on label
/// frequencies within the `top_k` most frequent topics. KS comparisons use
/// the per-key counts as sample values.
pub fn imbalance_report(
    corpus: &Corpus,
    subset: &[String],
    top_k: usize,
) -> Result<ImbalanceReport> {
    let mut seen = HashSet::with_capacity(subset.len());
    let mut chosen = Vec::with_capacity(subset.len());
    for id in subset {
        let doc = corpus
            .get(id)
            .ok_or_else(|| Error::invalid(format!("subset id {id:?} is not in the corpus")))?;
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
        chosen.push(doc);
    }

    let full_topics = topic_counts(corpus.documents().iter());
    let sub_topics = topic_counts(chosen.iter().copied());
    let all_topics = distribution_stats_lenient(&full_topics, &sub_topics);
    let top: Vec<String> = all_topics.keys.iter().take(top_k).cloned().collect();
    let restrict = |m: &BTreeMap<String, u64>| -> BTreeMap<String, u64> {
        top.iter()
            .map(|t| (t.clone(), m.get(t).copied().unwrap_or(0)))
            .collect()
    };
    let inter_topic = distribution_stats_lenient(&restrict(&full_topics), &restrict(&sub_topics));

    let per_topic: Vec<TopicLabelReport> = top
        .par_iter()
        .map(|topic| TopicLabelReport {
            topic: topic.clone(),
            labels: distribution_stats_lenient(
                &label_counts(corpus.documents().iter().filter(|d| &d.topic == topic)),
                &label_counts(chosen.iter().copied().filter(|d| &d.topic == topic)),
            ),
        })
        .collect();
    let stds = |f: fn(&DistributionReport) -> f64| {
        mean(&per_topic.iter().map(|r| f(&r.labels)).collect::<Vec<_>>())
    };

    let datasets: Vec<&String> = corpus.datasets().iter().collect();
    let dataset_ks = datasets
        .par_iter()
        .map(|ds| {
            let full = topic_counts(corpus.documents().iter().filter(|d| &&d.dataset == ds));
            let sub = topic_counts(chosen.iter().copied().filter(|d| &&d.dataset == ds));
            let r = distribution_stats_lenient(&full, &BTreeMap::new());
            let keys: Vec<&String> = r.keys.iter().take(KS_TOPICS_PER_DATASET).collect();
            let f: Vec<u64> = keys.iter().map(|k| full[*k]).collect();
            let s: Vec<u64> = keys
                .iter()
                .map(|k| sub.get(*k).copied().unwrap_or(0))
                .collect();
            ks_on((*ds).clone(), &f, &s)
        })
        .collect::<Result<Vec<_>>>()?;
    let topic_ks = per_topic
        .par_iter()
        .map(|r| ks_on(r.topic.clone(), &r.labels.full, &r.labels.subset))
        .collect::<Result<Vec<_>>>()?;

    Ok(ImbalanceReport {
        corpus_size: corpus.len(),
        subset_size: chosen.len(),
        mean_label_std_full: stds(|r| r.std_full),
        mean_label_std_subset: stds(|r| r.std_subset),
        inter_topic,
        per_topic,
        dataset_ks,
        topic_ks,
    })
}

impl ImbalanceReport {
    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let it = &self.inter_topic;
        let _ = writeln!(
            out,
            "corpus {} documents, subset {}",
            self.corpus_size, self.subset_size
        );
        let _ = writeln!(out, "\ninter-topic counts");
        let _ = writeln!(out, "{:<32} {:>10} {:>10}", "topic", "full", "subset");
        for (k, f, s) in it.top(it.keys.len()) {
            let _ = writeln!(out, "{k:<32} {f:>10} {s:>10}");
        }
        let _ = writeln!(
            out,
            "{:<32} {:>10.2} {:>10.2}\n{:<32} {:>10.4} {:>10.4}",
            "std",
            it.std_full,
            it.std_subset,
            "std/mean",
            it.normalized_std_full,
            it.normalized_std_subset
        );
        let _ = writeln!(out, "\nper-topic label std");
        let _ = writeln!(out, "{:<32} {:>10} {:>10}", "topic", "full", "subset");
        for r in &self.per_topic {
            let _ = writeln!(
                out,
                "{:<32} {:>10.2} {:>10.2}",
                r.topic, r.labels.std_full, r.labels.std_subset
            );
        }
        let _ = writeln!(
            out,
            "{:<32} {:>10.2} {:>10.2}",
            "mean", self.mean_label_std_full, self.mean_label_std_subset
        );
        for (title, rows) in [
            ("dataset KS (topic counts)", &self.dataset_ks),
            ("topic KS (label counts)", &self.topic_ks),
        ] {
            let _ = writeln!(out, "\n{title}");
            let _ = writeln!(
                out,
                "{:<32} {:>6} {:>10} {:>11} {:>5}",
                "name", "stat", "p", "method", "flag"
            );
            for r in rows {
                let method = match r.result.method {
                    super::ks::KsMethod::Exact => "exact",
                    super::ks::KsMethod::Asymptotic => "asymptotic",
                };
                let _ = writeln!(
                    out,
                    "{:<32} {:>6.2} {:>10.6} {:>11} {:>5}",
                    r.name,
                    r.result.stat,
                    r.result.p_value,
                    method,
                    if r.flagged { "yes" } else { "no" }
                );
            }
        }
        out
    }

    /// `topic,full,subset` rows for external plotting.
    pub fn topic_counts_csv(&self) -> String {
        let mut out = String::from("topic,full,subset\n");
        for (k, f, s) in self.inter_topic.top(self.inter_topic.keys.len()) {
            let _ = writeln!(out, "{},{f},{s}", csv_field(k));
        }
        out
    }

    /// `topic,label,full,subset` rows for external plotting.
    pub fn label_counts_csv(&self) -> String {
        let mut out = String::from("topic,label,full,subset\n");
        for r in &self.per_topic {
            for (k, f, s) in r.labels.top(r.labels.keys.len()) {
                let _ = writeln!(out, "{},{k},{f},{s}", csv_field(&r.topic));
            }
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
