//! End-to-end stages: cluster, sample, train, evaluate, sweep and
//! leave-one-dataset-out runs.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{split_leave_one_out, Corpus, StanceLabel};
use crate::diagnostics::{classification_metrics, Metrics};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::sampler::{
    sample_random, sample_stratified, sample_topic_efficient, SampledSubset, SamplerConfig,
    SamplerKind,
};
use crate::topic::{default_cluster_count, fit_spherical_kmeans, TopicClustering};
use crate::trainer::{predict_ids, train, EncoderHead, TrainConfig, TrainState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Fraction of the corpus to sample, in (0, 1].
    pub budget: f64,
    pub sampler: SamplerKind,
    /// Diversity sampler settings; `budget` and `seed` are filled in per run.
    pub sampling: SamplerConfig,
    /// Head training settings; `seed` is filled in per run.
    pub train: TrainConfig,
    /// Topic cluster count; derived from the corpus size when absent.
    pub clusters: Option<usize>,
    pub kmeans_max_iter: usize,
    /// Seeds clustering, sampling and training.
    pub seed: u64,
    pub top_k: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            budget: 0.10,
            sampler: SamplerKind::Topic,
            sampling: SamplerConfig::default(),
            train: TrainConfig::default(),
            clusters: None,
            kmeans_max_iter: 100,
            seed: 0,
            top_k: crate::diagnostics::DEFAULT_TOP_K,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.budget > 0.0 && self.budget <= 1.0) {
            return Err(Error::invalid(format!(
                "budget {} outside (0, 1]",
                self.budget
            )));
        }
        self.sampling.validate()?;
        self.train.validate()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train
        }
    }
}

/// `S = floor(budget * n)`, at least 1.
pub fn budget_size(budget: f64, n: usize) -> usize {
    ((budget * n as f64 + 1e-9).floor() as usize).max(1)
}

/// Unit-norm view of `m`, reusing it when already normalized.
pub fn unit_rows(m: &EmbeddingMatrix) -> Result<std::borrow::Cow<'_, EmbeddingMatrix>> {
    if m.is_normalized() {
        Ok(std::borrow::Cow::Borrowed(m))
    } else {
        Ok(std::borrow::Cow::Owned(m.normalize_rows()?))
    }
}

fn corpus_ids(corpus: &Corpus) -> Vec<String> {
    corpus.ids().map(str::to_string).collect()
}

/// Spherical k-means over the corpus documents' embeddings.
pub fn cluster_corpus(
    corpus: &Corpus,
    m: &EmbeddingMatrix,
    t: Option<usize>,
    seed: u64,
    max_iter: usize,
) -> Result<TopicClustering> {
    if corpus.is_empty() {
        return Err(Error::invalid("cannot cluster an empty corpus"));
    }
    let sub = unit_rows(m)?.subset(&corpus_ids(corpus))?;
    let t = t.unwrap_or_else(|| default_cluster_count(corpus.len()));
    fit_spherical_kmeans(&sub, t, seed, max_iter)?.with_centroids(&sub)
}

/// Draws a training subset with the configured sampler.
pub fn draw_subset(
    corpus: &Corpus,
    m: &EmbeddingMatrix,
    clustering: Option<&TopicClustering>,
    cfg: &RunConfig,
) -> Result<SampledSubset> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::invalid("cannot sample from an empty corpus"));
    }
    let s = budget_size(cfg.budget, corpus.len());
    match cfg.sampler {
        SamplerKind::Topic => {
            let clustering = clustering.ok_or_else(|| {
                Error::invalid("the topic sampler needs a clustering (run the cluster stage first)")
            })?;
            clustering.check_covers(corpus)?;
            let sampling = SamplerConfig {
                budget: s,
                seed: cfg.seed,
                ..cfg.sampling
            };
            sample_topic_efficient(&*unit_rows(m)?, clustering, corpus, &sampling)
        }
        SamplerKind::Random => sample_random(corpus, s.min(corpus.len()), cfg.seed),
        SamplerKind::Stratified => sample_stratified(corpus, s.min(corpus.len()), cfg.seed),
    }
}

pub fn train_subset(
    subset: &SampledSubset,
    corpus: &Corpus,
    m: &EmbeddingMatrix,
    cfg: &TrainConfig,
) -> Result<TrainState> {
    train(&subset.selected, m, &corpus.labels(), cfg)
}

/// Predictions for every document of `test`, in corpus order, with metrics.
pub fn evaluate(
    head: &EncoderHead<f32>,
    test: &Corpus,
    m: &EmbeddingMatrix,
) -> Result<(Metrics, Vec<StanceLabel>)> {
    let ids = corpus_ids(test);
    let preds = predict_ids(head, &ids, m)?;
    let golds: Vec<StanceLabel> = test.documents().iter().map(|d| d.label).collect();
    Ok((classification_metrics(&preds, &golds)?, preds))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub subset: SampledSubset,
    pub state: TrainState,
    pub metrics: Metrics,
}

/// Sample from `train_corpus`, fit a head on the subset and score it on `test`.
pub fn run_once(
    train_corpus: &Corpus,
    test: &Corpus,
    m: &EmbeddingMatrix,
    clustering: Option<&TopicClustering>,
    cfg: &RunConfig,
) -> Result<RunOutcome> {
    let subset = draw_subset(train_corpus, m, clustering, cfg)?;
    let state = train_subset(&subset, train_corpus, m, &cfg.train_config())?;
    let (metrics, _) = evaluate(&state.head, test, m)?;
    Ok(RunOutcome {
        subset,
        state,
        metrics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub budget: f64,
    pub macro_f1: f64,
    pub subset_size: usize,
}

/// One run per budget with a shared seed and clustering.
pub fn sweep(
    train_corpus: &Corpus,
    test: &Corpus,
    m: &EmbeddingMatrix,
    clustering: Option<&TopicClustering>,
    budgets: &[f64],
    cfg: &RunConfig,
) -> Result<Vec<SweepRow>> {
    if budgets.is_empty() {
        return Err(Error::invalid("no budgets to sweep"));
    }
    budgets
        .par_iter()
        .map(|&budget| {
            let run = RunConfig {
                budget,
                ..cfg.clone()
            };
            let out = run_once(train_corpus, test, m, clustering, &run)?;
            Ok(SweepRow {
                budget,
                macro_f1: out.metrics.macro_f1,
                subset_size: out.subset.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct LooOutcome {
    pub held_out: String,
    pub train_size: usize,
    pub test_ids: Vec<String>,
    pub outcome: RunOutcome,
}

/// Trains on every dataset except `held_out` and evaluates on it alone.
pub fn leave_one_out(
    corpus: &Corpus,
    m: &EmbeddingMatrix,
    held_out: &str,
    cfg: &RunConfig,
) -> Result<LooOutcome> {
    let (train_part, test_part) = split_leave_one_out(corpus, held_out)?;
    if train_part.is_empty() {
        return Err(Error::invalid(format!(
            "holding out {held_out:?} leaves nothing to train on"
        )));
    }
    let clustering = match cfg.sampler {
        SamplerKind::Topic => Some(cluster_corpus(
            &train_part,
            m,
            cfg.clusters,
            cfg.seed,
            cfg.kmeans_max_iter,
        )?),
        _ => None,
    };
    let outcome = run_once(&train_part, &test_part, m, clustering.as_ref(), cfg)?;
    Ok(LooOutcome {
        held_out: held_out.to_string(),
        train_size: train_part.len(),
        test_ids: corpus_ids(&test_part),
        outcome,
    })
}

/// Ids of `subset` that are absent from `corpus`.
pub fn unknown_ids<'a>(subset: &'a [String], corpus: &Corpus) -> Vec<&'a str> {
    let known: HashSet<&str> = corpus.ids().collect();
    subset
        .iter()
        .map(String::as_str)
        .filter(|id| !known.contains(id))
        .collect()
}
