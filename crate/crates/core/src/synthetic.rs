//! Seeded synthetic stance corpus with skewed topic sizes, per-topic label
//! skew and Gaussian-mixture embeddings.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, StanceLabel};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::pipeline::RunConfig;
use crate::trainer::TrainConfig;

const TOPIC_NAMES: [&str; 12] = [
    "renewable energy",
    "school uniforms",
    "nuclear power",
    "minimum wage",
    "space exploration",
    "remote work",
    "animal testing",
    "public transport",
    "organic farming",
    "video games",
    "urban cycling",
    "online voting",
];

const LABEL_CUES: [&str; 5] = ["support", "oppose", "debate", "unrelated", "mention"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    /// Training documents per topic.
    pub topic_sizes: Vec<usize>,
    pub datasets: Vec<String>,
    pub dims: usize,
    /// Held-out documents per topic as a fraction of its size, at least
    /// `min_test_per_topic`.
    pub test_fraction: f64,
    pub min_test_per_topic: usize,
    /// Weight of the shared direction every topic centre leans towards;
    /// larger values make topics overlap more.
    pub topic_overlap: f64,
    /// Mixture components per topic.
    pub subtopics: usize,
    /// Distance of each component centre from its topic centre.
    pub subtopic_spread: f64,
    /// Weight of the label direction in each embedding.
    pub label_strength: f64,
    /// Trailing coordinates that carry the stance signal; the rest carry
    /// topic content.
    pub stance_dims: usize,
    /// Expected norm of the noise added to the content coordinates.
    pub noise: f64,
    /// Expected norm of the noise added to the stance coordinates.
    pub stance_noise: f64,
    /// Ratio between successive label probabilities inside a topic.
    pub label_decay: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            topic_sizes: vec![1000, 100, 10],
            datasets: vec!["synth-a".into(), "synth-b".into()],
            dims: 64,
            test_fraction: 0.2,
            min_test_per_topic: 20,
            topic_overlap: 4.0,
            subtopics: 3,
            subtopic_spread: 0.5,
            label_strength: 0.6,
            stance_dims: 16,
            noise: 3.0,
            stance_noise: 0.3,
            label_decay: 0.25,
            seed: 7,
        }
    }
}

/// Run settings used with the generator's default corpus: the head trains
/// long enough at a higher rate to fit the frozen features.
pub fn benchmark_run_config(seed: u64) -> RunConfig {
    RunConfig {
        seed,
        train: TrainConfig {
            lr_peak: 0.05,
            epochs: 30,
            hidden: 64,
            batch_size: 16,
            ..TrainConfig::default()
        },
        ..RunConfig::default()
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub corpus: Corpus,
    pub test: Corpus,
    /// Unit-norm rows for every document in `corpus` and `test`.
    pub embeddings: EmbeddingMatrix,
}

pub fn topic_name(t: usize) -> String {
    match TOPIC_NAMES.get(t) {
        Some(n) => n.to_string(),
        None => format!("topic {t}"),
    }
}

fn gaussian(rng: &mut ChaCha8Rng, dims: usize) -> Vec<f64> {
    (0..dims).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

fn draw_label(rng: &mut ChaCha8Rng, probs: &[f64]) -> StanceLabel {
    let mut r = rng.random::<f64>();
    for (i, p) in probs.iter().enumerate() {
        if r < *p {
            return StanceLabel::ALL[i];
        }
        r -= p;
    }
    StanceLabel::ALL[probs.len() - 1]
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    if cfg.topic_sizes.is_empty() || cfg.topic_sizes.contains(&0) {
        return Err(Error::invalid("every topic needs at least one document"));
    }
    if cfg.datasets.is_empty() {
        return Err(Error::invalid("need at least one dataset name"));
    }
    if cfg.stance_dims == 0 || cfg.stance_dims >= cfg.dims {
        return Err(Error::invalid("stance_dims must lie in 1..dims"));
    }
    if !(0.0..1.0).contains(&cfg.label_decay) || cfg.label_decay == 0.0 {
        return Err(Error::invalid("label_decay must lie in (0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dims = cfg.dims;

    // topics live in the leading content coordinates, stance in the rest
    let stance_dims = cfg.stance_dims;
    let content_dims = dims - stance_dims;
    let shared = unit(gaussian(&mut rng, content_dims));
    let centres: Vec<Vec<f64>> = cfg
        .topic_sizes
        .iter()
        .map(|_| {
            let own = unit(gaussian(&mut rng, content_dims));
            unit(
                own.iter()
                    .zip(&shared)
                    .map(|(a, s)| a + cfg.topic_overlap * s)
                    .collect(),
            )
        })
        .collect();
    let components: Vec<Vec<Vec<f64>>> = centres
        .iter()
        .map(|c| {
            (0..cfg.subtopics.max(1))
                .map(|_| {
                    let off = unit(gaussian(&mut rng, content_dims));
                    c.iter()
                        .zip(&off)
                        .map(|(a, o)| a + cfg.subtopic_spread * o)
                        .collect()
                })
                .collect()
        })
        .collect();
    let label_dirs: Vec<Vec<f64>> = (0..StanceLabel::COUNT)
        .map(|_| unit(gaussian(&mut rng, stance_dims)))
        .collect();

    // geometric label probabilities, ranked differently in every topic
    let label_probs: Vec<Vec<f64>> = cfg
        .topic_sizes
        .iter()
        .map(|_| {
            let mut rank: Vec<usize> = (0..StanceLabel::COUNT).collect();
            rank.shuffle(&mut rng);
            let raw: Vec<f64> = rank
                .iter()
                .map(|&r| cfg.label_decay.powi(r as i32))
                .collect();
            let z: f64 = raw.iter().sum();
            raw.iter().map(|p| p / z).collect()
        })
        .collect();

    let mut ids = Vec::new();
    let mut rows = Vec::new();
    let mut make = |rng: &mut ChaCha8Rng, split: &str, t: usize, i: usize| -> Document {
        let label = draw_label(rng, &label_probs[t]);
        let centre = &components[t][rng.random_range(0..components[t].len())];
        let content_scale = cfg.noise / (content_dims as f64).sqrt();
        let stance_scale = cfg.stance_noise / (stance_dims as f64).sqrt();
        let mut v: Vec<f64> = centre
            .iter()
            .map(|c| {
                let z: f64 = StandardNormal.sample(rng);
                c + content_scale * z
            })
            .collect();
        v.extend(label_dirs[label.index()].iter().map(|l| {
            let z: f64 = StandardNormal.sample(rng);
            cfg.label_strength * l + stance_scale * z
        }));
        let id = format!("{split}:{t}:{i}");
        ids.push(id.clone());
        rows.push(unit(v).into_iter().map(|x| x as f32).collect::<Vec<f32>>());
        let topic = topic_name(t);
        Document {
            text: format!("people {} {} item {i}", LABEL_CUES[label.index()], topic),
            dataset: cfg.datasets[(i + t) % cfg.datasets.len()].clone(),
            topic,
            raw_label: label.name().to_string(),
            label,
            id,
        }
    };

    let mut train_docs = Vec::new();
    let mut test_docs = Vec::new();
    for (t, &size) in cfg.topic_sizes.iter().enumerate() {
        for i in 0..size {
            train_docs.push(make(&mut rng, "train", t, i));
        }
        let n_test =
            ((size as f64 * cfg.test_fraction).round() as usize).max(cfg.min_test_per_topic);
        for i in 0..n_test {
            test_docs.push(make(&mut rng, "test", t, i));
        }
    }
    let embeddings = EmbeddingMatrix::from_rows(ids, &rows)?.normalize_rows()?;
    Ok(SyntheticData {
        corpus: Corpus::new(train_docs)?,
        test: Corpus::new(test_docs)?,
        embeddings,
    })
}
