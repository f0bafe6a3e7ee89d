use std::path::Path;

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use topicwise::corpus::IngestOptions;
use topicwise::pipeline::RunConfig;
use topicwise::sampler::SamplerKind;
use topicwise::synthetic::SyntheticConfig;

use crate::UsageError;

/// Contents of a `--config` file. Every section is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub run: RunConfig,
    pub ingest: IngestOptions,
    pub synthetic: SyntheticConfig,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SamplerArg {
    Topic,
    Random,
    Stratified,
}

impl From<SamplerArg> for SamplerKind {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::Topic => SamplerKind::Topic,
            SamplerArg::Random => SamplerKind::Random,
            SamplerArg::Stratified => SamplerKind::Stratified,
        }
    }
}

/// Flags that take precedence over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Seed for clustering, sampling, training and the synthetic generator.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Fraction of the corpus to sample, in (0, 1].
    #[arg(long, global = true)]
    pub budget: Option<f64>,
    #[arg(long, value_enum, global = true)]
    pub sampler: Option<SamplerArg>,
    /// Train with cross-entropy only.
    #[arg(long, global = true)]
    pub no_contrastive: bool,
    /// Disable round-robin label cycling inside clusters.
    #[arg(long, global = true)]
    pub no_label_balance: bool,
    /// Number of topic clusters.
    #[arg(long, global = true)]
    pub clusters: Option<usize>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Peak learning rate.
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    /// Hidden width of the encoder head.
    #[arg(long, global = true)]
    pub hidden: Option<usize>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
}

pub fn load(path: Option<&Path>) -> anyhow::Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))
        .map_err(|e| UsageError(format!("{e:#}")))?;
    let parsed = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text).map_err(|e| e.to_string()),
        _ => toml::from_str(&text).map_err(|e| e.to_string()),
    };
    parsed.map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())).into())
}

impl FileConfig {
    /// Applies flag overrides and validates the result.
    pub fn resolve(mut self, o: &Overrides) -> anyhow::Result<Self> {
        let run = &mut self.run;
        if let Some(seed) = o.seed {
            run.seed = seed;
            self.synthetic.seed = seed;
        }
        if let Some(budget) = o.budget {
            run.budget = budget;
        }
        if let Some(sampler) = o.sampler {
            run.sampler = sampler.into();
        }
        if o.no_contrastive {
            run.train.contrastive = false;
        }
        if o.no_label_balance {
            run.sampling.label_balance = false;
        }
        if o.clusters.is_some() {
            run.clusters = o.clusters;
        }
        if let Some(epochs) = o.epochs {
            run.train.epochs = epochs;
        }
        if let Some(lr) = o.lr {
            run.train.lr_peak = lr;
        }
        if let Some(hidden) = o.hidden {
            run.train.hidden = hidden;
        }
        if let Some(batch_size) = o.batch_size {
            run.train.batch_size = batch_size;
        }
        run.validate().map_err(|e| UsageError(e.to_string()))?;
        if run.clusters == Some(0) {
            return Err(UsageError("clusters must be at least 1".into()).into());
        }
        Ok(self)
    }
}
