//! Training a small encoder head over frozen embeddings with the combined
//! cross-entropy + pairwise contrastive objective.

pub mod gradcheck;
pub mod head;
pub mod loss;
pub mod optim;
pub mod schedule;

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::StanceLabel;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

pub use gradcheck::{grad_check, GradCheckReport, DEFAULT_EPS};
pub use head::{EncoderHead, NUM_CLASSES};
pub use loss::{
    loss_and_grad, loss_ce, loss_cl_batch, loss_cl_pair, total_loss, Batch, LossParts, Objective,
    Pair, PairMatrix,
};
pub use optim::{clip_global_norm, AdamW, AdamWParams};
pub use schedule::{lr_at, warmup_steps};

/// Float types the head and its losses can be evaluated in.
pub trait Real:
    num_traits::Float + Copy + Send + Sync + std::fmt::Debug + std::fmt::Display + 'static
{
    fn of(v: f64) -> Self;
}

impl Real for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
}

impl Real for f64 {
    fn of(v: f64) -> Self {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Peak learning rate reached at the end of warmup.
    pub lr_peak: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub warmup_fraction: f64,
    pub clip_norm: f64,
    /// Margin for different-label pairs.
    pub beta_margin: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub hidden: usize,
    /// Adds the contrastive term; off gives the cross-entropy-only ablation.
    pub contrastive: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_peak: 2e-3,
            weight_decay: 0.01,
            epochs: 3,
            batch_size: 16,
            warmup_fraction: 0.10,
            clip_norm: 1.0,
            beta_margin: 0.5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            hidden: 128,
            contrastive: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return Err(Error::invalid("warmup_fraction must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.beta_margin) {
            return Err(Error::invalid("beta_margin must lie in [0, 1)"));
        }
        if !(self.lr_peak.is_finite() && self.lr_peak >= 0.0) {
            return Err(Error::invalid("lr_peak must be finite and non-negative"));
        }
        if self.batch_size < 1 || self.hidden < 1 {
            return Err(Error::invalid("batch_size and hidden must be positive"));
        }
        if self.clip_norm <= 0.0 {
            return Err(Error::invalid("clip_norm must be positive"));
        }
        Ok(())
    }

    pub fn objective(&self) -> Objective {
        Objective {
            contrastive: self.contrastive,
            beta: self.beta_margin,
        }
    }

    fn adam(&self) -> AdamWParams {
        AdamWParams {
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    pub ce: f64,
    pub cl: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub head: EncoderHead<f32>,
    pub optimizer: AdamW,
    pub step: usize,
    pub history: Vec<StepRecord>,
    pub config: TrainConfig,
}

impl TrainState {
    pub fn write_history_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["step", "lr", "ce", "cl", "total"])?;
        for r in &self.history {
            w.write_record([
                r.step.to_string(),
                r.lr.to_string(),
                r.ce.to_string(),
                r.cl.to_string(),
                r.total.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Rows of `m` for `ids`, concatenated.
pub fn gather_inputs(ids: &[String], m: &EmbeddingMatrix) -> Result<Vec<f32>> {
    let missing: Vec<String> = ids
        .iter()
        .filter(|id| m.get(id).is_none())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingEmbedding(missing));
    }
    let mut out = Vec::with_capacity(ids.len() * m.dims());
    for id in ids {
        out.extend_from_slice(m.get(id).expect("checked above"));
    }
    Ok(out)
}

/// Fixed batch plan for every epoch, with pair matrices built up front.
fn plan_batches(
    ids: &[String],
    inputs: &[f32],
    labels: &[StanceLabel],
    dims: usize,
    cfg: &TrainConfig,
) -> Result<Vec<(Batch, PairMatrix)>> {
    let n = ids.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut plan = Vec::new();
    for _ in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut chunks: Vec<Vec<usize>> = order
            .chunks(cfg.batch_size)
            .map(<[usize]>::to_vec)
            .collect();
        // a lone trailing item has no pairs; fold it into the previous batch
        if chunks.len() > 1 && chunks.last().map(Vec::len) == Some(1) {
            let last = chunks.pop().unwrap();
            chunks.last_mut().unwrap().extend(last);
        }
        for chunk in chunks {
            let mut rows = Vec::with_capacity(chunk.len() * dims);
            for &i in &chunk {
                rows.extend_from_slice(&inputs[i * dims..(i + 1) * dims]);
            }
            let batch = Batch::new(dims, rows, chunk.iter().map(|&i| labels[i]).collect())?;
            let pairs = batch.pairs();
            plan.push((batch, pairs));
        }
    }
    Ok(plan)
}

/// Trains a freshly initialized head on the given documents.
pub fn train(
    ids: &[String],
    m: &EmbeddingMatrix,
    labels: &HashMap<String, StanceLabel>,
    cfg: &TrainConfig,
) -> Result<TrainState> {
    cfg.validate()?;
    let inputs = gather_inputs(ids, m)?;
    let unlabeled: Vec<&String> = ids.iter().filter(|id| !labels.contains_key(*id)).collect();
    if !unlabeled.is_empty() {
        return Err(Error::invalid(format!("no label for {unlabeled:?}")));
    }
    let y: Vec<StanceLabel> = ids.iter().map(|id| labels[id]).collect();
    if cfg.contrastive && cfg.epochs > 0 && ids.len() < 2 {
        return Err(Error::invalid(
            "contrastive training needs at least two examples",
        ));
    }

    let head = EncoderHead::<f32>::init(m.dims(), cfg.hidden, cfg.seed);
    let mut state = TrainState {
        optimizer: AdamW::new(head.params().len(), cfg.adam()),
        head,
        step: 0,
        history: Vec::new(),
        config: *cfg,
    };
    if ids.is_empty() {
        return Ok(state);
    }

    let plan = plan_batches(ids, &inputs, &y, m.dims(), cfg)?;
    let total_steps = plan.len();
    let obj = cfg.objective();
    for (batch, pairs) in &plan {
        let lr = lr_at(state.step, total_steps, cfg.lr_peak, cfg.warmup_fraction);
        let (parts, mut grad) = loss_and_grad(&state.head, batch, pairs, &obj)?;
        if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite loss or gradient at step {}",
                state.step
            )));
        }
        clip_global_norm(&mut grad, cfg.clip_norm);
        state.optimizer.step(state.head.params_mut(), &grad, lr);
        let (ce, cl) = (f64::from(parts.ce), f64::from(parts.cl));
        state.history.push(StepRecord {
            step: state.step,
            lr,
            ce,
            cl,
            total: ce + cl,
        });
        state.step += 1;
    }
    Ok(state)
}

pub fn predict_ids(
    head: &EncoderHead<f32>,
    ids: &[String],
    m: &EmbeddingMatrix,
) -> Result<Vec<StanceLabel>> {
    Ok(head.predict(&gather_inputs(ids, m)?))
}

/// Hidden-layer representations, one row per id.
pub fn representations(
    head: &EncoderHead<f32>,
    ids: &[String],
    m: &EmbeddingMatrix,
) -> Result<Vec<Vec<f32>>> {
    let fwd = head.forward(&gather_inputs(ids, m)?);
    Ok(fwd
        .hidden
        .chunks_exact(head.hidden())
        .map(<[f32]>::to_vec)
        .collect())
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"TSHD";
const CHECKPOINT_VERSION: u32 = 1;

/// Writes `magic | version | dims | hidden | classes | params (f32 LE) |
/// config length (u64) | config JSON`.
pub fn save_checkpoint(head: &EncoderHead<f32>, cfg: &TrainConfig, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(head.dims() as u32).to_le_bytes());
    out.extend_from_slice(&(head.hidden() as u32).to_le_bytes());
    out.extend_from_slice(&(NUM_CLASSES as u32).to_le_bytes());
    for p in head.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let config = serde_json::to_vec(cfg)?;
    out.extend_from_slice(&(config.len() as u64).to_le_bytes());
    out.extend_from_slice(&config);
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(EncoderHead<f32>, TrainConfig)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let fmt = |offset: usize, reason: &str| Error::Format {
        offset: offset as u64,
        reason: reason.to_string(),
    };
    if bytes.len() < 20 {
        return Err(fmt(bytes.len(), "truncated checkpoint header"));
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(fmt(0, "bad checkpoint magic"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    if word(4) != CHECKPOINT_VERSION as usize {
        return Err(fmt(4, "unsupported checkpoint version"));
    }
    let (dims, hidden, classes) = (word(8), word(12), word(16));
    if classes != NUM_CLASSES {
        return Err(fmt(16, "unexpected class count"));
    }
    let n = EncoderHead::<f32>::param_count(dims, hidden);
    let params_end = 20 + n * 4;
    if bytes.len() < params_end + 8 {
        return Err(fmt(bytes.len(), "truncated checkpoint parameters"));
    }
    let params = bytes[20..params_end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let cfg_len =
        u64::from_le_bytes(bytes[params_end..params_end + 8].try_into().unwrap()) as usize;
    let cfg_bytes = bytes
        .get(params_end + 8..params_end + 8 + cfg_len)
        .ok_or_else(|| fmt(params_end + 8, "truncated config echo"))?;
    let cfg: TrainConfig = serde_json::from_slice(cfg_bytes)?;
    Ok((EncoderHead::from_params(dims, hidden, params)?, cfg))
}
