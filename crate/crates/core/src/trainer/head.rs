use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Real;
use crate::corpus::StanceLabel;
use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = StanceLabel::COUNT;

/// One-hidden-layer head over frozen embeddings.
///
/// `x = tanh(W1ᵀ e + b1)` is the representation compared by the contrastive
/// term; `W2ᵀ x + b2` are the class logits. Parameters live in one flat
/// buffer laid out as `W1 (dims×h) | b1 (h) | W2 (h×5) | b2 (5)`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderHead<F = f32> {
    dims: usize,
    hidden: usize,
    params: Vec<F>,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Forward<F> {
    /// `b × h` tanh activations.
    pub hidden: Vec<F>,
    /// `b × 5` logits.
    pub logits: Vec<F>,
}

impl<F: Real> EncoderHead<F> {
    pub fn param_count(dims: usize, hidden: usize) -> usize {
        dims * hidden + hidden + hidden * NUM_CLASSES + NUM_CLASSES
    }

    /// Xavier-uniform weights, zero biases.
    pub fn init(dims: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(Self::param_count(dims, hidden));
        let a1 = (6.0 / (dims + hidden) as f64).sqrt();
        params.extend((0..dims * hidden).map(|_| F::of(rng.random_range(-a1..a1))));
        params.extend((0..hidden).map(|_| F::zero()));
        let a2 = (6.0 / (hidden + NUM_CLASSES) as f64).sqrt();
        params.extend((0..hidden * NUM_CLASSES).map(|_| F::of(rng.random_range(-a2..a2))));
        params.extend((0..NUM_CLASSES).map(|_| F::zero()));
        Self {
            dims,
            hidden,
            params,
        }
    }

    pub fn from_params(dims: usize, hidden: usize, params: Vec<F>) -> Result<Self> {
        let expected = Self::param_count(dims, hidden);
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("non-finite parameter".into()));
        }
        Ok(Self {
            dims,
            hidden,
            params,
        })
    }

    /// Same parameters in another float type.
    pub fn cast<G: Real>(&self) -> EncoderHead<G> {
        EncoderHead {
            dims: self.dims,
            hidden: self.hidden,
            params: self
                .params
                .iter()
                .map(|p| G::of(p.to_f64().unwrap()))
                .collect(),
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    pub(crate) fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.dims * self.hidden;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.hidden * NUM_CLASSES;
        (b1, w2, b2)
    }

    /// Runs the head on `b` rows of a flat `b × dims` input.
    pub fn forward(&self, inputs: &[f32]) -> Forward<F> {
        let (o_b1, o_w2, o_b2) = self.offsets();
        let h = self.hidden;
        let b = inputs.len() / self.dims;
        let p = &self.params;
        let mut hidden = Vec::with_capacity(b * h);
        let mut logits = Vec::with_capacity(b * NUM_CLASSES);
        for row in inputs.chunks_exact(self.dims) {
            let start = hidden.len();
            for k in 0..h {
                let mut z = p[o_b1 + k];
                for (d, &e) in row.iter().enumerate() {
                    z = z + p[d * h + k] * F::of(f64::from(e));
                }
                hidden.push(z.tanh());
            }
            let x = &hidden[start..start + h];
            for c in 0..NUM_CLASSES {
                let mut s = p[o_b2 + c];
                for (k, &xk) in x.iter().enumerate() {
                    s = s + p[o_w2 + k * NUM_CLASSES + c] * xk;
                }
                logits.push(s);
            }
        }
        Forward { hidden, logits }
    }

    pub fn predict(&self, inputs: &[f32]) -> Vec<StanceLabel> {
        self.forward(inputs)
            .logits
            .chunks_exact(NUM_CLASSES)
            .map(|l| {
                let mut best = 0;
                for c in 1..NUM_CLASSES {
                    if l[c] > l[best] {
                        best = c;
                    }
                }
                StanceLabel::from_index(best).expect("five classes")
            })
            .collect()
    }
}
