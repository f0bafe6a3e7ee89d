//! Cross-entropy, the pairwise cosine contrastive term and their sum, with
//! hand-written gradients through the encoder head.

use serde::{Deserialize, Serialize};

use super::head::{EncoderHead, NUM_CLASSES};
use super::Real;
use crate::corpus::StanceLabel;
use crate::error::{Error, Result};

/// Pair relation inside a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pair {
    Same,
    Different,
}

/// `b × b` matrix with `+1` where two batch items share a label, `-1`
/// otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairMatrix {
    b: usize,
    values: Vec<i8>,
}

impl PairMatrix {
    pub fn from_labels(labels: &[StanceLabel]) -> Self {
        let b = labels.len();
        let mut values = Vec::with_capacity(b * b);
        for li in labels {
            for lj in labels {
                values.push(if li == lj { 1 } else { -1 });
            }
        }
        Self { b, values }
    }

    pub fn size(&self) -> usize {
        self.b
    }

    pub fn value(&self, i: usize, j: usize) -> i8 {
        self.values[i * self.b + j]
    }

    pub fn pair(&self, i: usize, j: usize) -> Pair {
        if self.value(i, j) > 0 {
            Pair::Same
        } else {
            Pair::Different
        }
    }
}

/// Which terms enter the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub contrastive: bool,
    /// Margin below which different-label pairs cost nothing.
    pub beta: f64,
}

impl Default for Objective {
    fn default() -> Self {
        Self {
            contrastive: true,
            beta: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts<F> {
    pub ce: F,
    pub cl: F,
    pub total: F,
}

/// A batch of embedding rows with their labels.
#[derive(Debug, Clone)]
pub struct Batch {
    pub dims: usize,
    pub inputs: Vec<f32>,
    pub labels: Vec<StanceLabel>,
}

impl Batch {
    pub fn new(dims: usize, inputs: Vec<f32>, labels: Vec<StanceLabel>) -> Result<Self> {
        if inputs.len() != dims * labels.len() {
            return Err(Error::DimensionMismatch {
                expected: dims * labels.len(),
                actual: inputs.len(),
            });
        }
        Ok(Self {
            dims,
            inputs,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn pairs(&self) -> PairMatrix {
        PairMatrix::from_labels(&self.labels)
    }
}

/// `-log softmax(logits)[y]` with max-subtraction.
pub fn loss_ce<F: Real>(logits: &[F], y: StanceLabel) -> Result<F> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite logits".into()));
    }
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let lse = logits
        .iter()
        .map(|&v| (v - max).exp())
        .fold(F::zero(), |a, b| a + b)
        .ln()
        + max;
    Ok(lse - logits[y.index()])
}

/// Cosine of two vectors; errors on a zero vector.
pub fn cosine<F: Real>(a: &[F], b: &[F]) -> Result<F> {
    let (na, nb) = (l2(a), l2(b));
    if na == F::zero() || nb == F::zero() {
        return Err(Error::ZeroVector(None));
    }
    let dot = a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y);
    Ok(dot / (na * nb))
}

fn l2<F: Real>(v: &[F]) -> F {
    v.iter().fold(F::zero(), |acc, &x| acc + x * x).sqrt()
}

/// Contrastive cost of one pair as a function of its cosine.
///
/// Same-label pairs cost `e (1 - e^{cos - 1})` which spans `[0, e - 1/e]`;
/// different-label pairs cost `e^{max(0, cos - beta)} - 1`.
pub fn pair_cost<F: Real>(cos: F, pair: Pair, beta: F) -> F {
    let e = F::of(std::f64::consts::E);
    match pair {
        Pair::Same => e * (F::one() - (cos - F::one()).exp()),
        Pair::Different => (cos - beta).max(F::zero()).exp() - F::one(),
    }
}

/// Derivative of [`pair_cost`] with respect to the cosine. At the margin
/// kink (`cos == beta`) the zero one-sided derivative is used.
pub fn pair_cost_grad<F: Real>(cos: F, pair: Pair, beta: F) -> F {
    match pair {
        Pair::Same => -(F::of(std::f64::consts::E) * (cos - F::one()).exp()),
        Pair::Different if cos > beta => (cos - beta).exp(),
        Pair::Different => F::zero(),
    }
}

pub fn loss_cl_pair<F: Real>(xi: &[F], xj: &[F], pair: Pair, beta: F) -> Result<F> {
    Ok(pair_cost(cosine(xi, xj)?, pair, beta))
}

/// Mean of the pair cost over unordered pairs `i < j` of a `b × width` matrix.
pub fn loss_cl_batch<F: Real>(reps: &[F], width: usize, pairs: &PairMatrix, beta: F) -> Result<F> {
    let b = pairs.size();
    if b < 2 {
        return Err(Error::invalid("contrastive loss needs at least two items"));
    }
    if reps.len() != b * width {
        return Err(Error::DimensionMismatch {
            expected: b * width,
            actual: reps.len(),
        });
    }
    let mut sum = F::zero();
    for i in 0..b {
        for j in i + 1..b {
            let (xi, xj) = (
                &reps[i * width..(i + 1) * width],
                &reps[j * width..(j + 1) * width],
            );
            sum = sum + loss_cl_pair(xi, xj, pairs.pair(i, j), beta)?;
        }
    }
    Ok(sum / F::of((b * (b - 1) / 2) as f64))
}

/// Objective value plus, for every different-label pair, which side of the
/// margin its cosine lies on. Gradient checks use the latter to skip
/// perturbations that straddle the kink.
pub(crate) struct Evaluation<F> {
    pub parts: LossParts<F>,
    pub margin_sides: Vec<std::cmp::Ordering>,
}

pub(crate) fn evaluate<F: Real>(
    head: &EncoderHead<F>,
    batch: &Batch,
    pairs: &PairMatrix,
    obj: &Objective,
) -> Result<Evaluation<F>> {
    let fwd = head.forward(&batch.inputs);
    let b = batch.len();
    if b == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let mut ce = F::zero();
    for (logits, &y) in fwd.logits.chunks_exact(NUM_CLASSES).zip(&batch.labels) {
        ce = ce + loss_ce(logits, y)?;
    }
    ce = ce / F::of(b as f64);

    let mut margin_sides = Vec::new();
    let cl = if obj.contrastive {
        let h = head.hidden();
        let beta = F::of(obj.beta);
        for i in 0..b {
            for j in i + 1..b {
                if pairs.pair(i, j) == Pair::Different {
                    let c = cosine(
                        &fwd.hidden[i * h..(i + 1) * h],
                        &fwd.hidden[j * h..(j + 1) * h],
                    )?;
                    margin_sides.push(c.partial_cmp(&beta).unwrap_or(std::cmp::Ordering::Equal));
                }
            }
        }
        loss_cl_batch(&fwd.hidden, h, pairs, beta)?
    } else {
        F::zero()
    };
    Ok(Evaluation {
        parts: LossParts {
            ce,
            cl,
            total: ce + cl,
        },
        margin_sides,
    })
}

/// `L = mean CE + mean pairwise contrastive term` for one batch.
pub fn total_loss<F: Real>(
    head: &EncoderHead<F>,
    batch: &Batch,
    pairs: &PairMatrix,
    obj: &Objective,
) -> Result<LossParts<F>> {
    evaluate(head, batch, pairs, obj).map(|e| e.parts)
}

/// Objective value and its gradient with respect to every head parameter.
pub fn loss_and_grad<F: Real>(
    head: &EncoderHead<F>,
    batch: &Batch,
    pairs: &PairMatrix,
    obj: &Objective,
) -> Result<(LossParts<F>, Vec<F>)> {
    let b = batch.len();
    if b == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let h = head.hidden();
    let dims = head.dims();
    let (o_b1, o_w2, o_b2) = head.offsets();
    let p = head.params();
    let fwd = head.forward(&batch.inputs);
    let inv_b = F::of(1.0 / b as f64);

    // dL/dx for each representation
    let mut dx = vec![F::zero(); b * h];
    let mut grad = vec![F::zero(); p.len()];
    let mut ce = F::zero();

    for i in 0..b {
        let logits = &fwd.logits[i * NUM_CLASSES..(i + 1) * NUM_CLASSES];
        let y = batch.labels[i].index();
        ce = ce + loss_ce(logits, batch.labels[i])?;
        let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
        let exps: Vec<F> = logits.iter().map(|&v| (v - max).exp()).collect();
        let z = exps.iter().fold(F::zero(), |a, &v| a + v);
        let x = &fwd.hidden[i * h..(i + 1) * h];
        for c in 0..NUM_CLASSES {
            let target = if c == y { F::one() } else { F::zero() };
            let dlogit = (exps[c] / z - target) * inv_b;
            grad[o_b2 + c] = grad[o_b2 + c] + dlogit;
            for k in 0..h {
                grad[o_w2 + k * NUM_CLASSES + c] = grad[o_w2 + k * NUM_CLASSES + c] + x[k] * dlogit;
                dx[i * h + k] = dx[i * h + k] + p[o_w2 + k * NUM_CLASSES + c] * dlogit;
            }
        }
    }
    ce = ce * inv_b;

    let cl = if obj.contrastive {
        if b < 2 {
            return Err(Error::invalid("contrastive loss needs at least two items"));
        }
        let beta = F::of(obj.beta);
        let n_pairs = F::of((b * (b - 1) / 2) as f64);
        let norms: Vec<F> = (0..b)
            .map(|i| l2(&fwd.hidden[i * h..(i + 1) * h]))
            .collect();
        if norms.iter().any(|&n| n == F::zero()) {
            return Err(Error::ZeroVector(None));
        }
        let mut sum = F::zero();
        for i in 0..b {
            for j in i + 1..b {
                let xi = &fwd.hidden[i * h..(i + 1) * h];
                let xj = &fwd.hidden[j * h..(j + 1) * h];
                let dot = xi.iter().zip(xj).fold(F::zero(), |a, (&u, &v)| a + u * v);
                let (ni, nj) = (norms[i], norms[j]);
                let c = dot / (ni * nj);
                let pair = pairs.pair(i, j);
                sum = sum + pair_cost(c, pair, beta);
                let g = pair_cost_grad(c, pair, beta) / n_pairs;
                if g == F::zero() {
                    continue;
                }
                for k in 0..h {
                    let dci = xj[k] / (ni * nj) - c * xi[k] / (ni * ni);
                    let dcj = xi[k] / (ni * nj) - c * xj[k] / (nj * nj);
                    dx[i * h + k] = dx[i * h + k] + g * dci;
                    dx[j * h + k] = dx[j * h + k] + g * dcj;
                }
            }
        }
        sum / n_pairs
    } else {
        F::zero()
    };

    // back through tanh and the first layer
    for i in 0..b {
        let row = &batch.inputs[i * dims..(i + 1) * dims];
        for k in 0..h {
            let x = fwd.hidden[i * h + k];
            let dz = dx[i * h + k] * (F::one() - x * x);
            grad[o_b1 + k] = grad[o_b1 + k] + dz;
            for (d, &e) in row.iter().enumerate() {
                grad[d * h + k] = grad[d * h + k] + F::of(f64::from(e)) * dz;
            }
        }
    }

    Ok((
        LossParts {
            ce,
            cl,
            total: ce + cl,
        },
        grad,
    ))
}
