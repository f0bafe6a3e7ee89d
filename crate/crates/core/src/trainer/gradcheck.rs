//! Central finite-difference verification of the analytic gradients.

use super::head::EncoderHead;
use super::loss::{evaluate, loss_and_grad, Batch, Objective};
use super::Real;
use crate::error::Result;

/// Step used when none is given; small enough that truncation error stays
/// below f64 tolerances on small heads.
pub const DEFAULT_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// `max |g_a - g_fd| / max(1e-8, |g_a| + |g_fd|)` over checked parameters.
    pub max_rel_error: f64,
    pub worst_param: Option<usize>,
    pub checked: usize,
    /// Parameters whose perturbation moved a different-label pair across
    /// the margin, where the loss has a kink.
    pub skipped: usize,
}

/// Compares the analytic gradient of the batch objective, computed in the
/// head's float type, with central differences of step `eps` evaluated in
/// f64 on the same parameters.
pub fn grad_check<F: Real>(
    head: &EncoderHead<F>,
    batch: &Batch,
    obj: &Objective,
    eps: f64,
) -> Result<GradCheckReport> {
    let pairs = batch.pairs();
    let (_, analytic) = loss_and_grad(head, batch, &pairs, obj)?;
    let reference: EncoderHead<f64> = head.cast();
    let centre = evaluate(&reference, batch, &pairs, obj)?.margin_sides;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: None,
        checked: 0,
        skipped: 0,
    };
    let mut probe = reference.clone();
    for (i, (&p, g)) in reference.params().iter().zip(&analytic).enumerate() {
        let up = p + eps;
        let down = p - eps;

        probe.params_mut()[i] = up;
        let plus = evaluate(&probe, batch, &pairs, obj)?;
        probe.params_mut()[i] = down;
        let minus = evaluate(&probe, batch, &pairs, obj)?;
        probe.params_mut()[i] = p;

        if plus.margin_sides != centre || minus.margin_sides != centre {
            report.skipped += 1;
            continue;
        }
        let fd = (plus.parts.total - minus.parts.total) / (up - down);
        let ga = g.to_f64().unwrap();
        let rel = (ga - fd).abs() / (ga.abs() + fd.abs()).max(1e-8);
        report.checked += 1;
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_param = Some(i);
        }
    }
    Ok(report)
}
