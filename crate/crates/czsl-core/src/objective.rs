//! Loss functions: classification cross-entropy, the inverse-regularization
//! (cyclic-consistency) term, their weighted joint objective, and the
//! Gaussian log-likelihood identity relating the IR term to the likelihood
//! bound it descends from.

use crate::encoder::Model;
use crate::error::{Error, Result};
use crate::numkit::matrix::Matrix;
use crate::numkit::softmax;
use crate::numkit::tape::Tape;
use serde::{Deserialize, Serialize};

/// Components of the joint objective; `total = ce + lambda * ir` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub ir: f64,
    pub lambda: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(ce: f64, ir: f64, lambda: f64) -> Result<Self> {
        if lambda < 0.0 {
            return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(LossBreakdown { ce, ir, lambda, total: ce + lambda * ir })
    }
}

/// Mean over the batch of -log softmax(logits_i)[label_i].
pub fn cross_entropy_loss(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    if logits.rows() == 0 {
        return Err(Error::Batch("cross_entropy over an empty batch".into()));
    }
    if labels.len() != logits.rows() {
        return Err(Error::Dimension(format!(
            "cross_entropy: {} labels for {} rows",
            labels.len(),
            logits.rows()
        )));
    }
    let c = logits.cols();
    let mut loss = 0.0;
    for (row, &y) in logits.iter_rows().zip(labels) {
        if y >= c {
            return Err(Error::Label(format!("label {y} out of range 0..{c}")));
        }
        let p = softmax(row)?;
        loss -= p[y].max(f64::MIN_POSITIVE).ln();
    }
    Ok(loss / logits.rows() as f64)
}

/// Sum of squared reconstruction errors over the given attribute rows,
/// using the eval-mode (running-statistics) embedding path.
pub fn ir_loss(attributes: &Matrix, model: &Model) -> Result<f64> {
    let z = model.embed_eval(attributes)?;
    let reconstructed = model.inverse_regress_batch(&z)?;
    Ok(reconstructed
        .as_slice()
        .iter()
        .zip(attributes.as_slice())
        .map(|(&r, &a)| (r - a) * (r - a))
        .sum())
}

/// Evaluate the joint training objective on a throwaway tape so its value is
/// identical to what the training path optimizes (train-mode batch norm).
/// Running statistics are not mutated. `labels` index into `attrs` rows.
pub fn joint_loss(
    model: &Model,
    attrs: &Matrix,
    features: &Matrix,
    labels: &[usize],
    lambda: f64,
) -> Result<LossBreakdown> {
    let mut tape = Tape::new();
    let binding = model.register(&mut tape);
    let graph = model.joint_loss_on_tape(&mut tape, &binding, attrs, features, labels, lambda)?;
    let ce = tape.value(graph.ce).as_slice()[0];
    let ir = tape.value(graph.ir).as_slice()[0];
    LossBreakdown::new(ce, ir, lambda)
}

/// Both sides of -log N(a; r, I) = 0.5 * ||a - r||^2 + (D/2) ln(2 pi).
///
/// The left side is evaluated numerically through the per-coordinate normal
/// density (exp then ln), the right through the closed-form sum of squares,
/// so agreement genuinely exercises the identity.
pub fn gaussian_loglik_identity(a: &[f64], reconstruction: &[f64]) -> (f64, f64) {
    assert_eq!(a.len(), reconstruction.len(), "dimension mismatch");
    let two_pi = 2.0 * std::f64::consts::PI;
    let norm = 1.0 / two_pi.sqrt();
    let mut neg_loglik = 0.0;
    let mut half_sq_err = 0.0;
    for (&ai, &ri) in a.iter().zip(reconstruction) {
        let diff = ai - ri;
        let pdf = norm * (-0.5 * diff * diff).exp();
        neg_loglik -= pdf.ln();
        half_sq_err += 0.5 * diff * diff;
    }
    (neg_loglik, half_sq_err)
}
