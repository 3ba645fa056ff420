//! Dense numerical kernel: matrix ops, activations, batch normalization,
//! reverse-mode gradients, the Adam optimizer, and a finite-difference
//! gradient checker.

pub mod adam;
pub mod batchnorm;
pub mod gradcheck;
pub mod layout;
pub mod matrix;
pub mod tape;

pub use adam::{adam_update, AdamState};
pub use batchnorm::{batch_norm, BatchNormState, BnMode};
pub use gradcheck::{grad_check, GradCheckReport};
pub use layout::{ParamLayout, ParamSpec};
pub use matrix::{dot, l2_norm, Matrix};
pub use tape::{BufId, Tape};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Elementwise activation kinds used by the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed in terms of input `x` and output `y`.
    #[inline]
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// y = Wx + b for a single vector.
pub fn linear(x: &[f64], w: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if w.cols() != x.len() || w.rows() != b.len() {
        return Err(Error::Dimension(format!(
            "linear: W is {}x{}, x has {}, b has {}",
            w.rows(),
            w.cols(),
            x.len(),
            b.len()
        )));
    }
    Ok(w.iter_rows()
        .zip(b)
        .map(|(row, &bias)| dot(row, x) + bias)
        .collect())
}

/// Y = X W^T + b applied row-wise: X is B x n, W is m x n, b has m.
pub fn linear_batch(x: &Matrix, w: &Matrix, b: &[f64]) -> Result<Matrix> {
    if w.cols() != x.cols() || w.rows() != b.len() {
        return Err(Error::Dimension(format!(
            "linear_batch: W is {}x{}, X is {}x{}, b has {}",
            w.rows(),
            w.cols(),
            x.rows(),
            x.cols(),
            b.len()
        )));
    }
    let mut out = x.matmul_transpose(w)?;
    for r in 0..out.rows() {
        for (o, &bias) in out.row_mut(r).iter_mut().zip(b) {
            *o += bias;
        }
    }
    Ok(out)
}

/// Elementwise activation over a vector.
pub fn activate(x: &[f64], kind: Activation) -> Vec<f64> {
    x.iter().map(|&v| kind.apply(v)).collect()
}

/// Numerically stable softmax; entries sum to 1 and the result is invariant
/// under adding a constant to all logits.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Dimension("softmax of empty logits".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// log(sum(exp(logits))) with max-subtraction.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_identity_case() {
        let w = Matrix::identity(2);
        let y = linear(&[1.0, 2.0], &w, &[0.0, 0.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0]);
    }

    #[test]
    fn linear_hand_arithmetic() {
        let w = Matrix::new(1, 2, vec![2.0, 3.0]);
        let y = linear(&[1.0, 1.0], &w, &[1.0]).unwrap();
        assert_eq!(y, vec![6.0]);
    }

    #[test]
    fn linear_shape_mismatch() {
        let w = Matrix::new(2, 3, vec![0.0; 6]);
        assert!(matches!(
            linear(&[1.0, 2.0], &w, &[0.0, 0.0]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn activations_match_definitions() {
        assert_eq!(activate(&[-1.0, 0.0, 2.0], Activation::Relu), vec![0.0, 0.0, 2.0]);
        assert_eq!(activate(&[0.0], Activation::Sigmoid), vec![0.5]);
        assert_eq!(activate(&[3.5, -1.0], Activation::Identity), vec![3.5, -1.0]);
    }

    #[test]
    fn softmax_uniform_on_equal_logits() {
        let p = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_is_stable_for_huge_logits() {
        let p = softmax(&[1000.0, 1000.0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!((p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn softmax_closed_form() {
        // softmax([ln 1, ln 3]) = [1/4, 3/4]
        let p = softmax(&[1.0_f64.ln(), 3.0_f64.ln()]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-14);
        assert!((p[1] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn softmax_rejects_empty() {
        assert!(matches!(softmax(&[]), Err(Error::Dimension(_))));
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            logits in proptest::collection::vec(-30.0_f64..30.0, 1..12),
            shift in -100.0_f64..100.0,
        ) {
            let p = softmax(&logits).unwrap();
            let total: f64 = p.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| v > 0.0 && v <= 1.0));

            let shifted: Vec<f64> = logits.iter().map(|&v| v + shift).collect();
            let q = softmax(&shifted).unwrap();
            for (a, b) in p.iter().zip(q.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
