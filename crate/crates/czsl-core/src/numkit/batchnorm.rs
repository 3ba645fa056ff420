//! Batch normalization over the row dimension (per-column statistics).

use super::matrix::Matrix;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BnMode {
    Train,
    Eval,
}

/// Full batch-norm state: affine parameters plus running statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchNormState {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    /// Weight on the previous running estimate; in (0, 1).
    pub momentum: f64,
    pub epsilon: f64,
    pub mode: BnMode,
}

impl BatchNormState {
    /// gamma = 1, beta = 0, running stats at (0, 1).
    pub fn new(dim: usize) -> Self {
        BatchNormState {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum: 0.9,
            epsilon: 1e-5,
            mode: BnMode::Train,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }
}

/// Per-column batch statistics of a B x d matrix (biased variance).
pub fn column_stats(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let (b, d) = (x.rows(), x.cols());
    let mut mean = vec![0.0; d];
    for row in x.iter_rows() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= b as f64;
    }
    let mut var = vec![0.0; d];
    for row in x.iter_rows() {
        for ((v, &m), &xv) in var.iter_mut().zip(&mean).zip(row) {
            let c = xv - m;
            *v += c * c;
        }
    }
    for v in &mut var {
        *v /= b as f64;
    }
    (mean, var)
}

/// Normalize with given statistics: (x - mean) / sqrt(var + eps) * gamma + beta.
pub fn normalize_with(
    x: &Matrix,
    mean: &[f64],
    var: &[f64],
    gamma: &[f64],
    beta: &[f64],
    epsilon: f64,
) -> Matrix {
    let d = x.cols();
    let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + epsilon).sqrt()).collect();
    let mut out = Matrix::zeros(x.rows(), d);
    for r in 0..x.rows() {
        let src = x.row(r);
        let dst = out.row_mut(r);
        for j in 0..d {
            dst[j] = (src[j] - mean[j]) * inv_std[j] * gamma[j] + beta[j];
        }
    }
    out
}

/// Batch norm in the state's mode. Train mode normalizes with batch
/// statistics and folds them into the running estimates; eval mode uses the
/// running statistics unchanged.
pub fn batch_norm(x: &Matrix, state: &mut BatchNormState) -> Result<Matrix> {
    if x.cols() != state.dim() {
        return Err(Error::Dimension(format!(
            "batch_norm: input has {} columns, state has {}",
            x.cols(),
            state.dim()
        )));
    }
    match state.mode {
        BnMode::Train => {
            if x.rows() < 2 {
                return Err(Error::DegenerateBatch(format!(
                    "batch_norm train mode needs at least 2 rows, got {}",
                    x.rows()
                )));
            }
            let (mean, var) = column_stats(x);
            let out = normalize_with(x, &mean, &var, &state.gamma, &state.beta, state.epsilon);
            let m = state.momentum;
            for j in 0..state.dim() {
                state.running_mean[j] = m * state.running_mean[j] + (1.0 - m) * mean[j];
                state.running_var[j] = m * state.running_var[j] + (1.0 - m) * var[j];
            }
            Ok(out)
        }
        BnMode::Eval => Ok(normalize_with(
            x,
            &state.running_mean,
            &state.running_var,
            &state.gamma,
            &state.beta,
            state.epsilon,
        )),
    }
}
