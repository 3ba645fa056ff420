//! Reverse-mode gradient tape.
//!
//! Records matrix-level operations during a forward pass and replays them in
//! reverse to accumulate gradients via the chain rule. Parameters are
//! snapshotted at registration, so later mutation of the originals cannot
//! corrupt a recorded pass. Every op carries a hand-derived local VJP; the
//! finite-difference checker in `gradcheck` guards all of them.

use super::batchnorm;
use super::matrix::Matrix;
use super::Activation;
use crate::error::{Error, Result};

pub type BufId = usize;

struct Slot {
    value: Matrix,
    trainable: bool,
}

enum Op {
    /// out = X W^T + b, applied row-wise. X: B x n, W: m x n, b: m x 1.
    Linear { x: BufId, w: BufId, b: BufId, out: BufId },
    /// Elementwise activation; inputs are read back from the slot.
    Activate { x: BufId, out: BufId, kind: Activation },
    /// out = a .* b
    MulElem { a: BufId, b: BufId, out: BufId },
    /// out = a + b
    AddElem { a: BufId, b: BufId, out: BufId },
    /// Train-mode batch norm with saved batch statistics.
    BatchNorm {
        x: BufId,
        gamma: BufId,
        beta: BufId,
        out: BufId,
        mean: Vec<f64>,
        inv_std: Vec<f64>,
    },
    /// out[i][y] = x_i . z_y with constant features X. Z: C x d, X: B x d.
    DotLogits { z: BufId, x: Matrix, out: BufId },
    /// out[i][y] = exp(log_scale) * cos(x_i, z_y).
    CosineLogits {
        z: BufId,
        log_scale: BufId,
        x: Matrix,
        x_norms: Vec<f64>,
        out: BufId,
    },
    /// Mean over rows of -log softmax(logits_i)[label_i]; saves the softmax.
    CrossEntropyMean {
        logits: BufId,
        labels: Vec<usize>,
        probs: Matrix,
        out: BufId,
    },
    /// out = sum((a - target)^2) over all entries.
    SqDiffSum { a: BufId, target: Matrix, out: BufId },
    /// out = sum(a^2) over all entries.
    SumSquares { a: BufId, out: BufId },
    /// out = wa * a + wb * b on equal shapes.
    AddWeighted { a: BufId, b: BufId, wa: f64, wb: f64, out: BufId },
}

/// The tape itself: an arena of value buffers plus the recorded op list.
pub struct Tape {
    slots: Vec<Slot>,
    ops: Vec<Op>,
    grads: Vec<Option<Matrix>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { slots: Vec::new(), ops: Vec::new(), grads: Vec::new() }
    }

    fn push(&mut self, value: Matrix, trainable: bool) -> BufId {
        let id = self.slots.len();
        self.slots.push(Slot { value, trainable });
        self.grads.push(None);
        id
    }

    /// Register a non-trainable input.
    pub fn constant(&mut self, value: Matrix) -> BufId {
        self.push(value, false)
    }

    /// Register a trainable parameter (the tape owns this snapshot).
    pub fn param(&mut self, value: Matrix) -> BufId {
        self.push(value, true)
    }

    pub fn value(&self, id: BufId) -> &Matrix {
        &self.slots[id].value
    }

    pub fn is_trainable(&self, id: BufId) -> bool {
        self.slots[id].trainable
    }

    /// Gradient accumulated into `id`, if any flowed there.
    pub fn grad(&self, id: BufId) -> Option<&Matrix> {
        self.grads[id].as_ref()
    }

    /// Gradient for a buffer, zeros if nothing flowed to it.
    pub fn grad_or_zeros(&self, id: BufId) -> Matrix {
        match &self.grads[id] {
            Some(g) => g.clone(),
            None => Matrix::zeros(self.slots[id].value.rows(), self.slots[id].value.cols()),
        }
    }

    // ── Recorded operations ──────────────────────────────────────────

    pub fn linear(&mut self, x: BufId, w: BufId, b: BufId) -> Result<BufId> {
        let bv = self.value(b);
        if bv.cols() != 1 {
            return Err(Error::Dimension(format!(
                "linear: bias must be a column vector, got {}x{}",
                bv.rows(),
                bv.cols()
            )));
        }
        let out = super::linear_batch(self.value(x), self.value(w), self.value(b).as_slice())?;
        let out = self.push(out, false);
        self.ops.push(Op::Linear { x, w, b, out });
        Ok(out)
    }

    pub fn activate(&mut self, x: BufId, kind: Activation) -> BufId {
        let xin = self.value(x);
        let data: Vec<f64> = xin.as_slice().iter().map(|&v| kind.apply(v)).collect();
        let value = Matrix::new(xin.rows(), xin.cols(), data);
        let out = self.push(value, false);
        self.ops.push(Op::Activate { x, out, kind });
        out
    }

    pub fn mul_elem(&mut self, a: BufId, b: BufId) -> Result<BufId> {
        self.check_same_shape(a, b, "mul_elem")?;
        let data: Vec<f64> = self
            .value(a)
            .as_slice()
            .iter()
            .zip(self.value(b).as_slice())
            .map(|(&x, &y)| x * y)
            .collect();
        let value = Matrix::new(self.value(a).rows(), self.value(a).cols(), data);
        let out = self.push(value, false);
        self.ops.push(Op::MulElem { a, b, out });
        Ok(out)
    }

    pub fn add_elem(&mut self, a: BufId, b: BufId) -> Result<BufId> {
        self.check_same_shape(a, b, "add_elem")?;
        let data: Vec<f64> = self
            .value(a)
            .as_slice()
            .iter()
            .zip(self.value(b).as_slice())
            .map(|(&x, &y)| x + y)
            .collect();
        let value = Matrix::new(self.value(a).rows(), self.value(a).cols(), data);
        let out = self.push(value, false);
        self.ops.push(Op::AddElem { a, b, out });
        Ok(out)
    }

    /// Train-mode batch norm. Returns the output buffer plus the batch mean
    /// and (biased) variance so the caller can update running statistics.
    pub fn batch_norm(
        &mut self,
        x: BufId,
        gamma: BufId,
        beta: BufId,
        epsilon: f64,
    ) -> Result<(BufId, Vec<f64>, Vec<f64>)> {
        let xv = self.value(x);
        let d = xv.cols();
        if xv.rows() < 2 {
            return Err(Error::DegenerateBatch(format!(
                "batch_norm train mode needs at least 2 rows, got {}",
                xv.rows()
            )));
        }
        if self.value(gamma).len() != d || self.value(beta).len() != d {
            return Err(Error::Dimension(format!(
                "batch_norm: gamma/beta length must be {d}"
            )));
        }
        let (mean, var) = batchnorm::column_stats(xv);
        let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + epsilon).sqrt()).collect();
        let value = batchnorm::normalize_with(
            xv,
            &mean,
            &var,
            self.value(gamma).as_slice(),
            self.value(beta).as_slice(),
            epsilon,
        );
        let out = self.push(value, false);
        self.ops.push(Op::BatchNorm { x, gamma, beta, out, mean: mean.clone(), inv_std });
        Ok((out, mean, var))
    }

    /// Dot-product class logits against constant features.
    pub fn dot_logits(&mut self, z: BufId, x: &Matrix) -> Result<BufId> {
        let zv = self.value(z);
        if zv.cols() != x.cols() {
            return Err(Error::Dimension(format!(
                "dot_logits: Z is {}x{}, X is {}x{}",
                zv.rows(),
                zv.cols(),
                x.rows(),
                x.cols()
            )));
        }
        let value = x.matmul_transpose(zv)?;
        let out = self.push(value, false);
        self.ops.push(Op::DotLogits { z, x: x.clone(), out });
        Ok(out)
    }

    /// Scaled cosine class logits against constant features; the scale is
    /// carried as a 1x1 log-scale buffer so it stays positive.
    pub fn cosine_logits(&mut self, z: BufId, log_scale: BufId, x: &Matrix) -> Result<BufId> {
        let zv = self.value(z);
        if zv.cols() != x.cols() {
            return Err(Error::Dimension(format!(
                "cosine_logits: Z is {}x{}, X is {}x{}",
                zv.rows(),
                zv.cols(),
                x.rows(),
                x.cols()
            )));
        }
        if self.value(log_scale).len() != 1 {
            return Err(Error::Dimension("cosine_logits: scale must be 1x1".into()));
        }
        let mut x_norms = Vec::with_capacity(x.rows());
        for i in 0..x.rows() {
            let n = super::l2_norm(x.row(i));
            if n == 0.0 {
                return Err(Error::DegenerateVector(format!(
                    "cosine_logits: feature row {i} has zero norm"
                )));
            }
            x_norms.push(n);
        }
        for y in 0..zv.rows() {
            if super::l2_norm(zv.row(y)) == 0.0 {
                return Err(Error::DegenerateVector(format!(
                    "cosine_logits: embedding row {y} has zero norm"
                )));
            }
        }
        let scale = self.value(log_scale).as_slice()[0].exp();
        let zv = self.value(z);
        let mut value = Matrix::zeros(x.rows(), zv.rows());
        for i in 0..x.rows() {
            for y in 0..zv.rows() {
                let zr = zv.row(y);
                let c = super::dot(x.row(i), zr) / (x_norms[i] * super::l2_norm(zr));
                value.set(i, y, scale * c);
            }
        }
        let out = self.push(value, false);
        self.ops.push(Op::CosineLogits { z, log_scale, x: x.clone(), x_norms, out });
        Ok(out)
    }

    /// Batch-averaged cross-entropy against integer labels.
    pub fn cross_entropy_mean(&mut self, logits: BufId, labels: &[usize]) -> Result<BufId> {
        let lv = self.value(logits);
        let (b, c) = (lv.rows(), lv.cols());
        if b == 0 {
            return Err(Error::Batch("cross_entropy over an empty batch".into()));
        }
        if labels.len() != b {
            return Err(Error::Dimension(format!(
                "cross_entropy: {} labels for {} rows",
                labels.len(),
                b
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(Error::Label(format!("label {bad} out of range 0..{c}")));
        }
        let mut probs = Matrix::zeros(b, c);
        let mut loss = 0.0;
        for i in 0..b {
            let p = super::softmax(lv.row(i))?;
            loss -= p[labels[i]].max(f64::MIN_POSITIVE).ln();
            probs.row_mut(i).copy_from_slice(&p);
        }
        loss /= b as f64;
        let out = self.push(Matrix::new(1, 1, vec![loss]), false);
        self.ops.push(Op::CrossEntropyMean { logits, labels: labels.to_vec(), probs, out });
        Ok(out)
    }

    /// Sum of squared differences against a constant target of equal shape.
    pub fn sq_diff_sum(&mut self, a: BufId, target: &Matrix) -> Result<BufId> {
        let av = self.value(a);
        if av.rows() != target.rows() || av.cols() != target.cols() {
            return Err(Error::Dimension(format!(
                "sq_diff_sum: value is {}x{}, target is {}x{}",
                av.rows(),
                av.cols(),
                target.rows(),
                target.cols()
            )));
        }
        let s: f64 = av
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(&x, &t)| (x - t) * (x - t))
            .sum();
        let out = self.push(Matrix::new(1, 1, vec![s]), false);
        self.ops.push(Op::SqDiffSum { a, target: target.clone(), out });
        Ok(out)
    }

    pub fn sum_squares(&mut self, a: BufId) -> BufId {
        let s: f64 = self.value(a).as_slice().iter().map(|&x| x * x).sum();
        let out = self.push(Matrix::new(1, 1, vec![s]), false);
        self.ops.push(Op::SumSquares { a, out });
        out
    }

    pub fn add_weighted(&mut self, a: BufId, b: BufId, wa: f64, wb: f64) -> Result<BufId> {
        self.check_same_shape(a, b, "add_weighted")?;
        let data: Vec<f64> = self
            .value(a)
            .as_slice()
            .iter()
            .zip(self.value(b).as_slice())
            .map(|(&x, &y)| wa * x + wb * y)
            .collect();
        let value = Matrix::new(self.value(a).rows(), self.value(a).cols(), data);
        let out = self.push(value, false);
        self.ops.push(Op::AddWeighted { a, b, wa, wb, out });
        Ok(out)
    }

    fn check_same_shape(&self, a: BufId, b: BufId, what: &str) -> Result<()> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() || av.cols() != bv.cols() {
            return Err(Error::Dimension(format!(
                "{what}: {}x{} vs {}x{}",
                av.rows(),
                av.cols(),
                bv.rows(),
                bv.cols()
            )));
        }
        Ok(())
    }

    // ── Backward pass ────────────────────────────────────────────────

    /// Accumulate d(loss)/d(buffer) for every buffer on the tape. The root
    /// must be a 1x1 scalar; its own gradient is seeded with 1.
    pub fn backward(&mut self, loss: BufId) -> Result<()> {
        if self.slots[loss].value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward root must be scalar, got {}x{}",
                self.slots[loss].value.rows(),
                self.slots[loss].value.cols()
            )));
        }
        self.grads[loss] = Some(Matrix::new(1, 1, vec![1.0]));
        let Tape { slots, ops, grads } = self;
        for op in ops.iter().rev() {
            backward_op(op, slots, grads);
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Matrix>], id: BufId, delta: Matrix) {
    match &mut grads[id] {
        Some(g) => {
            for (gv, dv) in g.as_mut_slice().iter_mut().zip(delta.as_slice()) {
                *gv += dv;
            }
        }
        None => grads[id] = Some(delta),
    }
}

fn backward_op(op: &Op, slots: &[Slot], grads: &mut [Option<Matrix>]) {
    match op {
        Op::Linear { x, w, b, out } => {
            let d_out = match &grads[*out] {
                Some(g) => g.clone(),
                None => return,
            };
            let xv = &slots[*x].value;
            let wv = &slots[*w].value;
            // dX = dY @ W, dW = dY^T @ X, db = column sums of dY.
            let d_x = d_out.matmul(wv).expect("shapes fixed at record time");
            accumulate(grads, *x, d_x);
            let d_w = d_out.transpose().matmul(xv).expect("shapes fixed at record time");
            accumulate(grads, *w, d_w);
            let m = wv.rows();
            let mut d_b = vec![0.0; m];
            for row in d_out.iter_rows() {
                for (acc, &v) in d_b.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            accumulate(grads, *b, Matrix::new(m, 1, d_b));
        }
        Op::Activate { x, out, kind } => {
            let d_out = match &grads[*out] {
                Some(g) => g,
                None => return,
            };
            let xv = &slots[*x].value;
            let yv = &slots[*out].value;
            let data: Vec<f64> = d_out
                .as_slice()
                .iter()
                .zip(xv.as_slice())
                .zip(yv.as_slice())
                .map(|((&d, &xi), &yi)| d * kind.derivative(xi, yi))
                .collect();
            accumulate(grads, *x, Matrix::new(xv.rows(), xv.cols(), data));
        }
        Op::MulElem { a, b, out } => {
            let d_out = match &grads[*out] {
                Some(g) => g.clone(),
                None => return,
            };
            let av = &slots[*a].value;
            let bv = &slots[*b].value;
            let d_a: Vec<f64> = d_out
                .as_slice()
                .iter()
                .zip(bv.as_slice())
                .map(|(&d, &v)| d * v)
                .collect();
            let d_b: Vec<f64> = d_out
                .as_slice()
                .iter()
                .zip(av.as_slice())
                .map(|(&d, &v)| d * v)
                .collect();
            accumulate(grads, *a, Matrix::new(av.rows(), av.cols(), d_a));
            accumulate(grads, *b, Matrix::new(bv.rows(), bv.cols(), d_b));
        }
        Op::AddElem { a, b, out } => {
            let d_out = match &grads[*out] {
                Some(g) => g.clone(),
                None => return,
            };
            accumulate(grads, *a, d_out.clone());
            accumulate(grads, *b, d_out);
        }
        Op::BatchNorm { x, gamma, beta, out, mean, inv_std } => {
            let d_out = match &grads[*out] {
                Some(g) => g.clone(),
                None => return,
            };
            let xv = &slots[*x].value;
            let gv = slots[*gamma].value.as_slice();
            let (rows, d) = (xv.rows(), xv.cols());
            let n = rows as f64;

            let mut d_gamma = vec![0.0; d];
            let mut d_beta = vec![0.0; d];
            let mut sum_dxhat = vec![0.0; d];
            let mut sum_dxhat_xhat = vec![0.0; d];
            for r in 0..rows {
                let xr = xv.row(r);
                let dr = d_out.row(r);
                for j in 0..d {
                    let xhat = (xr[j] - mean[j]) * inv_std[j];
                    let dxhat = dr[j] * gv[j];
                    d_gamma[j] += dr[j] * xhat;
                    d_beta[j] += dr[j];
                    sum_dxhat[j] += dxhat;
                    sum_dxhat_xhat[j] += dxhat * xhat;
                }
            }
            let mut d_x = Matrix::zeros(rows, d);
            for r in 0..rows {
                let xr = xv.row(r);
                let dr = d_out.row(r);
                let dst = d_x.row_mut(r);
                for j in 0..d {
                    let xhat = (xr[j] - mean[j]) * inv_std[j];
                    let dxhat = dr[j] * gv[j];
                    dst[j] =
                        inv_std[j] * (dxhat - sum_dxhat[j] / n - xhat * sum_dxhat_xhat[j] / n);
                }
            }
            accumulate(grads, *x, d_x);
            accumulate(grads, *gamma, Matrix::new(d, 1, d_gamma));
            accumulate(grads, *beta, Matrix::new(d, 1, d_beta));
        }
        Op::DotLogits { z, x, out } => {
            let d_out = match &grads[*out] {
                Some(g) => g,
                None => return,
            };
            // dZ = dOut^T @ X
            let d_z = d_out.transpose().matmul(x).expect("shapes fixed at record time");
            accumulate(grads, *z, d_z);
        }
        Op::CosineLogits { z, log_scale, x, x_norms, out } => {
            let d_out = match &grads[*out] {
                Some(g) => g.clone(),
                None => return,
            };
            let zv = &slots[*z].value;
            let yv = &slots[*out].value;
            let scale = slots[*log_scale].value.as_slice()[0].exp();
            let (b_rows, c_rows, d) = (x.rows(), zv.rows(), x.cols());

            // out = exp(p) * cos, so d p = sum(dout .* out).
            let dp: f64 = d_out
                .as_slice()
                .iter()
                .zip(yv.as_slice())
                .map(|(&g, &o)| g * o)
                .sum();
            accumulate(grads, *log_scale, Matrix::new(1, 1, vec![dp]));

            // d z_y = s * [ sum_i g_iy x_i / ||x_i|| ] / ||z_y||
            //       - s * [ sum_i g_iy cos_iy ] * z_y / ||z_y||^2
            let mut d_z = Matrix::zeros(c_rows, d);
            for y in 0..c_rows {
                let zr = zv.row(y);
                let inv_zn = 1.0 / super::l2_norm(zr);
                let mut c1 = vec![0.0; d];
                let mut c2 = 0.0;
                for i in 0..b_rows {
                    let g = d_out.get(i, y);
                    if g == 0.0 {
                        continue;
                    }
                    let xr = x.row(i);
                    let inv_xn = 1.0 / x_norms[i];
                    for j in 0..d {
                        c1[j] += g * xr[j] * inv_xn;
                    }
                    c2 += g * yv.get(i, y) / scale;
                }
                let dst = d_z.row_mut(y);
                for j in 0..d {
                    dst[j] = scale * inv_zn * (c1[j] - zr[j] * inv_zn * c2);
                }
            }
            accumulate(grads, *z, d_z);
        }
        Op::CrossEntropyMean { logits, labels, probs, out } => {
            let d_out = match &grads[*out] {
                Some(g) => g.as_slice()[0],
                None => return,
            };
            let scale = d_out / probs.rows() as f64;
            let mut d_logits = probs.clone();
            for (i, &y) in labels.iter().enumerate() {
                let row = d_logits.row_mut(i);
                row[y] -= 1.0;
                for v in row.iter_mut() {
                    *v *= scale;
                }
            }
            accumulate(grads, *logits, d_logits);
        }
        Op::SqDiffSum { a, target, out } => {
            let d_out = match &grads[*out] {
                Some(g) => g.as_slice()[0],
                None => return,
            };
            let av = &slots[*a].value;
            let data: Vec<f64> = av
                .as_slice()
                .iter()
                .zip(target.as_slice())
                .map(|(&x, &t)| 2.0 * (x - t) * d_out)
                .collect();
            accumulate(grads, *a, Matrix::new(av.rows(), av.cols(), data));
        }
        Op::SumSquares { a, out } => {
            let d_out = match &grads[*out] {
                Some(g) => g.as_slice()[0],
                None => return,
            };
            let av = &slots[*a].value;
            let data: Vec<f64> = av.as_slice().iter().map(|&x| 2.0 * x * d_out).collect();
            accumulate(grads, *a, Matrix::new(av.rows(), av.cols(), data));
        }
        Op::AddWeighted { a, b, wa, wb, out } => {
            let d_out = match &grads[*out] {
                Some(g) => g.clone(),
                None => return,
            };
            let mut d_a = d_out.clone();
            d_a.scale_in_place(*wa);
            accumulate(grads, *a, d_a);
            let mut d_b = d_out;
            d_b.scale_in_place(*wb);
            accumulate(grads, *b, d_b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_root_must_be_scalar() {
        let mut tape = Tape::new();
        let a = tape.constant(Matrix::zeros(2, 2));
        assert!(matches!(tape.backward(a), Err(Error::Contract(_))));
    }

    #[test]
    fn linear_times_input_gradient() {
        // loss = w . x + b with x = [2]: dloss/dw = 2, dloss/db = 1
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::new(1, 1, vec![2.0]));
        let w = tape.param(Matrix::new(1, 1, vec![3.0]));
        let b = tape.param(Matrix::new(1, 1, vec![0.0]));
        let loss = tape.linear(x, w, b).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(w).unwrap().as_slice(), &[2.0]);
        assert_eq!(tape.grad(b).unwrap().as_slice(), &[1.0]);
    }

    #[test]
    fn sigmoid_gradient_at_zero_is_quarter() {
        let mut tape = Tape::new();
        let w = tape.param(Matrix::new(1, 1, vec![0.0]));
        let loss = tape.activate(w, Activation::Sigmoid);
        tape.backward(loss).unwrap();
        assert!((tape.grad(w).unwrap().as_slice()[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gradient_accumulates_across_consumers() {
        // loss = a*a + a: dloss/da = 2a + 1 = 7 at a = 3
        let mut tape = Tape::new();
        let a = tape.param(Matrix::new(1, 1, vec![3.0]));
        let sq = tape.mul_elem(a, a).unwrap();
        let loss = tape.add_weighted(sq, a, 1.0, 1.0).unwrap();
        tape.backward(loss).unwrap();
        assert!((tape.grad(a).unwrap().as_slice()[0] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_uniform_logits_value() {
        let mut tape = Tape::new();
        let logits = tape.constant(Matrix::zeros(1, 4));
        let loss = tape.cross_entropy_mean(logits, &[2]).unwrap();
        assert!((tape.value(loss).as_slice()[0] - 4.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_bad_labels() {
        let mut tape = Tape::new();
        let logits = tape.constant(Matrix::zeros(2, 3));
        assert!(matches!(
            tape.cross_entropy_mean(logits, &[0, 3]),
            Err(Error::Label(_))
        ));
    }

    #[test]
    fn cosine_logits_rejects_zero_vectors() {
        let mut tape = Tape::new();
        let z = tape.param(Matrix::new(1, 2, vec![0.0, 0.0]));
        let p = tape.param(Matrix::new(1, 1, vec![0.0]));
        let x = Matrix::new(1, 2, vec![1.0, 0.0]);
        assert!(matches!(
            tape.cosine_logits(z, p, &x),
            Err(Error::DegenerateVector(_))
        ));
    }

    #[test]
    fn dot_logits_values() {
        let mut tape = Tape::new();
        let z = tape.param(Matrix::identity(2));
        let x = Matrix::new(1, 2, vec![1.0, 2.0]);
        let out = tape.dot_logits(z, &x).unwrap();
        assert_eq!(tape.value(out).as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn param_registration_snapshots_values() {
        let mut tape = Tape::new();
        let mut original = Matrix::new(1, 2, vec![1.0, 2.0]);
        let id = tape.param(original.clone());
        original.set(0, 0, 99.0);
        assert_eq!(tape.value(id).get(0, 0), 1.0);
    }
}
