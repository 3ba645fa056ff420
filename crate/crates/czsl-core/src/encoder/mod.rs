//! The attribute encoder: stacked self-interaction blocks, projection head
//! with batch norm, the inverse regressor back to attribute space, and the
//! similarity head producing class logits.
//!
//! All trainable parameters live in one flat vector addressed through a
//! `ParamLayout`; the optimizers, the meta update, and the gradient checker
//! operate on that vector while forward passes view it as named tensors.

pub mod probe;

use crate::error::{Error, Result};
use crate::numkit::batchnorm;
use crate::numkit::layout::{ParamLayout, ParamSpec};
use crate::numkit::matrix::Matrix;
use crate::numkit::tape::{BufId, Tape};
use crate::numkit::{dot, l2_norm, linear, Activation};
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Self-interaction flavour: identity activations (polynomial kernel) or
/// ReLU/sigmoid/ReLU self-gating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiaMode {
    PolynomialKernel,
    SelfGating,
}

impl SiaMode {
    /// Activations (g_a, g_s, g_b) for this mode.
    pub fn activations(self) -> (Activation, Activation, Activation) {
        match self {
            SiaMode::PolynomialKernel => {
                (Activation::Identity, Activation::Identity, Activation::Identity)
            }
            SiaMode::SelfGating => (Activation::Relu, Activation::Sigmoid, Activation::Relu),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Cosine,
    Dot,
}

/// Architecture of the encoder, regressor, and head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Attribute dimension D.
    pub attr_dim: usize,
    /// Visual feature dimension d.
    pub feat_dim: usize,
    pub hidden_dim: usize,
    /// Number of stacked self-interaction blocks (L >= 1).
    pub depth: usize,
    pub sia_mode: SiaMode,
    /// When false, blocks drop the multiplicative branch and keep only
    /// g_b(phi_b a) — the "no self-interaction" ablation.
    pub gate: bool,
    pub head: HeadKind,
    pub batch_norm: bool,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::Config("depth must be >= 1".into()));
        }
        if self.attr_dim == 0 || self.feat_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        Ok(())
    }

    /// Input width of block `l`.
    fn block_in(&self, l: usize) -> usize {
        if l == 0 {
            self.attr_dim
        } else {
            self.hidden_dim
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            attr_dim: 0,
            feat_dim: 0,
            hidden_dim: 2048,
            depth: 1,
            sia_mode: SiaMode::SelfGating,
            gate: true,
            head: HeadKind::Cosine,
            batch_norm: true,
        }
    }
}

/// Batch-norm running statistics (the affine gamma/beta are trainable and
/// live in the flat parameter vector).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnRunning {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

impl BnRunning {
    fn new(dim: usize) -> Self {
        BnRunning { mean: vec![0.0; dim], var: vec![1.0; dim], momentum: 0.9, epsilon: 1e-5 }
    }

    pub(crate) fn absorb(&mut self, batch_mean: &[f64], batch_var: &[f64]) {
        let m = self.momentum;
        for j in 0..self.mean.len() {
            self.mean[j] = m * self.mean[j] + (1.0 - m) * batch_mean[j];
            self.var[j] = m * self.var[j] + (1.0 - m) * batch_var[j];
        }
    }
}

/// One self-interaction block's parameters, materialized as owned tensors.
#[derive(Debug, Clone)]
pub struct SiaBlockParams {
    pub phi_a: Option<(Matrix, Vec<f64>)>,
    pub phi_s: Option<(Matrix, Vec<f64>)>,
    pub phi_b: (Matrix, Vec<f64>),
    pub mode: SiaMode,
}

/// Similarity head with its effective scale (always positive).
#[derive(Debug, Clone, Copy)]
pub struct SimilarityHead {
    pub kind: HeadKind,
    pub scale: f64,
}

/// g_a(phi_a a) .* g_s(phi_s a) + g_b(phi_b a), or just g_b(phi_b a) when the
/// gated branch is absent.
pub fn sia_forward(input: &[f64], block: &SiaBlockParams) -> Result<Vec<f64>> {
    let (g_a, g_s, g_b) = block.mode.activations();
    let (w_b, b_b) = &block.phi_b;
    let mut out: Vec<f64> = linear(input, w_b, b_b)?
        .into_iter()
        .map(|v| g_b.apply(v))
        .collect();
    if let (Some((w_a, b_a)), Some((w_s, b_s))) = (&block.phi_a, &block.phi_s) {
        let ha = linear(input, w_a, b_a)?;
        let hs = linear(input, w_s, b_s)?;
        for (o, (a, s)) in out.iter_mut().zip(ha.iter().zip(hs.iter())) {
            *o += g_a.apply(*a) * g_s.apply(*s);
        }
    }
    Ok(out)
}

/// Class logits of one feature against a stack of class embeddings.
/// Ties at prediction time break toward the lowest class index.
pub fn class_logits(x: &[f64], z: &Matrix, head: &SimilarityHead) -> Result<Vec<f64>> {
    if z.cols() != x.len() {
        return Err(Error::Dimension(format!(
            "class_logits: Z is {}x{}, x has {}",
            z.rows(),
            z.cols(),
            x.len()
        )));
    }
    match head.kind {
        HeadKind::Dot => Ok(z.iter_rows().map(|row| dot(row, x)).collect()),
        HeadKind::Cosine => {
            let xn = l2_norm(x);
            if xn == 0.0 {
                return Err(Error::DegenerateVector("class_logits: zero-norm feature".into()));
            }
            z.iter_rows()
                .enumerate()
                .map(|(y, row)| {
                    let zn = l2_norm(row);
                    if zn == 0.0 {
                        Err(Error::DegenerateVector(format!(
                            "class_logits: zero-norm embedding for class row {y}"
                        )))
                    } else {
                        Ok(head.scale * dot(row, x) / (xn * zn))
                    }
                })
                .collect()
        }
    }
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Tape buffers registered for every layout entry of a model.
pub struct TapeBinding {
    ids: Vec<BufId>,
}

impl TapeBinding {
    pub fn id_of(&self, layout: &ParamLayout, name: &str) -> BufId {
        let idx = layout
            .entries()
            .iter()
            .position(|e| e.name == name)
            .unwrap_or_else(|| panic!("no parameter named {name}"));
        self.ids[idx]
    }

    /// Assemble the flat gradient vector; zeros where no gradient flowed.
    pub fn collect_grads(&self, tape: &Tape, layout: &ParamLayout) -> Vec<f64> {
        let mut flat = vec![0.0; layout.total_len()];
        for (idx, _entry) in layout.entries().iter().enumerate() {
            let range = layout.range(idx);
            let g = tape.grad_or_zeros(self.ids[idx]);
            flat[range].copy_from_slice(g.as_slice());
        }
        flat
    }
}

/// Handles into a joint-loss graph built on a tape.
pub struct JointLossGraph {
    pub total: BufId,
    pub ce: BufId,
    pub ir: BufId,
    pub embeddings: BufId,
    /// Batch statistics produced by train-mode batch norm, if present.
    pub bn_stats: Option<(Vec<f64>, Vec<f64>)>,
}

/// The full trainable model: encoder + inverse regressor + head.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub layout: Arc<ParamLayout>,
    pub params: Vec<f64>,
    pub bn_running: Option<BnRunning>,
}

enum InitRule {
    Zero,
    One,
    Const(f64),
    Kaiming { fan_in: usize },
    Xavier { fan_in: usize, fan_out: usize },
}

fn build_layout(config: &ModelConfig) -> (ParamLayout, Vec<InitRule>) {
    let mut entries = Vec::new();
    let mut rules = Vec::new();
    let h = config.hidden_dim;
    let (g_a, _g_s, g_b) = config.sia_mode.activations();

    let weight = |entries: &mut Vec<ParamSpec>,
                      rules: &mut Vec<InitRule>,
                      name: String,
                      rows: usize,
                      cols: usize,
                      act: Activation| {
        entries.push(ParamSpec { name: name.clone(), rows, cols });
        rules.push(match act {
            Activation::Relu => InitRule::Kaiming { fan_in: cols },
            _ => InitRule::Xavier { fan_in: cols, fan_out: rows },
        });
        entries.push(ParamSpec { name: format!("{}.bias", name.trim_end_matches(".weight")), rows, cols: 1 });
        rules.push(InitRule::Zero);
    };

    for l in 0..config.depth {
        let w_in = config.block_in(l);
        if config.gate {
            weight(&mut entries, &mut rules, format!("sia{l}.phi_a.weight"), h, w_in, g_a);
            weight(
                &mut entries,
                &mut rules,
                format!("sia{l}.phi_s.weight"),
                h,
                w_in,
                Activation::Sigmoid,
            );
        }
        weight(&mut entries, &mut rules, format!("sia{l}.phi_b.weight"), h, w_in, g_b);
    }
    weight(&mut entries, &mut rules, "proj1.weight".into(), h, h, Activation::Identity);
    if config.batch_norm {
        entries.push(ParamSpec { name: "bn.gamma".into(), rows: h, cols: 1 });
        rules.push(InitRule::One);
        entries.push(ParamSpec { name: "bn.beta".into(), rows: h, cols: 1 });
        rules.push(InitRule::Zero);
    }
    weight(
        &mut entries,
        &mut rules,
        "proj2.weight".into(),
        config.feat_dim,
        h,
        Activation::Identity,
    );
    if config.head == HeadKind::Cosine {
        entries.push(ParamSpec { name: "head.log_scale".into(), rows: 1, cols: 1 });
        rules.push(InitRule::Const(10.0_f64.ln()));
    }
    weight(
        &mut entries,
        &mut rules,
        "regressor.weight".into(),
        config.attr_dim,
        config.feat_dim,
        Activation::Identity,
    );

    (ParamLayout::new(entries), rules)
}

impl Model {
    /// Fresh model with seeded initialization: Kaiming-uniform (fan-in) for
    /// ReLU-activated maps, Xavier-uniform elsewhere, zero biases.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Model> {
        config.validate()?;
        let (layout, rules) = build_layout(&config);
        let mut params = vec![0.0; layout.total_len()];
        let mut rng = rng::stream(seed, "model-init");
        for (idx, rule) in rules.iter().enumerate() {
            let range = layout.range(idx);
            match rule {
                InitRule::Zero => {}
                InitRule::One => params[range].fill(1.0),
                InitRule::Const(v) => params[range].fill(*v),
                InitRule::Kaiming { fan_in } => {
                    let bound = (6.0 / *fan_in as f64).sqrt();
                    for p in &mut params[range] {
                        *p = rng.gen_range(-bound..bound);
                    }
                }
                InitRule::Xavier { fan_in, fan_out } => {
                    let bound = (6.0 / (*fan_in + *fan_out) as f64).sqrt();
                    for p in &mut params[range] {
                        *p = rng.gen_range(-bound..bound);
                    }
                }
            }
        }
        let bn_running = config.batch_norm.then(|| BnRunning::new(config.hidden_dim));
        Ok(Model { config, layout: Arc::new(layout), params, bn_running })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn seg(&self, name: &str) -> &[f64] {
        let range = self
            .layout
            .range_of(name)
            .unwrap_or_else(|| panic!("no parameter named {name}"));
        &self.params[range]
    }

    fn seg_matrix(&self, name: &str) -> Matrix {
        let idx = self
            .layout
            .entries()
            .iter()
            .position(|e| e.name == name)
            .unwrap_or_else(|| panic!("no parameter named {name}"));
        let spec = &self.layout.entries()[idx];
        Matrix::new(spec.rows, spec.cols, self.params[self.layout.range(idx)].to_vec())
    }

    /// Materialize block `l` as owned tensors.
    pub fn block(&self, l: usize) -> SiaBlockParams {
        let get = |stem: &str| {
            (
                self.seg_matrix(&format!("sia{l}.{stem}.weight")),
                self.seg(&format!("sia{l}.{stem}.bias")).to_vec(),
            )
        };
        SiaBlockParams {
            phi_a: self.config.gate.then(|| get("phi_a")),
            phi_s: self.config.gate.then(|| get("phi_s")),
            phi_b: get("phi_b"),
            mode: self.config.sia_mode,
        }
    }

    /// The similarity head with its effective (positive) scale.
    pub fn head(&self) -> SimilarityHead {
        let scale = match self.config.head {
            HeadKind::Cosine => self.seg("head.log_scale")[0].exp(),
            HeadKind::Dot => 1.0,
        };
        SimilarityHead { kind: self.config.head, scale }
    }

    /// Run the stacked SIA blocks only (no projection/batch norm) on one
    /// attribute vector. This is the quantity the degree probe inspects.
    pub fn sia_stack(&self, attr: &[f64]) -> Result<Vec<f64>> {
        let mut h = attr.to_vec();
        for l in 0..self.config.depth {
            h = sia_forward(&h, &self.block(l))?;
        }
        Ok(h)
    }

    /// Deterministic eval-mode embedding of a batch of attribute rows:
    /// blocks, proj1, batch norm with running statistics, proj2.
    pub fn embed_eval(&self, attrs: &Matrix) -> Result<Matrix> {
        if attrs.cols() != self.config.attr_dim {
            return Err(Error::Dimension(format!(
                "embed: attributes have {} columns, model expects {}",
                attrs.cols(),
                self.config.attr_dim
            )));
        }
        let rows: Vec<Vec<f64>> =
            attrs.iter_rows().map(|a| self.sia_stack(a)).collect::<Result<_>>()?;
        let h = Matrix::from_rows(&rows);
        let h = crate::numkit::linear_batch(&h, &self.seg_matrix("proj1.weight"), self.seg("proj1.bias"))?;
        let h = match &self.bn_running {
            Some(bn) => batchnorm::normalize_with(
                &h,
                &bn.mean,
                &bn.var,
                self.seg("bn.gamma"),
                self.seg("bn.beta"),
                bn.epsilon,
            ),
            None => h,
        };
        crate::numkit::linear_batch(&h, &self.seg_matrix("proj2.weight"), self.seg("proj2.bias"))
    }

    /// Eval-mode embedding of a single attribute vector.
    pub fn encode_attribute(&self, attr: &[f64]) -> Result<Vec<f64>> {
        let z = self.embed_eval(&Matrix::row_vector(attr.to_vec()))?;
        Ok(z.into_vec())
    }

    /// Reconstructed attribute R(z) for a single embedding.
    pub fn inverse_regress(&self, z: &[f64]) -> Result<Vec<f64>> {
        linear(z, &self.seg_matrix("regressor.weight"), self.seg("regressor.bias"))
    }

    /// Batch inverse regression: one reconstructed attribute row per z row.
    pub fn inverse_regress_batch(&self, z: &Matrix) -> Result<Matrix> {
        crate::numkit::linear_batch(
            z,
            &self.seg_matrix("regressor.weight"),
            self.seg("regressor.bias"),
        )
    }

    /// Predict the candidate index for one feature against class embeddings.
    pub fn predict(&self, x: &[f64], z: &Matrix) -> Result<usize> {
        Ok(argmax(&class_logits(x, z, &self.head())?))
    }

    // ── Tape forward ─────────────────────────────────────────────────

    /// Snapshot every parameter tensor onto the tape.
    pub fn register(&self, tape: &mut Tape) -> TapeBinding {
        let ids = self
            .layout
            .entries()
            .iter()
            .enumerate()
            .map(|(idx, spec)| {
                let m = Matrix::new(
                    spec.rows,
                    spec.cols,
                    self.params[self.layout.range(idx)].to_vec(),
                );
                tape.param(m)
            })
            .collect();
        TapeBinding { ids }
    }

    /// Train-mode embedding recorded on the tape. Batch norm uses batch
    /// statistics; the returned stats let the caller fold them into the
    /// running estimates.
    pub fn embed_on_tape(
        &self,
        tape: &mut Tape,
        binding: &TapeBinding,
        attrs: &Matrix,
    ) -> Result<(BufId, Option<(Vec<f64>, Vec<f64>)>)> {
        if attrs.cols() != self.config.attr_dim {
            return Err(Error::Dimension(format!(
                "embed: attributes have {} columns, model expects {}",
                attrs.cols(),
                self.config.attr_dim
            )));
        }
        let layout = &*self.layout;
        let (g_a, g_s, g_b) = self.config.sia_mode.activations();
        let mut h = tape.constant(attrs.clone());
        for l in 0..self.config.depth {
            let wb = binding.id_of(layout, &format!("sia{l}.phi_b.weight"));
            let bb = binding.id_of(layout, &format!("sia{l}.phi_b.bias"));
            let rb = tape.linear(h, wb, bb)?;
            let hb = tape.activate(rb, g_b);
            if self.config.gate {
                let wa = binding.id_of(layout, &format!("sia{l}.phi_a.weight"));
                let ba = binding.id_of(layout, &format!("sia{l}.phi_a.bias"));
                let ws = binding.id_of(layout, &format!("sia{l}.phi_s.weight"));
                let bs = binding.id_of(layout, &format!("sia{l}.phi_s.bias"));
                let ra = tape.linear(h, wa, ba)?;
                let ha = tape.activate(ra, g_a);
                let rs = tape.linear(h, ws, bs)?;
                let hs = tape.activate(rs, g_s);
                let prod = tape.mul_elem(ha, hs)?;
                h = tape.add_elem(prod, hb)?;
            } else {
                h = hb;
            }
        }
        let w1 = binding.id_of(layout, "proj1.weight");
        let b1 = binding.id_of(layout, "proj1.bias");
        h = tape.linear(h, w1, b1)?;
        let mut bn_stats = None;
        if self.config.batch_norm {
            let gamma = binding.id_of(layout, "bn.gamma");
            let beta = binding.id_of(layout, "bn.beta");
            let eps = self.bn_running.as_ref().map_or(1e-5, |b| b.epsilon);
            let (out, mean, var) = tape.batch_norm(h, gamma, beta, eps)?;
            h = out;
            bn_stats = Some((mean, var));
        }
        let w2 = binding.id_of(layout, "proj2.weight");
        let b2 = binding.id_of(layout, "proj2.bias");
        let z = tape.linear(h, w2, b2)?;
        Ok((z, bn_stats))
    }

    /// Build the joint training objective on a tape: cross-entropy of the
    /// batch against the candidate classes plus lambda times the inverse-
    /// regularization term over the candidate attribute rows.
    ///
    /// `labels` are indices into the rows of `attrs` (the candidate order).
    pub fn joint_loss_on_tape(
        &self,
        tape: &mut Tape,
        binding: &TapeBinding,
        attrs: &Matrix,
        features: &Matrix,
        labels: &[usize],
        lambda: f64,
    ) -> Result<JointLossGraph> {
        if lambda < 0.0 {
            return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
        }
        if features.rows() == 0 {
            return Err(Error::Batch("joint loss over an empty batch".into()));
        }
        let (z, bn_stats) = self.embed_on_tape(tape, binding, attrs)?;
        let logits = match self.config.head {
            HeadKind::Dot => tape.dot_logits(z, features)?,
            HeadKind::Cosine => {
                let ls = binding.id_of(&self.layout, "head.log_scale");
                tape.cosine_logits(z, ls, features)?
            }
        };
        let ce = tape.cross_entropy_mean(logits, labels)?;
        let wr = binding.id_of(&self.layout, "regressor.weight");
        let br = binding.id_of(&self.layout, "regressor.bias");
        let reconstructed = tape.linear(z, wr, br)?;
        let ir = tape.sq_diff_sum(reconstructed, attrs)?;
        let total = tape.add_weighted(ce, ir, 1.0, lambda)?;
        Ok(JointLossGraph { total, ce, ir, embeddings: z, bn_stats })
    }
}
