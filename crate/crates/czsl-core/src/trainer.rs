//! Training loops: the inner optimizer U^k, the Reptile meta-update, the
//! decaying meta learning rate, and the per-task driver. A `no_meta` mode
//! optimizes the joint loss directly for the ablation runs.

use crate::continual::{augmented_pool, Reservoir, TaskView};
use crate::encoder::Model;
use crate::error::{Error, Result};
use crate::numkit::adam::{adam_update, AdamState};
use crate::numkit::matrix::Matrix;
use crate::numkit::tape::Tape;
use crate::objective::LossBreakdown;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaMode {
    /// Pseudo-gradient (phi - phi_tilde) fed to an outer Adam at the
    /// scheduled meta learning rate.
    ReptileAdam,
    /// phi <- phi + epsilon (phi_tilde - phi) with constant epsilon = meta_lr.
    ReptilePlain,
    /// Direct optimization of the joint loss, one step per epoch.
    NoMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerOpt {
    Adam,
    Sgd,
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub inner_lr: f64,
    pub meta_lr: f64,
    /// Inner-loop step count k.
    pub inner_steps: usize,
    pub epochs_per_task: usize,
    pub batch_size: usize,
    pub meta_mode: MetaMode,
    pub inner_opt: InnerOpt,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 5.0,
            inner_lr: 1e-4,
            meta_lr: 1e-3,
            inner_steps: 5,
            epochs_per_task: 200,
            batch_size: 64,
            meta_mode: MetaMode::ReptileAdam,
            inner_opt: InnerOpt::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.inner_lr <= 0.0 || self.meta_lr <= 0.0 {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.inner_steps < 1 {
            return Err(Error::Config("inner_steps must be >= 1".into()));
        }
        if self.epochs_per_task < 2 {
            return Err(Error::Config("epochs_per_task must be >= 2 for the schedule".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Optimizer state threaded through the inner loop.
#[derive(Debug, Clone)]
pub enum InnerOptState {
    Sgd,
    Adam(AdamState),
}

impl InnerOptState {
    pub fn fresh(kind: InnerOpt, len: usize) -> Self {
        match kind {
            InnerOpt::Sgd => InnerOptState::Sgd,
            InnerOpt::Adam => InnerOptState::Adam(AdamState::new(len)),
        }
    }
}

/// Outer optimizer state, the task-local epoch counter driving the schedule,
/// and the persistent state for direct (no-meta) optimization.
#[derive(Debug, Clone)]
pub struct MetaState {
    pub outer: AdamState,
    pub epoch_in_task: usize,
    pub direct: InnerOptState,
}

impl MetaState {
    pub fn new(cfg: &TrainConfig, param_count: usize) -> Self {
        MetaState {
            outer: AdamState::new(param_count),
            epoch_in_task: 0,
            direct: InnerOptState::fresh(cfg.inner_opt, param_count),
        }
    }
}

/// One sampled batch; labels are candidate indices into the task's seen
/// attribute rows, not global class ids.
#[derive(Debug, Clone)]
pub struct Batch {
    pub features: Matrix,
    pub labels: Vec<usize>,
}

/// Linearly decaying rate: base_lr * (1 - epoch / (total_epochs - 1)).
pub fn lr_schedule(epoch: usize, total_epochs: usize, base_lr: f64) -> Result<f64> {
    if total_epochs < 2 {
        return Err(Error::Config(format!(
            "lr_schedule needs total_epochs >= 2, got {total_epochs}"
        )));
    }
    if epoch >= total_epochs {
        return Err(Error::Config(format!(
            "epoch {epoch} out of range 0..{total_epochs}"
        )));
    }
    Ok(base_lr * (1.0 - epoch as f64 / (total_epochs - 1) as f64))
}

fn check_finite(params: &[f64], layout: &crate::numkit::ParamLayout) -> Result<()> {
    if let Some(pos) = params.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            path: layout.path_at(pos),
            detail: format!("non-finite parameter {}", params[pos]),
        });
    }
    Ok(())
}

fn apply_inner_step(
    model: &mut Model,
    grads: &[f64],
    lr: f64,
    opt: &mut InnerOptState,
) -> Result<()> {
    match opt {
        InnerOptState::Sgd => {
            if let Some(pos) = grads.iter().position(|g| !g.is_finite()) {
                return Err(Error::Numeric {
                    path: model.layout.path_at(pos),
                    detail: format!("non-finite gradient {}", grads[pos]),
                });
            }
            for (p, g) in model.params.iter_mut().zip(grads) {
                *p -= lr * g;
            }
        }
        InnerOptState::Adam(state) => {
            let layout = model.layout.clone();
            adam_update(&mut model.params, grads, state, lr, &layout)?;
        }
    }
    Ok(())
}

/// One tape pass: loss values, gradients, and the batch-norm statistics the
/// forward produced.
fn loss_and_grads(
    model: &Model,
    attrs: &Matrix,
    batch: &Batch,
    lambda: f64,
) -> Result<(LossBreakdown, Vec<f64>, Option<(Vec<f64>, Vec<f64>)>)> {
    let mut tape = Tape::new();
    let binding = model.register(&mut tape);
    let graph =
        model.joint_loss_on_tape(&mut tape, &binding, attrs, &batch.features, &batch.labels, lambda)?;
    let ce = tape.value(graph.ce).as_slice()[0];
    let ir = tape.value(graph.ir).as_slice()[0];
    tape.backward(graph.total)?;
    let grads = binding.collect_grads(&tape, &model.layout);
    Ok((LossBreakdown::new(ce, ir, lambda)?, grads, graph.bn_stats))
}

/// k optimizer steps on the joint loss of batch tau, starting from a copy;
/// the original parameters are untouched. Returns the adapted copy and the
/// loss at the starting point.
pub fn inner_update(
    model: &Model,
    attrs: &Matrix,
    batch: &Batch,
    cfg: &TrainConfig,
    opt: &mut InnerOptState,
) -> Result<(Model, LossBreakdown)> {
    if batch.features.rows() == 0 {
        return Err(Error::Batch("inner_update on an empty batch".into()));
    }
    let mut tilde = model.clone();
    let mut start_loss = None;
    for _ in 0..cfg.inner_steps {
        let (loss, grads, bn_stats) = loss_and_grads(&tilde, attrs, batch, cfg.lambda)?;
        if start_loss.is_none() {
            start_loss = Some(loss);
        }
        if let (Some(bn), Some((mean, var))) = (&mut tilde.bn_running, &bn_stats) {
            bn.absorb(mean, var);
        }
        apply_inner_step(&mut tilde, &grads, cfg.inner_lr, opt)?;
    }
    Ok((tilde, start_loss.expect("inner_steps >= 1")))
}

/// Move the live parameters toward the adapted copy. Plain mode interpolates
/// with constant epsilon = meta_lr; Adam mode feeds the pseudo-gradient
/// (phi - phi_tilde) to the outer optimizer at the scheduled rate. The
/// adapted copy's batch-norm running statistics are adopted either way.
pub fn reptile_step(
    model: &mut Model,
    tilde: &Model,
    meta: &mut MetaState,
    cfg: &TrainConfig,
) -> Result<()> {
    if model.params.len() != tilde.params.len() {
        return Err(Error::Dimension(format!(
            "reptile_step: {} vs {} parameters",
            model.params.len(),
            tilde.params.len()
        )));
    }
    match cfg.meta_mode {
        MetaMode::ReptilePlain => {
            let eps = cfg.meta_lr;
            for (p, &t) in model.params.iter_mut().zip(&tilde.params) {
                *p = (1.0 - eps) * *p + eps * t;
            }
        }
        MetaMode::ReptileAdam => {
            let lr = lr_schedule(meta.epoch_in_task, cfg.epochs_per_task, cfg.meta_lr)?;
            let pseudo_grad: Vec<f64> = model
                .params
                .iter()
                .zip(&tilde.params)
                .map(|(&p, &t)| p - t)
                .collect();
            let layout = model.layout.clone();
            adam_update(&mut model.params, &pseudo_grad, &mut meta.outer, lr, &layout)?;
        }
        MetaMode::NoMeta => {
            return Err(Error::Contract("reptile_step called in no_meta mode".into()));
        }
    }
    model.bn_running = tilde.bn_running.clone();
    check_finite(&model.params, &model.layout)
}

/// Per-epoch loss record for the trace CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub ce: f64,
    pub ir: f64,
    pub total: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TaskTrace {
    pub records: Vec<EpochRecord>,
}

fn sample_batch(
    pool: &crate::data::FeatureDataset,
    candidate_labels: &[usize],
    size: usize,
    rng: &mut impl Rng,
) -> Batch {
    let n = pool.len();
    let mut rows = Vec::with_capacity(size);
    let mut labels = Vec::with_capacity(size);
    for _ in 0..size {
        let i = rng.gen_range(0..n);
        rows.push(pool.features.row(i).to_vec());
        labels.push(candidate_labels[i]);
    }
    Batch { features: Matrix::from_rows(&rows), labels }
}

/// Train one task: every epoch samples a batch from the augmented pool
/// (replay memory plus current task data) and applies either a Reptile
/// cycle or a direct optimizer step. The epoch counter in the returned
/// trace continues from `epoch_offset` so multi-task traces stay monotone.
pub fn train_task(
    model: &mut Model,
    view: &TaskView,
    reservoir: &Reservoir,
    cfg: &TrainConfig,
    meta: &mut MetaState,
    rng: &mut impl Rng,
    epoch_offset: usize,
) -> Result<TaskTrace> {
    cfg.validate()?;
    if view.seen_class_ids.is_empty() {
        return Err(Error::Protocol(format!("task {} has no seen classes", view.task_id)));
    }
    let pool = augmented_pool(reservoir, &view.train)?;
    if pool.is_empty() {
        return Err(Error::Protocol(format!(
            "task {}: no training data in pool (empty task and empty reservoir)",
            view.task_id
        )));
    }

    let attrs = view.seen_attributes();
    let candidate_of: BTreeMap<usize, usize> = view
        .seen_class_ids
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i))
        .collect();
    let pool_candidates: Vec<usize> = pool
        .labels
        .iter()
        .map(|y| {
            candidate_of.get(y).copied().ok_or_else(|| {
                Error::Data(format!(
                    "task {}: pooled sample of class {y} has no attribute row in the view",
                    view.task_id
                ))
            })
        })
        .collect::<Result<_>>()?;

    meta.epoch_in_task = 0;
    let mut trace = TaskTrace::default();
    for epoch in 0..cfg.epochs_per_task {
        let batch = sample_batch(&pool, &pool_candidates, cfg.batch_size, rng);
        let (loss, lr_used) = match cfg.meta_mode {
            MetaMode::NoMeta => {
                let (loss, grads, bn_stats) = loss_and_grads(model, &attrs, &batch, cfg.lambda)?;
                if let (Some(bn), Some((mean, var))) = (&mut model.bn_running, &bn_stats) {
                    bn.absorb(mean, var);
                }
                let mut direct = std::mem::replace(&mut meta.direct, InnerOptState::Sgd);
                let result = apply_inner_step(model, &grads, cfg.inner_lr, &mut direct);
                meta.direct = direct;
                result?;
                check_finite(&model.params, &model.layout)?;
                (loss, cfg.inner_lr)
            }
            MetaMode::ReptilePlain | MetaMode::ReptileAdam => {
                let mut inner = InnerOptState::fresh(cfg.inner_opt, model.params.len());
                let (tilde, loss) = inner_update(model, &attrs, &batch, cfg, &mut inner)?;
                let lr_used = match cfg.meta_mode {
                    MetaMode::ReptilePlain => cfg.meta_lr,
                    _ => lr_schedule(meta.epoch_in_task, cfg.epochs_per_task, cfg.meta_lr)?,
                };
                reptile_step(model, &tilde, meta, cfg)?;
                (loss, lr_used)
            }
        };
        trace.records.push(EpochRecord {
            epoch: epoch_offset + epoch,
            ce: loss.ce,
            ir: loss.ir,
            total: loss.total,
            lr: lr_used,
        });
        meta.epoch_in_task += 1;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continual::build_dynamic_stream;
    use crate::data::{synth_generate, MapKind, SynthSpec};
    use crate::encoder::{HeadKind, ModelConfig, SiaMode};

    fn toy_model(attr_dim: usize, feat_dim: usize, seed: u64) -> Model {
        Model::new(
            ModelConfig {
                attr_dim,
                feat_dim,
                hidden_dim: 8,
                depth: 1,
                sia_mode: SiaMode::SelfGating,
                gate: true,
                head: HeadKind::Cosine,
                batch_norm: true,
            },
            seed,
        )
        .unwrap()
    }

    fn toy_batch(model: &Model, classes: usize, batch: usize, seed: u64) -> (Matrix, Batch) {
        let mut rng = crate::rng::stream(seed, "toy-batch");
        let attrs = Matrix::new(
            classes,
            model.config.attr_dim,
            (0..classes * model.config.attr_dim)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
        );
        let features = Matrix::new(
            batch,
            model.config.feat_dim,
            (0..batch * model.config.feat_dim)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
        );
        let labels = (0..batch).map(|i| i % classes).collect();
        (attrs, Batch { features, labels })
    }

    #[test]
    fn schedule_endpoints_and_midpoint() {
        assert_eq!(lr_schedule(0, 200, 1e-3).unwrap(), 1e-3);
        assert_eq!(lr_schedule(199, 200, 1e-3).unwrap(), 0.0);
        let mid = lr_schedule(100, 200, 1e-3).unwrap();
        assert!((mid - 1e-3 * (1.0 - 100.0 / 199.0)).abs() < 1e-18);
        assert!((mid - 4.974874371859297e-4).abs() < 1e-12);
    }

    #[test]
    fn schedule_is_linear_and_non_increasing() {
        let mut last = f64::INFINITY;
        for epoch in 0..50 {
            let lr = lr_schedule(epoch, 50, 0.01).unwrap();
            assert!(lr <= last);
            last = lr;
        }
        assert!(matches!(lr_schedule(0, 1, 0.1), Err(Error::Config(_))));
        assert!(matches!(lr_schedule(5, 5, 0.1), Err(Error::Config(_))));
    }

    #[test]
    fn k1_sgd_inner_update_is_one_gradient_step() {
        let model = toy_model(3, 4, 1);
        let (attrs, batch) = toy_batch(&model, 4, 6, 1);
        let cfg = TrainConfig {
            inner_steps: 1,
            inner_opt: InnerOpt::Sgd,
            inner_lr: 0.05,
            ..TrainConfig::default()
        };
        let (loss, grads, _) = loss_and_grads(&model, &attrs, &batch, cfg.lambda).unwrap();
        let mut opt = InnerOptState::Sgd;
        let (tilde, reported) = inner_update(&model, &attrs, &batch, &cfg, &mut opt).unwrap();
        assert_eq!(reported, loss);
        for i in 0..model.params.len() {
            let expect = model.params[i] - 0.05 * grads[i];
            assert_eq!(tilde.params[i], expect, "param {i}");
        }
    }

    #[test]
    fn k2_equals_two_sequential_k1_with_shared_state() {
        let model = toy_model(3, 4, 2);
        let (attrs, batch) = toy_batch(&model, 4, 6, 2);
        let base = TrainConfig { inner_opt: InnerOpt::Adam, ..TrainConfig::default() };

        let cfg2 = TrainConfig { inner_steps: 2, ..base.clone() };
        let mut opt = InnerOptState::fresh(InnerOpt::Adam, model.params.len());
        let (two_step, _) = inner_update(&model, &attrs, &batch, &cfg2, &mut opt).unwrap();

        let cfg1 = TrainConfig { inner_steps: 1, ..base };
        let mut opt_shared = InnerOptState::fresh(InnerOpt::Adam, model.params.len());
        let (mid, _) = inner_update(&model, &attrs, &batch, &cfg1, &mut opt_shared).unwrap();
        let (seq, _) = inner_update(&mid, &attrs, &batch, &cfg1, &mut opt_shared).unwrap();

        assert_eq!(two_step.params, seq.params);
    }

    #[test]
    fn inner_update_rejects_empty_batches_and_preserves_original() {
        let model = toy_model(3, 4, 3);
        let (attrs, _) = toy_batch(&model, 4, 6, 3);
        let cfg = TrainConfig::default();
        let empty = Batch { features: Matrix::zeros(0, 4), labels: vec![] };
        let mut opt = InnerOptState::fresh(cfg.inner_opt, model.params.len());
        assert!(matches!(
            inner_update(&model, &attrs, &empty, &cfg, &mut opt),
            Err(Error::Batch(_))
        ));

        let before = model.params.clone();
        let (_, batch) = toy_batch(&model, 4, 6, 3);
        let _ = inner_update(&model, &attrs, &batch, &cfg, &mut opt).unwrap();
        assert_eq!(model.params, before, "inner_update must not touch the original");
    }

    #[test]
    fn inner_update_descends_on_the_batch() {
        let model = toy_model(3, 4, 4);
        let (attrs, batch) = toy_batch(&model, 4, 8, 4);
        let cfg = TrainConfig {
            inner_steps: 5,
            inner_opt: InnerOpt::Sgd,
            inner_lr: 1e-3,
            ..TrainConfig::default()
        };
        let mut opt = InnerOptState::Sgd;
        let (tilde, start) = inner_update(&model, &attrs, &batch, &cfg, &mut opt).unwrap();
        let end = crate::objective::joint_loss(&tilde, &attrs, &batch.features, &batch.labels, cfg.lambda)
            .unwrap();
        assert!(
            end.total < start.total,
            "loss did not descend: {} -> {}",
            start.total,
            end.total
        );
    }

    #[test]
    fn plain_epsilon_one_adopts_tilde_exactly() {
        let mut model = toy_model(3, 4, 5);
        let tilde = toy_model(3, 4, 6);
        let cfg = TrainConfig {
            meta_mode: MetaMode::ReptilePlain,
            meta_lr: 1.0,
            ..TrainConfig::default()
        };
        let mut meta = MetaState::new(&cfg, model.params.len());
        reptile_step(&mut model, &tilde, &mut meta, &cfg).unwrap();
        assert_eq!(model.params, tilde.params);
    }

    #[test]
    fn plain_epsilon_zero_changes_nothing() {
        let mut model = toy_model(3, 4, 7);
        let before = model.params.clone();
        let tilde = toy_model(3, 4, 8);
        let cfg = TrainConfig {
            meta_mode: MetaMode::ReptilePlain,
            meta_lr: 0.0,
            ..TrainConfig::default()
        };
        let mut meta = MetaState::new(&cfg, model.params.len());
        reptile_step(&mut model, &tilde, &mut meta, &cfg).unwrap();
        assert_eq!(model.params, before);
    }

    #[test]
    fn plain_k1_sgd_reptile_collapses_to_scaled_sgd() {
        // Plain mode, k = 1, SGD inner, epsilon: the net update is
        // phi <- phi - epsilon * eta * grad, checked to 1e-12 against a
        // directly computed SGD step at rate epsilon * eta.
        let mut model = toy_model(3, 4, 9);
        let (attrs, batch) = toy_batch(&model, 4, 6, 9);
        let eps = 0.25;
        let eta = 0.01;
        let cfg = TrainConfig {
            meta_mode: MetaMode::ReptilePlain,
            meta_lr: eps,
            inner_steps: 1,
            inner_opt: InnerOpt::Sgd,
            inner_lr: eta,
            ..TrainConfig::default()
        };
        let mut meta = MetaState::new(&cfg, model.params.len());

        let (_, grads, _) = loss_and_grads(&model, &attrs, &batch, cfg.lambda).unwrap();
        let direct: Vec<f64> = model
            .params
            .iter()
            .zip(&grads)
            .map(|(&p, &g)| p - eps * eta * g)
            .collect();

        let mut inner = InnerOptState::Sgd;
        let (tilde, _) = inner_update(&model, &attrs, &batch, &cfg, &mut inner).unwrap();
        reptile_step(&mut model, &tilde, &mut meta, &cfg).unwrap();

        for (a, b) in model.params.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn reptile_step_flags_non_finite_results() {
        let mut model = toy_model(3, 4, 10);
        let mut tilde = model.clone();
        tilde.params[3] = f64::INFINITY;
        let cfg = TrainConfig {
            meta_mode: MetaMode::ReptilePlain,
            meta_lr: 1.0,
            ..TrainConfig::default()
        };
        let mut meta = MetaState::new(&cfg, model.params.len());
        assert!(matches!(
            reptile_step(&mut model, &tilde, &mut meta, &cfg),
            Err(Error::Numeric { .. })
        ));
    }

    fn toy_stream(seed: u64) -> (crate::data::DatasetBundle, crate::continual::TaskStream) {
        let bundle = synth_generate(&SynthSpec {
            classes: 6,
            seen: 4,
            attr_dim: 4,
            feat_dim: 6,
            samples_per_class: 12,
            noise_sigma: 0.05,
            map: MapKind::Linear,
            seed,
        })
        .unwrap();
        let stream = build_dynamic_stream(&bundle, &[2, 2], &[1, 1]).unwrap();
        (bundle, stream)
    }

    #[test]
    fn training_is_bit_deterministic() {
        let run = || {
            let (_bundle, stream) = toy_stream(13);
            let mut model = toy_model(4, 6, 13);
            let cfg = TrainConfig { epochs_per_task: 10, batch_size: 8, ..TrainConfig::default() };
            let mut meta = MetaState::new(&cfg, model.params.len());
            let mut rng = crate::rng::stream(13, "train");
            let reservoir = Reservoir::new(20);
            train_task(&mut model, &stream.views[0], &reservoir, &cfg, &mut meta, &mut rng, 0)
                .unwrap();
            model.params
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn plain_reptile_trace_matches_no_meta_sgd_step_for_step() {
        // epsilon = 1, k = 1, SGD inner: the whole training trajectory equals
        // direct SGD, so the loss traces agree record for record.
        let make_cfg = |meta_mode| TrainConfig {
            meta_mode,
            meta_lr: 1.0,
            inner_steps: 1,
            inner_opt: InnerOpt::Sgd,
            inner_lr: 0.01,
            epochs_per_task: 25,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let run = |meta_mode| {
            let (_bundle, stream) = toy_stream(14);
            let mut model = toy_model(4, 6, 14);
            let cfg = make_cfg(meta_mode);
            let mut meta = MetaState::new(&cfg, model.params.len());
            let mut rng = crate::rng::stream(14, "train");
            let reservoir = Reservoir::new(20);
            let trace = train_task(
                &mut model,
                &stream.views[0],
                &reservoir,
                &cfg,
                &mut meta,
                &mut rng,
                0,
            )
            .unwrap();
            (model.params, trace)
        };
        let (params_reptile, trace_reptile) = run(MetaMode::ReptilePlain);
        let (params_sgd, trace_sgd) = run(MetaMode::NoMeta);
        for (a, b) in trace_reptile.records.iter().zip(&trace_sgd.records) {
            assert_eq!(a.ce, b.ce);
            assert_eq!(a.ir, b.ir);
            assert_eq!(a.total, b.total);
        }
        for (a, b) in params_reptile.iter().zip(&params_sgd) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn no_meta_fits_separable_toy_data() {
        // Linearly separable 3-class toy problem: direct optimization reaches
        // 100% training accuracy within 50 epochs.
        let bundle = synth_generate(&SynthSpec {
            classes: 4,
            seen: 3,
            attr_dim: 4,
            feat_dim: 6,
            samples_per_class: 20,
            noise_sigma: 0.01,
            map: MapKind::Linear,
            seed: 15,
        })
        .unwrap();
        let stream = build_dynamic_stream(&bundle, &[3], &[1]).unwrap();
        let view = &stream.views[0];
        let mut model = toy_model(4, 6, 15);
        let cfg = TrainConfig {
            meta_mode: MetaMode::NoMeta,
            inner_opt: InnerOpt::Adam,
            inner_lr: 0.02,
            epochs_per_task: 50,
            batch_size: 30,
            lambda: 5.0,
            ..TrainConfig::default()
        };
        let mut meta = MetaState::new(&cfg, model.params.len());
        let mut rng = crate::rng::stream(15, "train");
        let reservoir = Reservoir::new(0);
        train_task(&mut model, view, &reservoir, &cfg, &mut meta, &mut rng, 0).unwrap();

        let z = model.embed_eval(&view.seen_attributes()).unwrap();
        let correct = (0..view.train.len())
            .filter(|&i| {
                let pred = model.predict(view.train.features.row(i), &z).unwrap();
                view.seen_class_ids[pred] == view.train.labels[i]
            })
            .count();
        assert_eq!(correct, view.train.len(), "train accuracy below 100%");
    }

    #[test]
    fn epoch_trace_is_monotone_with_offset() {
        let (_bundle, stream) = toy_stream(16);
        let mut model = toy_model(4, 6, 16);
        let cfg = TrainConfig { epochs_per_task: 5, batch_size: 4, ..TrainConfig::default() };
        let mut meta = MetaState::new(&cfg, model.params.len());
        let mut rng = crate::rng::stream(16, "train");
        let reservoir = Reservoir::new(10);
        let t1 = train_task(&mut model, &stream.views[0], &reservoir, &cfg, &mut meta, &mut rng, 0)
            .unwrap();
        let t2 = train_task(&mut model, &stream.views[1], &reservoir, &cfg, &mut meta, &mut rng, 5)
            .unwrap();
        let epochs: Vec<usize> = t1
            .records
            .iter()
            .chain(&t2.records)
            .map(|r| r.epoch)
            .collect();
        assert_eq!(epochs, (0..10).collect::<Vec<_>>());
    }
}
