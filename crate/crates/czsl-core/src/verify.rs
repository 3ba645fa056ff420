//! Verification harness: finite-difference gradient sweeps over every
//! architecture variant and the polynomial-degree probe sweep. Backs the
//! `gradcheck` command and the acceptance checks.

use crate::encoder::probe::{polynomial_degree_probe, DegreeProbeReport};
use crate::encoder::{HeadKind, Model, ModelConfig, SiaMode};
use crate::error::Result;
use crate::numkit::gradcheck::{grad_check, GradCheckReport};
use crate::numkit::matrix::Matrix;
use crate::numkit::tape::Tape;
use crate::rng;
use rand::Rng;

/// Default step for the central differences.
pub const FD_STEP: f64 = 1e-5;
/// Pass tolerance on the max relative error.
pub const FD_TOLERANCE: f64 = 1e-4;

/// One architecture variant's gradient check.
#[derive(Debug, Clone)]
pub struct VariantReport {
    pub sia_mode: SiaMode,
    pub depth: usize,
    pub head: HeadKind,
    pub batch_norm: bool,
    pub report: GradCheckReport,
}

impl VariantReport {
    pub fn passes(&self) -> bool {
        self.report.passes(FD_TOLERANCE)
    }

    pub fn label(&self) -> String {
        format!(
            "{:?}/L{}/{:?}/bn={}",
            self.sia_mode, self.depth, self.head, self.batch_norm
        )
    }
}

/// The toy problem used by every gradient sweep: 4 classes, D = 6, d = 8.
pub struct ToyProblem {
    pub attrs: Matrix,
    pub features: Matrix,
    pub labels: Vec<usize>,
}

pub fn toy_problem(seed: u64) -> ToyProblem {
    let mut rng = rng::stream(seed, "gradcheck-toy");
    let (classes, attr_dim, feat_dim, batch) = (4, 6, 8, 5);
    let attrs = Matrix::new(
        classes,
        attr_dim,
        (0..classes * attr_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    );
    let features = Matrix::new(
        batch,
        feat_dim,
        (0..batch * feat_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    );
    let labels = (0..batch).map(|i| i % classes).collect();
    ToyProblem { attrs, features, labels }
}

/// Analytic gradient of the joint loss at the model's current parameters.
pub fn joint_loss_gradient(
    model: &Model,
    problem: &ToyProblem,
    lambda: f64,
) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let binding = model.register(&mut tape);
    let graph = model.joint_loss_on_tape(
        &mut tape,
        &binding,
        &problem.attrs,
        &problem.features,
        &problem.labels,
        lambda,
    )?;
    tape.backward(graph.total)?;
    Ok(binding.collect_grads(&tape, &model.layout))
}

/// Joint-loss value as a pure function of a flat parameter vector.
pub fn joint_loss_value(
    model: &Model,
    params: &[f64],
    problem: &ToyProblem,
    lambda: f64,
) -> f64 {
    let mut probe = model.clone();
    probe.params.copy_from_slice(params);
    crate::objective::joint_loss(&probe, &problem.attrs, &problem.features, &problem.labels, lambda)
        .expect("toy joint loss must evaluate")
        .total
}

/// Gradient-check one model on the toy problem.
pub fn check_model(model: &Model, problem: &ToyProblem, lambda: f64) -> Result<GradCheckReport> {
    let analytic = joint_loss_gradient(model, problem, lambda)?;
    Ok(grad_check(
        |p| joint_loss_value(model, p, problem, lambda),
        &analytic,
        &model.params,
        FD_STEP,
        Some(&model.layout),
    ))
}

/// Sweep the full joint loss over both SIA modes, both heads, batch norm
/// on/off, and the given depths.
pub fn joint_loss_grad_reports(seed: u64, depths: &[usize]) -> Result<Vec<VariantReport>> {
    let problem = toy_problem(seed);
    let mut out = Vec::new();
    for &sia_mode in &[SiaMode::SelfGating, SiaMode::PolynomialKernel] {
        for &head in &[HeadKind::Cosine, HeadKind::Dot] {
            for &batch_norm in &[true, false] {
                for &depth in depths {
                    let config = ModelConfig {
                        attr_dim: problem.attrs.cols(),
                        feat_dim: problem.features.cols(),
                        hidden_dim: 7,
                        depth,
                        sia_mode,
                        gate: true,
                        head,
                        batch_norm,
                    };
                    let model = Model::new(config, seed ^ (depth as u64) << 8)?;
                    let report = check_model(&model, &problem, 5.0)?;
                    out.push(VariantReport { sia_mode, depth, head, batch_norm, report });
                }
            }
        }
    }
    Ok(out)
}

/// Polynomial-kernel model whose weights are positive seeded draws: generic
/// in the sense that the top-degree coefficients stay far from cancellation,
/// so the 2^L-th difference is visibly nonzero while the (2^L+1)-th vanishes.
pub fn probe_model(attr_dim: usize, depth: usize, hidden: usize, seed: u64) -> Result<Model> {
    let config = ModelConfig {
        attr_dim,
        feat_dim: 2,
        hidden_dim: hidden,
        depth,
        sia_mode: SiaMode::PolynomialKernel,
        gate: true,
        head: HeadKind::Dot,
        batch_norm: false,
    };
    let mut model = Model::new(config, seed)?;
    let mut rng = rng::stream(seed, "probe-weights");
    let scale = 1.0 / attr_dim as f64;
    for l in 0..depth {
        for stem in ["phi_a", "phi_s", "phi_b"] {
            let range = model
                .layout
                .range_of(&format!("sia{l}.{stem}.weight"))
                .expect("probe weights exist");
            for p in &mut model.params[range] {
                *p = rng.gen_range(0.4..1.2) * scale;
            }
        }
    }
    Ok(model)
}

/// Line parameters for a probe run.
pub fn probe_line(attr_dim: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = rng::stream(seed, "probe-line");
    let base: Vec<f64> = (0..attr_dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let direction: Vec<f64> = (0..attr_dim).map(|_| rng.gen_range(0.5..1.0)).collect();
    (base, direction)
}

/// Degree-probe sweep over D in {1,2,3} x L in {1,2,3}. Each entry carries
/// the observed per-coordinate degrees against the structural bound 2^L.
pub fn degree_probe_sweep(seed: u64) -> Result<Vec<(usize, usize, DegreeProbeReport)>> {
    let mut out = Vec::new();
    for attr_dim in 1..=3usize {
        for depth in 1..=3usize {
            let model = probe_model(attr_dim, depth, attr_dim.max(2), seed + (attr_dim * 10 + depth) as u64)?;
            let (base, direction) = probe_line(attr_dim, seed + depth as u64);
            let bound = 1usize << depth;
            let report = polynomial_degree_probe(&model, &direction, &base, bound)?;
            out.push((attr_dim, depth, report));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_depth_sweep_passes_everywhere() {
        let reports = joint_loss_grad_reports(1234, &[1]).unwrap();
        assert_eq!(reports.len(), 8);
        for r in &reports {
            assert!(
                r.passes(),
                "{} failed: max rel err {} at {:?}",
                r.label(),
                r.report.max_rel_err,
                r.report.worst_path
            );
        }
    }

    #[test]
    fn sign_flipped_ir_gradient_is_caught_with_its_parameter_named() {
        let problem = toy_problem(5);
        let config = ModelConfig {
            attr_dim: 6,
            feat_dim: 8,
            hidden_dim: 7,
            depth: 1,
            sia_mode: SiaMode::SelfGating,
            gate: true,
            head: HeadKind::Cosine,
            batch_norm: true,
        };
        let model = Model::new(config, 5).unwrap();
        let mut analytic = joint_loss_gradient(&model, &problem, 5.0).unwrap();
        // Flip the regressor (IR-only) gradient block.
        let range = model.layout.range_of("regressor.weight").unwrap();
        for g in &mut analytic[range] {
            *g = -*g;
        }
        let report = grad_check(
            |p| joint_loss_value(&model, p, &problem, 5.0),
            &analytic,
            &model.params,
            FD_STEP,
            Some(&model.layout),
        );
        assert!(!report.passes(FD_TOLERANCE));
        let path = report.worst_path.unwrap();
        assert!(
            path.starts_with("regressor."),
            "worst path {path} does not name the corrupted block"
        );
    }

    #[test]
    fn probe_sweep_shape_and_bounds() {
        let sweep = degree_probe_sweep(99).unwrap();
        assert_eq!(sweep.len(), 9);
        for (d, l, report) in &sweep {
            assert!(
                report.within_bound,
                "D={d} L={l}: degrees {:?} exceed bound {}",
                report.degrees, report.bound
            );
        }
    }
}
