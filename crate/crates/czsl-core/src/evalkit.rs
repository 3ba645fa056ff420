//! Evaluation metrics: macro (per-class) accuracy, the seen/unseen harmonic
//! mean, joint-label-space GZSL scoring, and the fixed/dynamic continual
//! aggregations.

use crate::data::FeatureDataset;
use crate::encoder::Model;
use crate::error::{Error, Result};
use crate::numkit::matrix::Matrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Per-task evaluation results; accuracies are percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub task_id: usize,
    pub seen_acc: f64,
    pub unseen_acc: f64,
    pub harmonic: f64,
    /// Sample-averaged accuracies, emitted for diagnostics only; the
    /// aggregate metrics always use the macro values above.
    pub seen_sample_acc: f64,
    pub unseen_sample_acc: f64,
}

/// Aggregated report over one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub protocol: String,
    pub per_task: Vec<TaskMetrics>,
    pub msa: f64,
    pub mua: f64,
    pub mh: f64,
}

/// Macro-averaged per-class accuracy as a percentage: the mean over classes
/// of within-class accuracy. Classes of `class_ids` with no samples are
/// skipped with a warning; labels outside `class_ids` are an error.
pub fn per_class_accuracy(
    predictions: &[usize],
    labels: &[usize],
    class_ids: &[usize],
) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Metric("per_class_accuracy over an empty evaluation set".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::Metric(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut correct: BTreeMap<usize, (usize, usize)> =
        class_ids.iter().map(|&c| (c, (0, 0))).collect();
    for (&pred, &label) in predictions.iter().zip(labels) {
        let entry = correct.get_mut(&label).ok_or_else(|| {
            Error::Metric(format!("label {label} is not in the evaluated class set"))
        })?;
        entry.1 += 1;
        if pred == label {
            entry.0 += 1;
        }
    }
    let mut sum = 0.0;
    let mut counted = 0;
    for (&class, &(hits, total)) in &correct {
        if total == 0 {
            log::warn!("class {class} has no test samples in this view; skipped in macro mean");
            continue;
        }
        sum += hits as f64 / total as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::Metric("no evaluated class has any sample".into()));
    }
    Ok(100.0 * sum / counted as f64)
}

/// Sample-averaged accuracy percentage (diagnostic).
pub fn sample_accuracy(predictions: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    100.0 * hits as f64 / labels.len() as f64
}

/// 2su/(s+u), with H(0, 0) = 0.
pub fn harmonic_mean(s: f64, u: f64) -> Result<f64> {
    if s < 0.0 || u < 0.0 {
        return Err(Error::Metric(format!("harmonic_mean of negative inputs ({s}, {u})")));
    }
    if s + u == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * s * u / (s + u))
}

/// Score already-computed joint-space predictions for one view.
pub fn evaluate_predictions(
    task_id: usize,
    seen_predictions: &[usize],
    seen_labels: &[usize],
    unseen_predictions: &[usize],
    unseen_labels: &[usize],
    seen_class_ids: &[usize],
    unseen_class_ids: &[usize],
) -> Result<TaskMetrics> {
    let seen_acc = per_class_accuracy(seen_predictions, seen_labels, seen_class_ids)?;
    let unseen_acc = per_class_accuracy(unseen_predictions, unseen_labels, unseen_class_ids)?;
    Ok(TaskMetrics {
        task_id,
        seen_acc,
        unseen_acc,
        harmonic: harmonic_mean(seen_acc, unseen_acc)?,
        seen_sample_acc: sample_accuracy(seen_predictions, seen_labels),
        unseen_sample_acc: sample_accuracy(unseen_predictions, unseen_labels),
    })
}

/// Predict global class ids for every sample against the given candidate
/// attribute table (seen and unseen jointly; no oracle gating).
pub fn predict_dataset(
    model: &Model,
    data: &FeatureDataset,
    attributes: &Matrix,
    attr_class_ids: &[usize],
) -> Result<Vec<usize>> {
    if attr_class_ids.is_empty() {
        return Err(Error::Protocol("empty candidate class set".into()));
    }
    let z = model.embed_eval(attributes)?;
    (0..data.len())
        .map(|i| Ok(attr_class_ids[model.predict(data.features.row(i), &z)?]))
        .collect()
}

/// GZSL scoring of a model: both test sets are classified against the joint
/// candidate space, macro accuracies are computed over each side's classes.
pub fn gzsl_evaluate(
    model: &Model,
    seen_test: &FeatureDataset,
    unseen_test: &FeatureDataset,
    attributes: &Matrix,
    attr_class_ids: &[usize],
    seen_class_ids: &[usize],
    unseen_class_ids: &[usize],
    task_id: usize,
) -> Result<TaskMetrics> {
    if seen_class_ids.is_empty() || unseen_class_ids.is_empty() {
        return Err(Error::Protocol(
            "gzsl evaluation needs nonempty seen and unseen class sets".into(),
        ));
    }
    let seen_preds = predict_dataset(model, seen_test, attributes, attr_class_ids)?;
    let unseen_preds = predict_dataset(model, unseen_test, attributes, attr_class_ids)?;
    evaluate_predictions(
        task_id,
        &seen_preds,
        &seen_test.labels,
        &unseen_preds,
        &unseen_test.labels,
        seen_class_ids,
        unseen_class_ids,
    )
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.sum::<f64>() / n as f64
}

/// Fixed-protocol aggregation over tasks 1..K-1 (task K has no unseen
/// classes). The aggregate mh is the mean of per-task harmonics, not the
/// harmonic of the aggregate means.
pub fn continual_metrics_fixed(per_task: &[TaskMetrics], k: usize) -> Result<MetricsReport> {
    if k < 2 {
        return Err(Error::Metric(format!("fixed aggregation needs K >= 2, got {k}")));
    }
    if per_task.len() != k - 1 {
        return Err(Error::Metric(format!(
            "fixed aggregation needs results for tasks 1..{} ; got {}",
            k - 1,
            per_task.len()
        )));
    }
    for (i, tm) in per_task.iter().enumerate() {
        if tm.task_id != i + 1 {
            return Err(Error::Metric(format!(
                "missing task {} in fixed aggregation (found {})",
                i + 1,
                tm.task_id
            )));
        }
    }
    let n = per_task.len();
    Ok(MetricsReport {
        protocol: "fixed".into(),
        per_task: per_task.to_vec(),
        msa: mean(per_task.iter().map(|t| t.seen_acc), n),
        mua: mean(per_task.iter().map(|t| t.unseen_acc), n),
        mh: mean(per_task.iter().map(|t| t.harmonic), n),
    })
}

/// Dynamic-protocol aggregation over all K tasks (cumulative class sets).
pub fn continual_metrics_dynamic(per_task: &[TaskMetrics]) -> Result<MetricsReport> {
    if per_task.is_empty() {
        return Err(Error::Metric("dynamic aggregation over no tasks".into()));
    }
    for (i, tm) in per_task.iter().enumerate() {
        if tm.task_id != i + 1 {
            return Err(Error::Metric(format!(
                "missing task {} in dynamic aggregation (found {})",
                i + 1,
                tm.task_id
            )));
        }
    }
    let n = per_task.len();
    Ok(MetricsReport {
        protocol: "dynamic".into(),
        per_task: per_task.to_vec(),
        msa: mean(per_task.iter().map(|t| t.seen_acc), n),
        mua: mean(per_task.iter().map(|t| t.unseen_acc), n),
        mh: mean(per_task.iter().map(|t| t.harmonic), n),
    })
}

/// Single-phase GZSL report from one evaluation.
pub fn gzsl_report(tm: TaskMetrics) -> MetricsReport {
    MetricsReport {
        protocol: "gzsl".into(),
        msa: tm.seen_acc,
        mua: tm.unseen_acc,
        mh: tm.harmonic,
        per_task: vec![tm],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn all_correct_is_100() {
        let acc = per_class_accuracy(&[0, 1, 2], &[0, 1, 2], &[0, 1, 2]).unwrap();
        assert_eq!(acc, 100.0);
    }

    #[test]
    fn none_correct_is_0() {
        let acc = per_class_accuracy(&[1, 2, 0], &[0, 1, 2], &[0, 1, 2]).unwrap();
        assert_eq!(acc, 0.0);
    }

    #[test]
    fn macro_differs_from_micro_in_skewed_case() {
        // Class 0: 9 of 10 correct; class 1: 1 of 1 correct.
        let mut preds = vec![0; 9];
        preds.push(7); // one miss in class 0
        preds.push(1);
        let mut labels = vec![0; 10];
        labels.push(1);
        let macro_acc = per_class_accuracy(&preds, &labels, &[0, 1]).unwrap();
        assert!((macro_acc - 95.0).abs() < 1e-12);
        let micro = sample_accuracy(&preds, &labels);
        assert!((micro - 100.0 * 10.0 / 11.0).abs() < 1e-12);

        // Balanced variant where macro and micro coincide.
        let acc = per_class_accuracy(&[0, 0, 2, 2], &[0, 0, 1, 1], &[0, 1]).unwrap();
        assert!((acc - 50.0).abs() < 1e-12);
    }

    #[test]
    fn empty_set_and_foreign_labels_are_errors() {
        assert!(matches!(
            per_class_accuracy(&[], &[], &[0]),
            Err(Error::Metric(_))
        ));
        assert!(matches!(
            per_class_accuracy(&[0], &[5], &[0, 1]),
            Err(Error::Metric(_))
        ));
    }

    #[test]
    fn harmonic_cases() {
        assert_eq!(harmonic_mean(50.0, 50.0).unwrap(), 50.0);
        assert_eq!(harmonic_mean(60.0, 40.0).unwrap(), 48.0);
        assert_eq!(harmonic_mean(0.0, 87.3).unwrap(), 0.0);
        assert_eq!(harmonic_mean(0.0, 0.0).unwrap(), 0.0);
        assert!(harmonic_mean(-1.0, 5.0).is_err());
    }

    proptest! {
        #[test]
        fn harmonic_bounds(s in 0.0_f64..100.0, u in 0.0_f64..100.0) {
            let h = harmonic_mean(s, u).unwrap();
            let lo = s.min(u);
            prop_assert!(h <= 2.0 * lo + 1e-12);
            prop_assert!(h <= (s + u) / 2.0 + 1e-12);
            if s > 0.0 && u > 0.0 {
                prop_assert!(h >= lo - 1e-9 || h >= lo * (1.0 - 1e-12));
            }
        }

        #[test]
        fn macro_accuracy_is_duplication_invariant(
            labels in proptest::collection::vec(0usize..4, 1..30),
            flips in proptest::collection::vec(proptest::bool::ANY, 30),
        ) {
            let preds: Vec<usize> = labels
                .iter()
                .zip(&flips)
                .map(|(&l, &f)| if f { l } else { (l + 1) % 4 })
                .collect();
            let classes: Vec<usize> = (0..4).collect();
            let base = per_class_accuracy(&preds, &labels, &classes).unwrap();
            let mut preds2 = preds.clone();
            preds2.extend_from_slice(&preds);
            let mut labels2 = labels.clone();
            labels2.extend_from_slice(&labels);
            let doubled = per_class_accuracy(&preds2, &labels2, &classes).unwrap();
            prop_assert!((base - doubled).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_predictions_score_perfect() {
        let tm = evaluate_predictions(
            1,
            &[0, 0, 1],
            &[0, 0, 1],
            &[2, 3],
            &[2, 3],
            &[0, 1],
            &[2, 3],
        )
        .unwrap();
        assert_eq!((tm.seen_acc, tm.unseen_acc, tm.harmonic), (100.0, 100.0, 100.0));
    }

    #[test]
    fn seen_biased_classifier_zeroes_the_harmonic() {
        // Always predicting one seen class: unseen accuracy 0, so mH = 0.
        let tm = evaluate_predictions(
            1,
            &[0, 0, 0, 0],
            &[0, 0, 1, 1],
            &[0, 0],
            &[2, 3],
            &[0, 1],
            &[2, 3],
        )
        .unwrap();
        assert_eq!(tm.unseen_acc, 0.0);
        assert_eq!(tm.harmonic, 0.0);
    }

    fn tm(task_id: usize, s: f64, u: f64) -> TaskMetrics {
        TaskMetrics {
            task_id,
            seen_acc: s,
            unseen_acc: u,
            harmonic: harmonic_mean(s, u).unwrap(),
            seen_sample_acc: s,
            unseen_sample_acc: u,
        }
    }

    #[test]
    fn fixed_aggregation_hand_example() {
        // K = 3 with per-task (seen, unseen) = (80, 40), (60, 60):
        // mSA = 70, mUA = 50, mhM = (H(80,40) + H(60,60)) / 2 = 170/3.
        let report = continual_metrics_fixed(&[tm(1, 80.0, 40.0), tm(2, 60.0, 60.0)], 3).unwrap();
        assert!((report.msa - 70.0).abs() < 1e-12);
        assert!((report.mua - 50.0).abs() < 1e-12);
        assert!((report.mh - 170.0 / 3.0).abs() < 1e-9);
        // Mean-of-harmonics differs from harmonic-of-means.
        let h_of_means = harmonic_mean(report.msa, report.mua).unwrap();
        assert!((h_of_means - 175.0 / 3.0).abs() < 1e-9); // 58.33...
        assert!((report.mh - h_of_means).abs() > 1.0);
    }

    #[test]
    fn constant_tasks_aggregate_to_the_constant() {
        let rows = vec![tm(1, 42.0, 42.0), tm(2, 42.0, 42.0), tm(3, 42.0, 42.0)];
        let report = continual_metrics_fixed(&rows, 4).unwrap();
        assert_eq!((report.msa, report.mua, report.mh), (42.0, 42.0, 42.0));
        let report = continual_metrics_dynamic(&rows).unwrap();
        assert_eq!((report.msa, report.mua, report.mh), (42.0, 42.0, 42.0));
    }

    #[test]
    fn fixed_aggregation_rejects_missing_tasks() {
        assert!(matches!(
            continual_metrics_fixed(&[tm(1, 50.0, 50.0)], 3),
            Err(Error::Metric(_))
        ));
        assert!(matches!(
            continual_metrics_fixed(&[tm(1, 50.0, 50.0), tm(3, 50.0, 50.0)], 3),
            Err(Error::Metric(_))
        ));
    }

    #[test]
    fn dynamic_k1_reduces_to_gzsl() {
        let single = tm(1, 63.0, 41.0);
        let dynamic = continual_metrics_dynamic(&[single]).unwrap();
        let gzsl = gzsl_report(single);
        assert_eq!(dynamic.msa, gzsl.msa);
        assert_eq!(dynamic.mua, gzsl.mua);
        assert_eq!(dynamic.mh, gzsl.mh);
    }

    #[test]
    fn dynamic_two_task_mean() {
        // Harmonics 40 and 60 average to 50.
        let a = TaskMetrics {
            task_id: 1,
            seen_acc: 40.0,
            unseen_acc: 40.0,
            harmonic: 40.0,
            seen_sample_acc: 0.0,
            unseen_sample_acc: 0.0,
        };
        let b = TaskMetrics { task_id: 2, harmonic: 60.0, ..a };
        let report = continual_metrics_dynamic(&[a, b]).unwrap();
        assert_eq!(report.mh, 50.0);
    }

    #[test]
    fn dynamic_report_has_one_row_per_task() {
        let rows: Vec<TaskMetrics> = (1..=20).map(|t| tm(t, 50.0, 40.0)).collect();
        let report = continual_metrics_dynamic(&rows).unwrap();
        assert_eq!(report.per_task.len(), 20);
    }
}
