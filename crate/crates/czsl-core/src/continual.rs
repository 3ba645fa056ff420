//! Continual-GZSL task streams, reservoir sampling, and augmented-pool
//! assembly.
//!
//! The fixed protocol partitions one fixed class universe into K subsets;
//! seen classes accumulate as tasks arrive and the remainder stays unseen.
//! The dynamic protocol brings disjoint new seen and unseen classes with
//! every task, and attribute rows for classes of future tasks are never
//! reachable from earlier views.

use crate::data::{DatasetBundle, FeatureDataset};
use crate::error::{Error, Result};
use crate::numkit::matrix::Matrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Gzsl,
    Fixed,
    Dynamic,
}

/// Everything visible at one task: current training data, the evaluation
/// data, the cumulative seen and protocol-dependent unseen class sets, and
/// the attribute rows for exactly those classes.
#[derive(Debug, Clone)]
pub struct TaskView {
    /// 1-based task index.
    pub task_id: usize,
    /// Training samples of the classes introduced at this task only.
    pub train: FeatureDataset,
    /// Test samples over seen(view) plus unseen(view).
    pub test: FeatureDataset,
    /// Cumulative seen class ids.
    pub seen_class_ids: Vec<usize>,
    /// Unseen class ids of this view (remainder for fixed, cumulative for dynamic).
    pub unseen_class_ids: Vec<usize>,
    /// Classes whose training data arrives with this task.
    pub train_class_ids: Vec<usize>,
    /// Attribute rows aligned with `attr_class_ids` (seen first, then unseen).
    pub attributes: Matrix,
    pub attr_class_ids: Vec<usize>,
}

impl TaskView {
    /// Attribute rows of the seen classes, in `seen_class_ids` order.
    pub fn seen_attributes(&self) -> Matrix {
        let rows: Vec<Vec<f64>> = (0..self.seen_class_ids.len())
            .map(|i| self.attributes.row(i).to_vec())
            .collect();
        Matrix::from_rows(&rows)
    }

    fn check_invariants(&self) -> Result<()> {
        let seen: BTreeSet<usize> = self.seen_class_ids.iter().copied().collect();
        let unseen: BTreeSet<usize> = self.unseen_class_ids.iter().copied().collect();
        if let Some(id) = seen.intersection(&unseen).next() {
            return Err(Error::Protocol(format!(
                "task {}: class {id} is both seen and unseen",
                self.task_id
            )));
        }
        if !self.train_class_ids.iter().all(|c| seen.contains(c)) {
            return Err(Error::Protocol(format!(
                "task {}: training classes are not a subset of seen classes",
                self.task_id
            )));
        }
        if let Some(&bad) = self.train.labels.iter().find(|y| !self.train_class_ids.contains(y)) {
            return Err(Error::Protocol(format!(
                "task {}: training label {bad} outside the task's classes",
                self.task_id
            )));
        }
        let visible: BTreeSet<usize> = seen.union(&unseen).copied().collect();
        if let Some(&bad) = self.test.labels.iter().find(|y| !visible.contains(y)) {
            return Err(Error::Protocol(format!(
                "task {}: test label {bad} outside seen+unseen of the view",
                self.task_id
            )));
        }
        if self.attr_class_ids.len() != self.attributes.rows() {
            return Err(Error::Protocol(format!(
                "task {}: attribute table rows mismatch",
                self.task_id
            )));
        }
        Ok(())
    }
}

/// An ordered sequence of task views under one protocol.
#[derive(Debug, Clone)]
pub struct TaskStream {
    pub protocol: Protocol,
    pub views: Vec<TaskView>,
    /// Class total used for the reservoir budget: S+U for fixed, S for dynamic.
    pub reservoir_class_total: usize,
}

impl TaskStream {
    pub fn task_count(&self) -> usize {
        self.views.len()
    }

    /// Serializable manifest of the stream for reproducibility.
    pub fn manifest(&self) -> StreamManifest {
        StreamManifest {
            protocol: self.protocol,
            task_count: self.views.len(),
            reservoir_class_total: self.reservoir_class_total,
            tasks: self
                .views
                .iter()
                .map(|v| TaskManifest {
                    task: v.task_id,
                    train_classes: v.train_class_ids.clone(),
                    seen_classes: v.seen_class_ids.clone(),
                    unseen_classes: v.unseen_class_ids.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamManifest {
    pub protocol: Protocol,
    pub task_count: usize,
    pub reservoir_class_total: usize,
    pub tasks: Vec<TaskManifest>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskManifest {
    pub task: usize,
    pub train_classes: Vec<usize>,
    pub seen_classes: Vec<usize>,
    pub unseen_classes: Vec<usize>,
}

/// Partition sizes: `count` classes over `k` groups, larger groups last
/// (717 over 15 gives three 47s then twelve 48s).
fn partition_sizes(count: usize, k: usize) -> Vec<usize> {
    let base = count / k;
    let rem = count - base * k;
    (0..k).map(|i| base + usize::from(i >= k - rem)).collect()
}

/// Like `partition_sizes` but with the larger groups first, matching the
/// documented dynamic unseen splits (50 over 20 gives ten 3s then ten 2s).
fn partition_sizes_front(count: usize, k: usize) -> Vec<usize> {
    let base = count / k;
    let rem = count - base * k;
    (0..k).map(|i| base + usize::from(i < rem)).collect()
}

/// Build the fixed-protocol stream: all classes in bundle order (optionally
/// seed-shuffled) are split into `k` subsets; at task t the first t subsets
/// are seen, the rest unseen, and only subset t's training data is available.
pub fn build_fixed_stream(
    bundle: &DatasetBundle,
    k: usize,
    shuffle_seed: Option<u64>,
) -> Result<TaskStream> {
    let c = bundle.num_classes();
    if k < 2 {
        return Err(Error::Protocol(format!(
            "fixed protocol needs at least 2 tasks, got {k}"
        )));
    }
    if k > c {
        return Err(Error::Protocol(format!("cannot split {c} classes into {k} tasks")));
    }
    let mut order: Vec<usize> = (0..c).collect();
    if let Some(seed) = shuffle_seed {
        shuffle(&mut order, seed);
    }
    let sizes = partition_sizes(c, k);
    let mut subsets = Vec::with_capacity(k);
    let mut cursor = 0;
    for s in sizes {
        subsets.push(order[cursor..cursor + s].to_vec());
        cursor += s;
    }

    let mut views = Vec::with_capacity(k);
    for t in 1..=k {
        let seen: Vec<usize> = subsets[..t].concat();
        let unseen: Vec<usize> = subsets[t..].concat();
        let train_classes = subsets[t - 1].clone();
        let seen_set: BTreeSet<usize> = seen.iter().copied().collect();
        let unseen_set: BTreeSet<usize> = unseen.iter().copied().collect();
        let train = bundle.train_subset(&train_classes.iter().copied().collect());
        let test_seen = bundle.test_subset(&seen_set);
        let test_unseen = bundle.test_subset(&unseen_set);
        let test = test_seen.concat(&test_unseen)?;
        let mut attr_classes = seen.clone();
        attr_classes.extend_from_slice(&unseen);
        let view = TaskView {
            task_id: t,
            train,
            test,
            seen_class_ids: seen,
            unseen_class_ids: unseen,
            train_class_ids: train_classes,
            attributes: bundle.attribute_rows(&attr_classes),
            attr_class_ids: attr_classes,
        };
        view.check_invariants()?;
        views.push(view);
    }
    Ok(TaskStream { protocol: Protocol::Fixed, views, reservoir_class_total: c })
}

/// Default per-task class counts for a dynamic stream: seen classes are
/// spread base-first (remainder at the back), unseen remainder-first,
/// matching the documented 20-task splits.
pub fn default_dynamic_counts(seen_total: usize, unseen_total: usize, k: usize) -> (Vec<usize>, Vec<usize>) {
    (partition_sizes(seen_total, k), partition_sizes_front(unseen_total, k))
}

/// Build the dynamic-protocol stream from per-task seen/unseen class counts.
/// Evaluation at task t covers cumulative seen and cumulative unseen classes;
/// attribute rows of later tasks' classes are not present in earlier views.
pub fn build_dynamic_stream(
    bundle: &DatasetBundle,
    seen_counts: &[usize],
    unseen_counts: &[usize],
) -> Result<TaskStream> {
    if seen_counts.len() != unseen_counts.len() || seen_counts.is_empty() {
        return Err(Error::Protocol(
            "dynamic protocol needs equal, nonempty seen/unseen count lists".into(),
        ));
    }
    let s_total: usize = seen_counts.iter().sum();
    let u_total: usize = unseen_counts.iter().sum();
    if s_total != bundle.seen_ids.len() {
        return Err(Error::Protocol(format!(
            "seen counts sum to {s_total}, bundle has {} seen classes",
            bundle.seen_ids.len()
        )));
    }
    if u_total != bundle.unseen_ids.len() {
        return Err(Error::Protocol(format!(
            "unseen counts sum to {u_total}, bundle has {} unseen classes",
            bundle.unseen_ids.len()
        )));
    }
    if seen_counts.iter().any(|&n| n == 0) {
        return Err(Error::Protocol("every task needs at least one seen class".into()));
    }

    let k = seen_counts.len();
    let mut views = Vec::with_capacity(k);
    let (mut s_cursor, mut u_cursor) = (0, 0);
    for t in 1..=k {
        let s_here = seen_counts[t - 1];
        let u_here = unseen_counts[t - 1];
        let train_classes = bundle.seen_ids[s_cursor..s_cursor + s_here].to_vec();
        s_cursor += s_here;
        u_cursor += u_here;
        let seen = bundle.seen_ids[..s_cursor].to_vec();
        let unseen = bundle.unseen_ids[..u_cursor].to_vec();
        let seen_set: BTreeSet<usize> = seen.iter().copied().collect();
        let unseen_set: BTreeSet<usize> = unseen.iter().copied().collect();
        let train = bundle.train_subset(&train_classes.iter().copied().collect());
        let test = bundle.test_subset(&seen_set).concat(&bundle.test_subset(&unseen_set))?;
        let mut attr_classes = seen.clone();
        attr_classes.extend_from_slice(&unseen);
        let view = TaskView {
            task_id: t,
            train,
            test,
            seen_class_ids: seen,
            unseen_class_ids: unseen,
            train_class_ids: train_classes,
            attributes: bundle.attribute_rows(&attr_classes),
            attr_class_ids: attr_classes,
        };
        view.check_invariants()?;
        views.push(view);
    }
    Ok(TaskStream {
        protocol: Protocol::Dynamic,
        views,
        reservoir_class_total: bundle.seen_ids.len(),
    })
}

/// Single-phase GZSL as a one-task view: all bundle seen classes are
/// trainable at once and evaluation covers the full seen+unseen test data.
pub fn gzsl_view(bundle: &DatasetBundle) -> Result<TaskView> {
    if bundle.seen_ids.is_empty() || bundle.unseen_ids.is_empty() {
        return Err(Error::Protocol(
            "gzsl needs nonempty seen and unseen class sets".into(),
        ));
    }
    let seen = bundle.seen_ids.clone();
    let unseen = bundle.unseen_ids.clone();
    let seen_set: BTreeSet<usize> = seen.iter().copied().collect();
    let unseen_set: BTreeSet<usize> = unseen.iter().copied().collect();
    let train = bundle.train_subset(&seen_set);
    let test = bundle.test_subset(&seen_set).concat(&bundle.test_subset(&unseen_set))?;
    let mut attr_classes = seen.clone();
    attr_classes.extend_from_slice(&unseen);
    let view = TaskView {
        task_id: 1,
        train,
        test,
        seen_class_ids: seen.clone(),
        unseen_class_ids: unseen,
        train_class_ids: seen,
        attributes: bundle.attribute_rows(&attr_classes),
        attr_class_ids: attr_classes,
    };
    view.check_invariants()?;
    Ok(view)
}

/// Fisher-Yates with a dedicated stream.
fn shuffle(order: &mut [usize], seed: u64) {
    let mut rng = crate::rng::stream(seed, "class-order");
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}

/// One replayable sample; the label doubles as the attribute-row reference.
#[derive(Debug, Clone)]
pub struct ReplaySample {
    pub feature: Vec<f64>,
    pub label: usize,
    pub task_id: usize,
}

/// Bounded replay memory with stream-count bookkeeping.
#[derive(Debug, Clone)]
pub struct Reservoir {
    capacity: usize,
    stream_count: u64,
    items: Vec<ReplaySample>,
}

impl Reservoir {
    pub fn new(capacity: usize) -> Self {
        Reservoir { capacity, stream_count: 0, items: Vec::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn stream_count(&self) -> u64 {
        self.stream_count
    }

    pub fn items(&self) -> &[ReplaySample] {
        &self.items
    }

    /// Offer one sample: kept outright below capacity, otherwise it replaces
    /// a uniformly chosen slot with probability M/N.
    pub fn offer(&mut self, sample: ReplaySample, rng: &mut impl Rng) {
        self.stream_count += 1;
        if self.capacity == 0 {
            return;
        }
        if self.items.len() < self.capacity {
            self.items.push(sample);
        } else {
            let j = rng.gen_range(0..self.stream_count);
            if (j as usize) < self.capacity {
                self.items[j as usize] = sample;
            }
        }
    }

    /// Offer every training sample of a task view (seen-class data only, by
    /// construction of the views).
    pub fn absorb_task(&mut self, view: &TaskView, rng: &mut impl Rng) {
        for i in 0..view.train.len() {
            self.offer(
                ReplaySample {
                    feature: view.train.features.row(i).to_vec(),
                    label: view.train.labels[i],
                    task_id: view.task_id,
                },
                rng,
            );
        }
    }
}

/// Replay memory concatenated with the current task's training set; labels
/// are global ids throughout, so no remapping is required beyond stacking.
pub fn augmented_pool(reservoir: &Reservoir, current: &FeatureDataset) -> Result<FeatureDataset> {
    if reservoir.is_empty() {
        return Ok(current.clone());
    }
    let dim = reservoir.items[0].feature.len();
    if !current.is_empty() && current.feat_dim() != dim {
        return Err(Error::Data(format!(
            "augmented pool: reservoir features have {dim} dims, task has {}",
            current.feat_dim()
        )));
    }
    let rows: Vec<Vec<f64>> = reservoir.items.iter().map(|s| s.feature.clone()).collect();
    let replay = FeatureDataset {
        features: Matrix::from_rows(&rows),
        labels: reservoir.items.iter().map(|s| s.label).collect(),
    };
    replay.concat(current)
}

/// Reservoir capacity B x #classes; the class basis is the protocol-wide
/// total recorded on the stream (S+U fixed, S dynamic).
pub fn reservoir_capacity(b_per_class: usize, stream: &TaskStream) -> usize {
    b_per_class * stream.reservoir_class_total
}
