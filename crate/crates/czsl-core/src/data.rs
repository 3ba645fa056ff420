//! In-memory dataset bundle, its invariants, and the synthetic generator
//! used for desk-scale verification. File formats live in the companion CLI
//! crate; the engine only sees validated bundles.

use crate::error::{Error, Result};
use crate::numkit::matrix::Matrix;
use crate::rng;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Visual features with their global class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
}

impl FeatureDataset {
    pub fn empty(feat_dim: usize) -> Self {
        FeatureDataset { features: Matrix::zeros(0, feat_dim), labels: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feat_dim(&self) -> usize {
        self.features.cols()
    }

    /// Samples whose label falls in `classes`, in original order.
    pub fn filter_classes(&self, classes: &BTreeSet<usize>) -> FeatureDataset {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| classes.contains(&self.labels[i]))
            .collect();
        let rows: Vec<Vec<f64>> = keep.iter().map(|&i| self.features.row(i).to_vec()).collect();
        FeatureDataset {
            features: if rows.is_empty() {
                Matrix::zeros(0, self.feat_dim())
            } else {
                Matrix::from_rows(&rows)
            },
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Concatenate two datasets over the same feature space.
    pub fn concat(&self, other: &FeatureDataset) -> Result<FeatureDataset> {
        if !self.is_empty() && !other.is_empty() && self.feat_dim() != other.feat_dim() {
            return Err(Error::Dimension(format!(
                "concat: feature dims {} vs {}",
                self.feat_dim(),
                other.feat_dim()
            )));
        }
        if self.is_empty() {
            return Ok(other.clone());
        }
        if other.is_empty() {
            return Ok(self.clone());
        }
        let mut data = self.features.as_slice().to_vec();
        data.extend_from_slice(other.features.as_slice());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(FeatureDataset {
            features: Matrix::new(self.len() + other.len(), self.feat_dim(), data),
            labels,
        })
    }
}

/// A full dataset: features, labels, the per-class attribute matrix, the
/// seen/unseen split, and a per-sample test designation.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub features: Matrix,
    pub labels: Vec<usize>,
    /// True for held-out test samples. Unseen-class samples are always test.
    pub test_mask: Vec<bool>,
    pub attributes: Matrix,
    pub class_names: Vec<String>,
    pub seen_ids: Vec<usize>,
    pub unseen_ids: Vec<usize>,
    pub val_ids: Option<Vec<usize>>,
    pub name: String,
    pub provenance: String,
}

impl DatasetBundle {
    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.attributes.rows()
    }

    pub fn feat_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn attr_dim(&self) -> usize {
        self.attributes.cols()
    }

    /// Check every structural invariant; called by loaders and generators.
    pub fn validate(&self) -> Result<()> {
        let c = self.num_classes();
        if self.labels.len() != self.features.rows() {
            return Err(Error::Data(format!(
                "{} labels for {} feature rows",
                self.labels.len(),
                self.features.rows()
            )));
        }
        if self.test_mask.len() != self.labels.len() {
            return Err(Error::Data(format!(
                "test mask covers {} of {} samples",
                self.test_mask.len(),
                self.labels.len()
            )));
        }
        if let Some((row, &bad)) = self.labels.iter().enumerate().find(|(_, &y)| y >= c) {
            return Err(Error::Label(format!(
                "label {bad} at row {row} out of range 0..{c}"
            )));
        }
        if !self.features.all_finite() {
            return Err(Error::Data("non-finite feature value".into()));
        }
        if !self.attributes.all_finite() {
            return Err(Error::Data("non-finite attribute value".into()));
        }
        if self.class_names.len() != c {
            return Err(Error::Data(format!(
                "{} class names for {} classes",
                self.class_names.len(),
                c
            )));
        }
        let seen: BTreeSet<usize> = self.seen_ids.iter().copied().collect();
        let unseen: BTreeSet<usize> = self.unseen_ids.iter().copied().collect();
        if let Some(id) = seen.intersection(&unseen).next() {
            return Err(Error::Data(format!("class {id} is both seen and unseen")));
        }
        let all: BTreeSet<usize> = (0..c).collect();
        let union: BTreeSet<usize> = seen.union(&unseen).copied().collect();
        if union != all {
            return Err(Error::Data(format!(
                "seen/unseen union covers {} of {} classes",
                union.len(),
                c
            )));
        }
        // Every unseen-class sample must be a test sample.
        for i in 0..self.num_samples() {
            if unseen.contains(&self.labels[i]) && !self.test_mask[i] {
                return Err(Error::Data(format!(
                    "sample {i} of unseen class {} marked as training data",
                    self.labels[i]
                )));
            }
        }
        Ok(())
    }

    /// Training samples (not test-masked) whose label is in `classes`.
    pub fn train_subset(&self, classes: &BTreeSet<usize>) -> FeatureDataset {
        self.subset(|i| !self.test_mask[i] && classes.contains(&self.labels[i]))
    }

    /// Test samples whose label is in `classes`.
    pub fn test_subset(&self, classes: &BTreeSet<usize>) -> FeatureDataset {
        self.subset(|i| self.test_mask[i] && classes.contains(&self.labels[i]))
    }

    fn subset(&self, keep: impl Fn(usize) -> bool) -> FeatureDataset {
        let idx: Vec<usize> = (0..self.num_samples()).filter(|&i| keep(i)).collect();
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| self.features.row(i).to_vec()).collect();
        FeatureDataset {
            features: if rows.is_empty() {
                Matrix::zeros(0, self.feat_dim())
            } else {
                Matrix::from_rows(&rows)
            },
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Attribute rows for the given classes, in the given order.
    pub fn attribute_rows(&self, class_ids: &[usize]) -> Matrix {
        let rows: Vec<Vec<f64>> = class_ids
            .iter()
            .map(|&c| self.attributes.row(c).to_vec())
            .collect();
        Matrix::from_rows(&rows)
    }

    /// L2-normalize each attribute row in place (rows of zero norm are kept).
    pub fn l2_normalize_attributes(&mut self) {
        let cols = self.attributes.cols();
        for r in 0..self.attributes.rows() {
            let n = crate::numkit::l2_norm(self.attributes.row(r));
            if n > 0.0 {
                let row = self.attributes.row_mut(r);
                for j in 0..cols {
                    row[j] /= n;
                }
            }
        }
    }
}

/// Deterministic fallback test split: every 4th sample of each class, in
/// dataset order, is held out; unseen-class samples are always test.
pub fn derive_test_mask(labels: &[usize], unseen: &BTreeSet<usize>) -> Vec<bool> {
    let mut per_class_rank: BTreeMap<usize, usize> = BTreeMap::new();
    labels
        .iter()
        .map(|&y| {
            if unseen.contains(&y) {
                return true;
            }
            let rank = per_class_rank.entry(y).or_insert(0);
            let test = *rank % 4 == 0;
            *rank += 1;
            test
        })
        .collect()
}

/// Hidden map from attribute space to class prototypes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Linear,
    Mlp,
}

/// Specification for a synthetic bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: usize,
    pub seen: usize,
    pub attr_dim: usize,
    pub feat_dim: usize,
    /// Training samples per seen class; every class additionally receives
    /// max(2, samples_per_class / 4) test samples.
    pub samples_per_class: usize,
    pub noise_sigma: f64,
    pub map: MapKind,
    pub seed: u64,
}

impl SynthSpec {
    /// The stock desk-scale problem: 15 seen / 5 unseen classes, D = 16,
    /// d = 32, sigma = 0.05, 200 samples per class, linear prototype map.
    pub fn default_problem(seed: u64) -> Self {
        SynthSpec {
            classes: 20,
            seen: 15,
            attr_dim: 16,
            feat_dim: 32,
            samples_per_class: 200,
            noise_sigma: 0.05,
            map: MapKind::Linear,
            seed,
        }
    }

    pub fn test_per_class(&self) -> usize {
        (self.samples_per_class / 4).max(2)
    }
}

/// Generate a synthetic ZSL bundle: class attributes are uniform in
/// (-1, 1)^D, prototypes come from a hidden seeded map G, and features are
/// prototypes plus isotropic Gaussian noise. Seen classes get training and
/// test samples; unseen classes get test samples only.
pub fn synth_generate(spec: &SynthSpec) -> Result<DatasetBundle> {
    if spec.classes < 2 {
        return Err(Error::Config("synthetic bundle needs at least 2 classes".into()));
    }
    if spec.seen == 0 || spec.seen >= spec.classes {
        return Err(Error::Config(format!(
            "invalid split: {} seen of {} classes (need >= 1 seen and >= 1 unseen)",
            spec.seen, spec.classes
        )));
    }
    if spec.attr_dim == 0 || spec.feat_dim == 0 || spec.samples_per_class == 0 {
        return Err(Error::Config("synthetic dimensions must be positive".into()));
    }
    let mut rng = rng::stream(spec.seed, "synth");
    let (c, d_attr, d_feat) = (spec.classes, spec.attr_dim, spec.feat_dim);

    let mut attributes = Matrix::zeros(c, d_attr);
    for r in 0..c {
        for v in attributes.row_mut(r) {
            *v = rng.gen_range(-1.0..1.0);
        }
    }

    // Hidden prototype map G, scaled so prototype spread is O(1) per axis.
    let hidden = d_attr.max(d_feat);
    let lin_scale = 1.0 / (d_attr as f64).sqrt();
    let w_lin: Vec<f64> = (0..d_feat * d_attr)
        .map(|_| rng.gen_range(-1.0..1.0) * lin_scale)
        .collect();
    let w1: Vec<f64> = (0..hidden * d_attr)
        .map(|_| rng.gen_range(-1.0..1.0) * lin_scale)
        .collect();
    let w2_scale = 1.0 / (hidden as f64).sqrt();
    let w2: Vec<f64> = (0..d_feat * hidden)
        .map(|_| rng.gen_range(-1.0..1.0) * w2_scale)
        .collect();
    let prototype = |a: &[f64]| -> Vec<f64> {
        match spec.map {
            MapKind::Linear => {
                let mut out = vec![0.0; d_feat];
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &w_lin[i * d_attr..(i + 1) * d_attr];
                    *o = row.iter().zip(a).map(|(&w, &x)| w * x).sum();
                }
                out
            }
            MapKind::Mlp => {
                let mut h = vec![0.0; hidden];
                for (i, hv) in h.iter_mut().enumerate() {
                    let row = &w1[i * d_attr..(i + 1) * d_attr];
                    *hv = row.iter().zip(a).map(|(&w, &x)| w * x).sum::<f64>().tanh();
                }
                let mut out = vec![0.0; d_feat];
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &w2[i * hidden..(i + 1) * hidden];
                    *o = row.iter().zip(&h).map(|(&w, &x)| w * x).sum();
                }
                out
            }
        }
    };

    let prototypes: Vec<Vec<f64>> = (0..c).map(|y| prototype(attributes.row(y))).collect();
    let noise = Normal::new(0.0, spec.noise_sigma.max(0.0))
        .map_err(|e| Error::Config(format!("bad noise sigma: {e}")))?;

    let test_per_class = spec.test_per_class();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut test_mask = Vec::new();
    for y in 0..c {
        let seen = y < spec.seen;
        let train_n = if seen { spec.samples_per_class } else { 0 };
        for k in 0..train_n + test_per_class {
            let row: Vec<f64> = prototypes[y]
                .iter()
                .map(|&p| {
                    if spec.noise_sigma > 0.0 {
                        p + noise.sample(&mut rng)
                    } else {
                        p
                    }
                })
                .collect();
            features.extend_from_slice(&row);
            labels.push(y);
            test_mask.push(k >= train_n);
        }
    }

    let bundle = DatasetBundle {
        features: Matrix::new(labels.len(), d_feat, features),
        labels,
        test_mask,
        attributes,
        class_names: (0..c).map(|y| format!("class_{y:03}")).collect(),
        seen_ids: (0..spec.seen).collect(),
        unseen_ids: (spec.seen..c).collect(),
        val_ids: None,
        name: "synthetic".into(),
        provenance: format!(
            "synthetic bundle: {c} classes ({} seen), D={d_attr}, d={d_feat}, sigma={}, {:?} map, seed {}",
            spec.seen, spec.noise_sigma, spec.map, spec.seed
        ),
    };
    bundle.validate()?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_linear_map_gives_identical_features_per_class() {
        let spec = SynthSpec {
            classes: 4,
            seen: 3,
            attr_dim: 5,
            feat_dim: 6,
            samples_per_class: 4,
            noise_sigma: 0.0,
            map: MapKind::Linear,
            seed: 1,
        };
        let bundle = synth_generate(&spec).unwrap();
        for y in 0..4 {
            let rows: Vec<&[f64]> = (0..bundle.num_samples())
                .filter(|&i| bundle.labels[i] == y)
                .map(|i| bundle.features.row(i))
                .collect();
            assert!(rows.len() >= 2);
            for r in &rows[1..] {
                assert_eq!(*r, rows[0], "class {y} features differ at sigma=0");
            }
        }
    }

    #[test]
    fn same_seed_gives_bit_identical_bundles() {
        let spec = SynthSpec::default_problem(42);
        let a = synth_generate(&spec).unwrap();
        let b = synth_generate(&spec).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.attributes, b.attributes);
        assert_eq!(a.test_mask, b.test_mask);
    }

    #[test]
    fn unseen_classes_have_test_samples_only() {
        let bundle = synth_generate(&SynthSpec::default_problem(7)).unwrap();
        let unseen: BTreeSet<usize> = bundle.unseen_ids.iter().copied().collect();
        for i in 0..bundle.num_samples() {
            if unseen.contains(&bundle.labels[i]) {
                assert!(bundle.test_mask[i]);
            }
        }
        let train = bundle.train_subset(&unseen);
        assert!(train.is_empty());
        let test = bundle.test_subset(&unseen);
        assert_eq!(test.len(), 5 * 50);
    }

    #[test]
    fn invalid_splits_are_rejected() {
        let mut spec = SynthSpec::default_problem(1);
        spec.seen = 0;
        assert!(synth_generate(&spec).is_err());
        spec.seen = spec.classes;
        assert!(synth_generate(&spec).is_err());
    }

    #[test]
    fn validate_catches_label_range_and_split_errors() {
        let mut bundle = synth_generate(&SynthSpec {
            classes: 3,
            seen: 2,
            attr_dim: 2,
            feat_dim: 2,
            samples_per_class: 2,
            noise_sigma: 0.1,
            map: MapKind::Linear,
            seed: 0,
        })
        .unwrap();
        bundle.labels[0] = 3;
        assert!(matches!(bundle.validate(), Err(Error::Label(_))));
        bundle.labels[0] = 0;
        bundle.unseen_ids = vec![1, 2];
        assert!(matches!(bundle.validate(), Err(Error::Data(_))));
    }

    #[test]
    fn derived_mask_holds_out_a_quarter_per_class() {
        let labels = vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2];
        let unseen: BTreeSet<usize> = [2].into_iter().collect();
        let mask = derive_test_mask(&labels, &unseen);
        assert_eq!(mask, vec![true, false, false, false, true, false, false, false, true, true]);
    }

    #[test]
    fn attribute_normalization_produces_unit_rows() {
        let mut bundle = synth_generate(&SynthSpec::default_problem(3)).unwrap();
        bundle.l2_normalize_attributes();
        for r in 0..bundle.attributes.rows() {
            let n = crate::numkit::l2_norm(bundle.attributes.row(r));
            assert!((n - 1.0).abs() < 1e-12);
        }
    }
}
