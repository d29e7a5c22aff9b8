//! Sample and pool types shared by every stage of an experiment.
//!
//! An experiment works with four disjoint sample sets: a small labeled
//! training set, a small labeled calibration ("validation") set, a large
//! unlabeled pool the learner queries from, and a held-out labeled test set.
//! All four are carved out of a [`SourceData`] object, which also retains
//! each natural sample's ground-truth label. Ground truth is deliberately
//! *not* stored on the pool samples themselves: the learner, the selection
//! strategies, and the attacker only ever see [`DataPools`], so hidden labels
//! cannot leak into training, selection, or attack decisions.

mod idx;
mod mnist;
mod synthetic;

pub use idx::{
    labels_to_idx_bytes, parse_idx, parse_idx_images, parse_idx_labels, IdxFile, IdxImages,
};
pub use mnist::build_mnist_source;
pub use synthetic::generate_synthetic_source;

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Dense real-valued feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    /// Class +1 (synthetic class centered at (2,0); digit "5").
    Pos,
    /// Class −1 (synthetic class centered at (−2,0); digit "6").
    Neg,
}

impl Label {
    /// +1.0 or −1.0.
    pub fn signum(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    /// Label for a decision value; ties (`f == 0`) map to `Pos`.
    pub fn from_decision(f: f64) -> Self {
        if f >= 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    pub const BOTH: [Label; 2] = [Label::Pos, Label::Neg];
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Pos => write!(f, "+1"),
            Label::Neg => write!(f, "-1"),
        }
    }
}

/// Where a sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Drawn from the task's data distribution / source files.
    Natural,
    /// Crafted and injected by the attacker.
    Adversarial,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Natural => write!(f, "natural"),
            Provenance::Adversarial => write!(f, "adversarial"),
        }
    }
}

/// Stable identity of a sample within one experiment.
///
/// Natural samples are numbered at source construction; adversarial samples
/// get fresh ids above the natural range. Pool-disjointness and conservation
/// checks compare ids, never feature values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleId(pub u64);

impl std::fmt::Display for SampleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One data point as the learner sees it.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: SampleId,
    pub features: FeatureVector,
    /// Present for labeled/validation/test samples; `None` while the sample
    /// sits in the unlabeled pool.
    pub label: Option<Label>,
    pub provenance: Provenance,
}

impl Sample {
    pub fn natural(id: SampleId, features: FeatureVector, label: Label) -> Self {
        Sample {
            id,
            features,
            label: Some(label),
            provenance: Provenance::Natural,
        }
    }

    pub fn natural_unlabeled(id: SampleId, features: FeatureVector) -> Self {
        Sample {
            id,
            features,
            label: None,
            provenance: Provenance::Natural,
        }
    }

    pub fn adversarial(id: SampleId, features: FeatureVector) -> Self {
        Sample {
            id,
            features,
            label: None,
            provenance: Provenance::Adversarial,
        }
    }
}

/// Which task a dataset spec describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Synthetic2d,
    Mnist56,
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TaskKind::Synthetic2d => write!(f, "synthetic2d"),
            TaskKind::Mnist56 => write!(f, "mnist56"),
        }
    }
}

/// Pool arithmetic for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub task: TaskKind,
    /// Source-pool size drawn per class.
    pub pool_per_class: usize,
    /// Initially labeled samples per class.
    pub labeled_per_class: usize,
    /// Calibration samples per class.
    pub validation_per_class: usize,
    /// Test samples for class +1.
    pub test_pos: usize,
    /// Test samples for class −1.
    pub test_neg: usize,
    /// Seed for source generation/selection (not for per-trial splits).
    pub seed: u64,
}

impl DatasetSpec {
    /// Two Gaussian blobs in the plane: 105 pool + 200 test per class,
    /// 5 labeled + 5 validation per class.
    pub fn synthetic_default(seed: u64) -> Self {
        DatasetSpec {
            task: TaskKind::Synthetic2d,
            pool_per_class: 105,
            labeled_per_class: 5,
            validation_per_class: 5,
            test_pos: 200,
            test_neg: 200,
            seed,
        }
    }

    /// Digits 5 (class +1) vs 6 (class −1): 105 pool per class,
    /// 5 labeled + 5 validation per class, 456 + 462 test samples.
    pub fn mnist_default(seed: u64) -> Self {
        DatasetSpec {
            task: TaskKind::Mnist56,
            pool_per_class: 105,
            labeled_per_class: 5,
            validation_per_class: 5,
            test_pos: 456,
            test_neg: 462,
            seed,
        }
    }

    /// Unlabeled-pool size implied by the per-class arithmetic.
    pub fn unlabeled_size(&self) -> usize {
        2 * (self.pool_per_class - self.labeled_per_class - self.validation_per_class)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pool_per_class == 0 {
            return Err(Error::Config("pool size per class must be positive".into()));
        }
        if self.labeled_per_class == 0 {
            return Err(Error::Config(
                "at least one labeled sample per class is required (the classifier needs both classes)".into(),
            ));
        }
        if self.validation_per_class == 0 {
            return Err(Error::Config(
                "at least one validation sample per class is required for calibration".into(),
            ));
        }
        if self.labeled_per_class + self.validation_per_class > self.pool_per_class {
            return Err(Error::Config(format!(
                "labeled ({}) + validation ({}) exceed the pool size per class ({})",
                self.labeled_per_class, self.validation_per_class, self.pool_per_class
            )));
        }
        if self.test_pos == 0 || self.test_neg == 0 {
            return Err(Error::Config("test set must contain both classes".into()));
        }
        Ok(())
    }
}

/// A natural sample plus its ground-truth label.
///
/// `assigned` is the label the learner receives when the sample lands in the
/// labeled or validation set. For the digits task it equals `truth`. For the
/// synthetic task it is the label the deterministic oracle would give (sign
/// of the first coordinate), while `truth` records the generating class,
/// which can differ for draws that crossed the optimal boundary.
#[derive(Debug, Clone)]
pub struct SourceSample {
    pub id: SampleId,
    pub features: FeatureVector,
    pub assigned: Label,
    truth: Label,
}

impl SourceSample {
    pub fn new(id: SampleId, features: FeatureVector, assigned: Label, truth: Label) -> Self {
        SourceSample {
            id,
            features,
            assigned,
            truth,
        }
    }
}

/// Immutable per-experiment source data: the natural pool, the test set, and
/// ground truth. Shared read-only across trials; each trial re-splits the
/// pool with its own stream.
#[derive(Debug, Clone)]
pub struct SourceData {
    pub task: TaskKind,
    pool: Vec<SourceSample>,
    test: Vec<Sample>,
}

impl SourceData {
    pub fn new(task: TaskKind, pool: Vec<SourceSample>, test: Vec<Sample>) -> Self {
        SourceData { task, pool, test }
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }

    pub fn test_len(&self) -> usize {
        self.test.len()
    }

    /// Ground-truth label of a natural pool or test sample.
    ///
    /// For oracle construction and diagnostics only — experiment code paths
    /// that act on behalf of the learner or the attacker must not call this.
    pub fn ground_truth(&self, id: SampleId) -> Option<Label> {
        self.pool
            .iter()
            .find(|s| s.id == id)
            .map(|s| s.truth)
            .or_else(|| self.test.iter().find(|s| s.id == id).and_then(|s| s.label))
    }

    /// Every natural sample (pool ∪ test) with its ground-truth label; the
    /// training set for the full-data labeling oracle.
    pub fn full_labeled_corpus(&self) -> Vec<Sample> {
        let mut out = Vec::with_capacity(self.pool.len() + self.test.len());
        for s in &self.pool {
            out.push(Sample::natural(s.id, s.features.clone(), s.truth));
        }
        out.extend(self.test.iter().cloned());
        out
    }

    /// First id above every natural sample id; adversarial ids start here.
    pub fn next_free_id(&self) -> u64 {
        self.pool
            .iter()
            .map(|s| s.id.0)
            .chain(self.test.iter().map(|s| s.id.0))
            .max()
            .map_or(0, |m| m + 1)
    }

    /// Splits the pool into labeled/validation/unlabeled sets.
    ///
    /// Per generating class, `labeled_per_class` samples are drawn uniformly
    /// without replacement, then `validation_per_class` more; the remainder
    /// becomes the unlabeled pool with labels hidden. The test set is shared
    /// by all trials.
    pub fn partition(&self, spec: &DatasetSpec, rng: &mut impl Rng) -> Result<DataPools> {
        spec.validate()?;
        let mut labeled = Vec::with_capacity(2 * spec.labeled_per_class);
        let mut validation = Vec::with_capacity(2 * spec.validation_per_class);
        let mut taken = HashSet::new();

        for class in Label::BOTH {
            let members: Vec<usize> = (0..self.pool.len())
                .filter(|&i| self.pool[i].truth == class)
                .collect();
            let want = spec.labeled_per_class + spec.validation_per_class;
            if members.len() < want {
                return Err(Error::Config(format!(
                    "class {class} has {} pool samples but the split needs {want}",
                    members.len()
                )));
            }
            let picks = rand::seq::index::sample(rng, members.len(), want);
            for (k, pick) in picks.iter().enumerate() {
                let idx = members[pick];
                let s = &self.pool[idx];
                taken.insert(idx);
                let sample = Sample::natural(s.id, s.features.clone(), s.assigned);
                if k < spec.labeled_per_class {
                    labeled.push(sample);
                } else {
                    validation.push(sample);
                }
            }
        }

        let unlabeled: Vec<Sample> = (0..self.pool.len())
            .filter(|i| !taken.contains(i))
            .map(|i| {
                let s = &self.pool[i];
                Sample::natural_unlabeled(s.id, s.features.clone())
            })
            .collect();

        for class in Label::BOTH {
            if !labeled.iter().any(|s| s.label == Some(class)) {
                return Err(Error::Config(format!(
                    "initial labeled set carries no {class} samples; training needs both classes"
                )));
            }
        }

        let pools = DataPools {
            labeled,
            validation,
            unlabeled,
            test: self.test.clone(),
        };
        pools.assert_disjoint();
        Ok(pools)
    }
}

/// The four disjoint sample sets of one running trial.
#[derive(Debug, Clone)]
pub struct DataPools {
    /// Labeled training set.
    pub labeled: Vec<Sample>,
    /// Calibration set; fixed for the whole experiment.
    pub validation: Vec<Sample>,
    /// Queryable unlabeled pool.
    pub unlabeled: Vec<Sample>,
    /// Held-out labeled evaluation set.
    pub test: Vec<Sample>,
}

impl DataPools {
    /// Combined labeled + unlabeled population, the normalizer of the
    /// expected-utility average. Recomputed on demand so transfers and
    /// injections can never leave it stale.
    pub fn population(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    /// Moves `unlabeled[index]` into the labeled set under `label`.
    /// Preserves insertion order of the remaining unlabeled samples.
    pub fn transfer_unlabeled(&mut self, index: usize, label: Label) -> Result<SampleId> {
        if index >= self.unlabeled.len() {
            return Err(Error::Selection(format!(
                "transfer index {index} out of bounds for unlabeled pool of {}",
                self.unlabeled.len()
            )));
        }
        let mut sample = self.unlabeled.remove(index);
        sample.label = Some(label);
        let id = sample.id;
        self.labeled.push(sample);
        Ok(id)
    }

    /// Appends an attacker-crafted sample to the unlabeled pool.
    pub fn inject(&mut self, sample: Sample) -> Result<()> {
        if sample.label.is_some() {
            return Err(Error::Validation(
                "injected sample must be unlabeled".into(),
            ));
        }
        if sample.provenance != Provenance::Adversarial {
            return Err(Error::Validation(
                "injected sample must have adversarial provenance".into(),
            ));
        }
        self.unlabeled.push(sample);
        Ok(())
    }

    /// Ids in all four pools, in pool order.
    pub fn id_sets(&self) -> [HashSet<SampleId>; 4] {
        [
            self.labeled.iter().map(|s| s.id).collect(),
            self.validation.iter().map(|s| s.id).collect(),
            self.unlabeled.iter().map(|s| s.id).collect(),
            self.test.iter().map(|s| s.id).collect(),
        ]
    }

    /// Panics if any two pools share a sample identity.
    pub fn assert_disjoint(&self) {
        let sets = self.id_sets();
        let names = ["labeled", "validation", "unlabeled", "test"];
        for i in 0..4 {
            for j in i + 1..4 {
                assert!(
                    sets[i].is_disjoint(&sets[j]),
                    "pools {} and {} share sample ids",
                    names[i],
                    names[j]
                );
            }
        }
    }
}

/// Builds pools directly from a synthetic dataset description, splitting
/// with a stream derived from its seed. Multi-trial runs split per trial
/// instead.
pub fn generate_synthetic(spec: &DatasetSpec) -> Result<DataPools> {
    let source = generate_synthetic_source(spec)?;
    let mut rng = rng::stream_rng(spec.seed, rng::stream::SPLIT);
    source.partition(spec, &mut rng)
}

/// Builds pools for the digits task from parsed IDX data, splitting with a
/// stream derived from the dataset description's seed.
pub fn build_mnist_task(
    images: &IdxImages,
    labels: &[u8],
    spec: &DatasetSpec,
) -> Result<DataPools> {
    let source = build_mnist_source(images, labels, spec)?;
    let mut rng = rng::stream_rng(spec.seed, rng::stream::SPLIT);
    source.partition(spec, &mut rng)
}
