//! Two-Gaussian planar task.
//!
//! Class +1 is drawn from N((2,0), I), class −1 from N((−2,0), I), equally
//! many per class, so the optimal decision boundary is the vertical axis and
//! the irreducible error is Φ(−2) ≈ 0.0228. Labels handed to the learner
//! (initial labeled set, validation set, later oracle answers) all follow the
//! sign of the first coordinate; test samples keep their generating class as
//! label, which is what puts the Φ(−2) floor under the test error.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng;

use super::{
    DatasetSpec, FeatureVector, Label, Sample, SampleId, SourceData, SourceSample, TaskKind,
};

/// Class-mean magnitude on the first coordinate.
pub const CLASS_MEAN: f64 = 2.0;

/// Label of the optimal (vertical-axis) decision rule; ties map to +1.
pub(crate) fn optimal_rule_label(x: &FeatureVector) -> Label {
    if x.0[0] >= 0.0 {
        Label::Pos
    } else {
        Label::Neg
    }
}

fn mean_of(class: Label) -> f64 {
    match class {
        Label::Pos => CLASS_MEAN,
        Label::Neg => -CLASS_MEAN,
    }
}

/// Draws one sample of `class`: first coordinate then second, unit variance.
fn draw(class: Label, rng: &mut impl Rng) -> FeatureVector {
    let horizontal = Normal::new(mean_of(class), 1.0).expect("fixed std");
    let vertical = Normal::new(0.0, 1.0).expect("fixed std");
    FeatureVector(vec![horizontal.sample(rng), vertical.sample(rng)])
}

/// Generates the natural pool and test set from `spec.seed`.
///
/// Draw order is fixed (pool +1, pool −1, test +1, test −1) so a given seed
/// is bit-reproducible. Ids number pool samples first, then test samples.
pub fn generate_synthetic_source(spec: &DatasetSpec) -> Result<SourceData> {
    if spec.task != TaskKind::Synthetic2d {
        return Err(Error::Config(format!(
            "synthetic generator invoked with task {}",
            spec.task
        )));
    }
    spec.validate()?;

    let mut rng = rng::stream_rng(spec.seed, rng::stream::DATA);
    let mut next_id = 0u64;
    let mut pool = Vec::with_capacity(2 * spec.pool_per_class);
    for class in Label::BOTH {
        for _ in 0..spec.pool_per_class {
            let x = draw(class, &mut rng);
            let assigned = optimal_rule_label(&x);
            pool.push(SourceSample::new(SampleId(next_id), x, assigned, class));
            next_id += 1;
        }
    }

    let mut test = Vec::with_capacity(spec.test_pos + spec.test_neg);
    for (class, count) in [(Label::Pos, spec.test_pos), (Label::Neg, spec.test_neg)] {
        for _ in 0..count {
            let x = draw(class, &mut rng);
            test.push(Sample::natural(SampleId(next_id), x, class));
            next_id += 1;
        }
    }

    Ok(SourceData::new(TaskKind::Synthetic2d, pool, test))
}
