//! Digits task: discriminate handwritten "5" (class +1) from "6" (class −1).
//!
//! From the supplied image/label files, a fixed-size pool per digit and a
//! disjoint test set are drawn uniformly at random under the dataset seed.
//! Pixels are scaled to `[0,1]`; labels come straight from the label file.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

use super::{DatasetSpec, IdxImages, Label, Sample, SampleId, SourceData, SourceSample, TaskKind};

/// Digit mapped to class +1.
pub const POS_DIGIT: u8 = 5;
/// Digit mapped to class −1.
pub const NEG_DIGIT: u8 = 6;

fn digit_of(class: Label) -> u8 {
    match class {
        Label::Pos => POS_DIGIT,
        Label::Neg => NEG_DIGIT,
    }
}

/// Draws `amount` distinct entries from `from`, in draw order.
fn draw_without_replacement(from: &[usize], amount: usize, rng: &mut impl Rng) -> Vec<usize> {
    rand::seq::index::sample(rng, from.len(), amount)
        .iter()
        .map(|k| from[k])
        .collect()
}

/// Selects the natural pool and test set for the digits task.
///
/// Ids number pool samples first (class +1 block, then class −1 block), then
/// test samples, mirroring the synthetic generator.
pub fn build_mnist_source(
    images: &IdxImages,
    labels: &[u8],
    spec: &DatasetSpec,
) -> Result<SourceData> {
    if spec.task != TaskKind::Mnist56 {
        return Err(Error::Config(format!(
            "digits task builder invoked with task {}",
            spec.task
        )));
    }
    spec.validate()?;
    if images.count != labels.len() {
        return Err(Error::Config(format!(
            "image file holds {} images but label file holds {} labels",
            images.count,
            labels.len()
        )));
    }

    let mut rng = rng::stream_rng(spec.seed, rng::stream::DATA);
    let mut pool = Vec::with_capacity(2 * spec.pool_per_class);
    let mut test = Vec::new();
    let mut next_id = 0u64;

    // Pool first for both classes, then tests, keeping id layout stable.
    let mut remaining: Vec<Vec<usize>> = Vec::new();
    for class in Label::BOTH {
        let digit = digit_of(class);
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == digit).collect();
        let test_want = match class {
            Label::Pos => spec.test_pos,
            Label::Neg => spec.test_neg,
        };
        if members.len() < spec.pool_per_class + test_want {
            return Err(Error::Config(format!(
                "need {} samples of digit {digit} ({} pool + {test_want} test) but only {} are available",
                spec.pool_per_class + test_want,
                spec.pool_per_class,
                members.len()
            )));
        }
        let picks = draw_without_replacement(&members, spec.pool_per_class, &mut rng);
        for &img in &picks {
            let x = images.feature_vector(img);
            pool.push(SourceSample::new(SampleId(next_id), x, class, class));
            next_id += 1;
        }
        let left: Vec<usize> = members
            .iter()
            .copied()
            .filter(|i| !picks.contains(i))
            .collect();
        remaining.push(left);
    }

    for (class, left) in Label::BOTH.into_iter().zip(remaining) {
        let test_want = match class {
            Label::Pos => spec.test_pos,
            Label::Neg => spec.test_neg,
        };
        for img in draw_without_replacement(&left, test_want, &mut rng) {
            test.push(Sample::natural(
                SampleId(next_id),
                images.feature_vector(img),
                class,
            ));
            next_id += 1;
        }
    }

    Ok(SourceData::new(TaskKind::Mnist56, pool, test))
}
