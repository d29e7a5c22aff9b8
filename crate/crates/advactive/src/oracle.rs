//! Deterministic labeling oracles.
//!
//! The synthetic task is labeled by the known optimal rule (the sign of the
//! first coordinate — the generating Gaussians straddle the vertical axis).
//! The image task is labeled by a max-margin linear SVM trained once on the
//! entire corpus (pool and test together); the corpus must be linearly
//! separable, which the builder verifies by requiring zero training error.
//! Either way the same input always receives the same label, and natural
//! samples keep their original labels.

use crate::data::{FeatureVector, Label, Sample};
use crate::error::{Error, Result};
use crate::svm::{solve, LinearModel, SolverConfig, TrainingSet};

/// Hinge weight of the full-corpus oracle SVM: large enough to act as a
/// hard-margin surrogate on separable data.
pub const ORACLE_C: f64 = 1e4;
/// Convergence tolerance of the oracle SVM.
pub const ORACLE_TOLERANCE: f64 = 1e-6;

/// Label of the synthetic task's optimal rule: +1 on the right of the
/// vertical axis, −1 on the left, +1 exactly on it.
pub fn bayes_label(x: &FeatureVector) -> Result<Label> {
    if x.dim() != 2 {
        return Err(Error::Validation(format!(
            "the synthetic-rule oracle expects 2-dimensional features, got {}",
            x.dim()
        )));
    }
    Ok(if x.0[0] >= 0.0 {
        Label::Pos
    } else {
        Label::Neg
    })
}

/// Trains the full-corpus oracle model and verifies zero training error.
pub fn build_full_oracle(corpus: &[Sample]) -> Result<LinearModel> {
    let set = TrainingSet::from_samples(corpus)
        .map_err(|e| Error::Oracle(format!("oracle corpus is unusable: {e}")))?;
    let config = SolverConfig {
        c: ORACLE_C,
        tolerance: ORACLE_TOLERANCE,
        ..SolverConfig::default()
    };
    let fit = solve(&set, &config, None)
        .map_err(|e| Error::Oracle(format!("oracle training failed: {e}")))?;
    let mut wrong = 0usize;
    for s in corpus {
        let label = s.label.expect("corpus validated as labeled");
        if Label::from_decision(fit.model.margin(&s.features)) != label {
            wrong += 1;
        }
    }
    if wrong > 0 {
        return Err(Error::Oracle(format!(
            "oracle corpus is not linearly separable: {wrong} of {} samples misclassified",
            corpus.len()
        )));
    }
    Ok(fit.model)
}

/// A frozen labeling oracle. Immutable once built.
#[derive(Debug, Clone)]
pub enum Oracle {
    /// The synthetic task's optimal-rule oracle.
    Bayes,
    /// Sign of a full-corpus max-margin model's decision value; ties → +1.
    FullSvm { model: LinearModel },
}

impl Oracle {
    /// Builds the full-corpus SVM oracle.
    pub fn full_svm(corpus: &[Sample]) -> Result<Self> {
        Ok(Oracle::FullSvm {
            model: build_full_oracle(corpus)?,
        })
    }

    /// The label this oracle assigns to `x`.
    pub fn label(&self, x: &FeatureVector) -> Result<Label> {
        match self {
            Oracle::Bayes => bayes_label(x),
            Oracle::FullSvm { model } => Ok(Label::from_decision(model.decision(x)?)),
        }
    }

    /// Stable oracle name for metadata.
    pub fn name(&self) -> &'static str {
        match self {
            Oracle::Bayes => "bayes_synthetic",
            Oracle::FullSvm { .. } => "fullsvm_mnist",
        }
    }

    /// The frozen oracle model, when there is one.
    pub fn model(&self) -> Option<&LinearModel> {
        match self {
            Oracle::Bayes => None,
            Oracle::FullSvm { model } => Some(model),
        }
    }
}

/// Free-function dispatch, mirroring [`Oracle::label`].
pub fn oracle_label(oracle: &Oracle, x: &FeatureVector) -> Result<Label> {
    oracle.label(x)
}
