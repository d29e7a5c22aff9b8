//! Boundary-projection poisoning attacker.
//!
//! Each round the attacker orthogonally projects every pool sample onto the
//! learner's current decision boundary, scores each projection with the same
//! expected-utility formula the learner uses for selection (treating the
//! projection as if it already sat in the unlabeled pool), and injects the
//! projection with *minimum* expected utility as a new unlabeled sample.
//! Points exactly on the boundary are maximally attractive to uncertainty
//! sampling yet minimally informative, so the learner wastes its query
//! budget on them.
//!
//! The attacker reads the labeled pool, the unlabeled pool, and the current
//! classifier only — [`AttackerView`] carries no test set, and hidden
//! ground-truth labels are never reachable from pool samples.

use crate::calibration::{CalibratedClassifier, Calibrator};
use crate::data::{DataPools, FeatureVector, Provenance, Sample, SampleId};
use crate::error::{Error, Result};
use crate::selection::{Candidate, UtilityContext};
use crate::svm::{LinearModel, Trainer};

/// Which pool samples the attacker projects into candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    /// Project everything in the labeled and unlabeled pools, previously
    /// injected samples included.
    AllPool,
    /// Project only samples with natural provenance.
    NaturalOnly,
}

impl std::fmt::Display for CandidateSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CandidateSource::AllPool => "all_pool",
            CandidateSource::NaturalOnly => "natural_only",
        })
    }
}

impl std::str::FromStr for CandidateSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_pool" => Ok(CandidateSource::AllPool),
            "natural_only" => Ok(CandidateSource::NaturalOnly),
            other => Err(Error::Config(format!(
                "unknown candidate source '{other}' (expected all_pool or natural_only)"
            ))),
        }
    }
}

/// Attacker configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AttackConfig {
    pub enabled: bool,
    /// Adversarial samples injected per round when enabled.
    pub injections_per_round: usize,
    pub candidate_source: CandidateSource,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            enabled: false,
            injections_per_round: 1,
            candidate_source: CandidateSource::AllPool,
        }
    }
}

impl AttackConfig {
    /// The standard one-injection-per-round attack.
    pub fn enabled() -> Self {
        AttackConfig {
            enabled: true,
            ..AttackConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.enabled && self.injections_per_round == 0 {
            return Err(Error::Config(
                "injections_per_round must be at least 1 when the attack is enabled".into(),
            ));
        }
        Ok(())
    }
}

/// What the attacker is allowed to see: the two training pools and the
/// calibration set that parameterizes posterior evaluation. No test set,
/// no ground truth.
#[derive(Debug, Clone, Copy)]
pub struct AttackerView<'a> {
    pub labeled: &'a [Sample],
    pub unlabeled: &'a [Sample],
    pub validation: &'a [Sample],
}

impl<'a> AttackerView<'a> {
    pub fn of(pools: &'a DataPools) -> Self {
        AttackerView {
            labeled: &pools.labeled,
            unlabeled: &pools.unlabeled,
            validation: &pools.validation,
        }
    }
}

/// Crafted samples must satisfy `|w·x′ + b| ≤ ON_BOUNDARY_TOL · ‖w‖`.
pub const ON_BOUNDARY_TOL: f64 = 1e-9;

/// Orthogonal projection of `x` onto the decision boundary
/// `{z : w·z + b = 0}`: returns `x − (f(x)/‖w‖²)·w`.
///
/// Projected coordinates are intentionally not clipped to any valid feature
/// range (such as pixel bounds) — clipping would move the point off the
/// boundary and defeat the attack.
pub fn project_onto_boundary(model: &LinearModel, x: &FeatureVector) -> Result<FeatureVector> {
    let norm_sq = model.weight_norm_sq();
    if norm_sq == 0.0 {
        return Err(Error::Selection(
            "cannot project onto the boundary of a zero weight vector".into(),
        ));
    }
    let f = model.decision(x)?;
    let scale = f / norm_sq;
    let projected: Vec<f64> = x
        .as_slice()
        .iter()
        .zip(&model.weights)
        .map(|(&xi, &wi)| xi - scale * wi)
        .collect();
    Ok(FeatureVector(projected))
}

/// The candidate pool: `(source index, projection)` for every pool sample
/// admitted by `source`, labeled block first, then unlabeled, in pool order.
pub fn attack_candidates(
    model: &LinearModel,
    view: &AttackerView<'_>,
    source: CandidateSource,
) -> Result<Vec<(usize, FeatureVector)>> {
    let admitted = |s: &Sample| match source {
        CandidateSource::AllPool => true,
        CandidateSource::NaturalOnly => s.provenance == Provenance::Natural,
    };
    let mut candidates = Vec::with_capacity(view.labeled.len() + view.unlabeled.len());
    for (idx, s) in view.labeled.iter().chain(view.unlabeled.iter()).enumerate() {
        if admitted(s) {
            candidates.push((idx, project_onto_boundary(model, &s.features)?));
        }
    }
    Ok(candidates)
}

/// Crafts the round's adversarial sample: the boundary projection with
/// minimum expected utility, evaluated as if it were already a member of
/// the unlabeled pool. Ties go to the lowest source index (labeled block
/// first). Returns `None` — skipping the round with a logged warning — when
/// the weight vector is zero or every candidate evaluation fails.
pub fn craft_attack(
    clf: &CalibratedClassifier,
    view: &AttackerView<'_>,
    config: &AttackConfig,
    trainer: &dyn Trainer,
    calibrator: &dyn Calibrator,
    next_id: SampleId,
) -> Result<Option<Sample>> {
    config.validate()?;
    let model = clf.model();
    if model.weight_norm_sq() == 0.0 {
        log::warn!("attack skipped: current weight vector is zero, boundary is undefined");
        return Ok(None);
    }
    let candidates = attack_candidates(model, view, config.candidate_source)?;
    if candidates.is_empty() {
        log::warn!("attack skipped: no candidate sources admitted");
        return Ok(None);
    }

    let ctx = UtilityContext::new(clf, view.labeled, view.unlabeled, view.validation)?;
    let norm = model.weight_norm();
    let mut best: Option<(usize, f64)> = None;
    let mut failures = 0usize;
    for (pos, (_, projected)) in candidates.iter().enumerate() {
        // A projection that drifted off the boundary or fails evaluation is
        // discarded rather than allowed to win the argmin.
        if model.margin(projected).abs() > ON_BOUNDARY_TOL * norm {
            log::debug!("candidate {pos} rejected: projection left the boundary");
            failures += 1;
            continue;
        }
        match ctx.utility(Candidate::External(projected), trainer, calibrator) {
            Ok(u) => {
                if best.map_or(true, |(_, v)| u.value < v) {
                    best = Some((pos, u.value));
                }
            }
            Err(err) => {
                log::debug!("candidate {pos} evaluation failed: {err}");
                failures += 1;
            }
        }
    }

    match best {
        Some((pos, _)) => {
            let (_, features) = candidates
                .into_iter()
                .nth(pos)
                .expect("index from enumerate");
            Ok(Some(Sample::adversarial(next_id, features)))
        }
        None => {
            log::warn!("attack skipped: all {failures} candidate evaluations failed");
            Ok(None)
        }
    }
}

/// Appends a crafted sample to the unlabeled pool.
pub fn inject(pools: &mut DataPools, sample: Sample) -> Result<()> {
    pools.inject(sample)
}
