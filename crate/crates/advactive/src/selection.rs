//! Sample-selection strategies for the active learner.
//!
//! Four ways to pick the next unlabeled sample to query: closest to the
//! decision boundary (uncertainty), highest expected utility after a
//! hypothetical retrain (MEU), uniformly at random, and a mixed strategy
//! that flips a coin between uncertainty and a companion each round.
//!
//! The expected utility of querying candidate `i` is
//!
//! ```text
//! Ũ_i(θ) = Σ_{y_i} p_θ(y_i|x_i) · (1/N) · [ Σ_{j∈L∪{i}} p_{θ+i}(y_j|x_j)
//!            + Σ_{j∈U∖{i}} Σ_{y_j} p_θ(y_j|x_j) · p_{θ+i}(y_j|x_j) ]
//! ```
//!
//! where `θ+i` is the classifier retrained on the labeled pool plus the
//! candidate under a putative label (SVM refit, then sigmoid recalibration
//! on the validation set), `L`/`U` are the labeled/unlabeled pools,
//! `N = |L| + |U|` counts the candidate's pool membership, and known labels
//! stand in for the label sums over `L`. Validation samples belong to
//! neither pool and never enter the sums.
//!
//! All pool sums accumulate in sample-id order, so a utility value is
//! bit-identical under any permutation of the unlabeled pool.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::calibration::{CalibratedClassifier, Calibrator};
use crate::data::{DataPools, FeatureVector, Label, Sample};
use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};
use crate::svm::{LinearModel, Trainer, TrainingSet};

/// Which selection strategy runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Uncertainty,
    Meu,
    Random,
    Mixed,
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            StrategyKind::Uncertainty => "uncertainty",
            StrategyKind::Meu => "meu",
            StrategyKind::Random => "random",
            StrategyKind::Mixed => "mixed",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uncertainty" => Ok(StrategyKind::Uncertainty),
            "meu" => Ok(StrategyKind::Meu),
            "random" => Ok(StrategyKind::Random),
            "mixed" => Ok(StrategyKind::Mixed),
            other => Err(Error::Config(format!(
                "unknown strategy '{other}' (expected uncertainty, meu, random, or mixed)"
            ))),
        }
    }
}

/// The non-uncertainty branch of the mixed strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Companion {
    Meu,
    Random,
}

impl std::fmt::Display for Companion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Companion::Meu => "meu",
            Companion::Random => "random",
        })
    }
}

impl std::str::FromStr for Companion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "meu" => Ok(Companion::Meu),
            "random" => Ok(Companion::Random),
            other => Err(Error::Config(format!(
                "unknown companion '{other}' (expected meu or random)"
            ))),
        }
    }
}

/// Full strategy configuration, including the rng stream tags that keep the
/// mix coin independent from the random-pick draws.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Probability of taking the companion branch when `kind` is mixed.
    pub p: f64,
    /// Companion branch of the mixed strategy.
    pub companion: Companion,
    /// Keep per-candidate scores in the outcome for logging.
    #[serde(default)]
    pub record_scores: bool,
    /// Rng stream tag for the mix coin.
    #[serde(default = "default_coin_stream")]
    pub coin_stream: u64,
    /// Rng stream tag for uniform random picks.
    #[serde(default = "default_pick_stream")]
    pub pick_stream: u64,
}

fn default_coin_stream() -> u64 {
    stream::MIX
}

fn default_pick_stream() -> u64 {
    stream::RANDOM_SELECT
}

impl StrategyConfig {
    /// A pure (non-mixed) strategy.
    pub fn pure(kind: StrategyKind) -> Self {
        StrategyConfig {
            kind,
            p: 0.0,
            companion: Companion::Meu,
            record_scores: false,
            coin_stream: stream::MIX,
            pick_stream: stream::RANDOM_SELECT,
        }
    }

    /// The mixed strategy: companion with probability `p`, uncertainty otherwise.
    pub fn mixed(p: f64, companion: Companion) -> Self {
        StrategyConfig {
            kind: StrategyKind::Mixed,
            p,
            companion,
            ..StrategyConfig::pure(StrategyKind::Mixed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == StrategyKind::Mixed
            && !(self.p.is_finite() && (0.0..=1.0).contains(&self.p))
        {
            return Err(Error::Config(format!(
                "mix probability must lie in [0, 1], got {}",
                self.p
            )));
        }
        Ok(())
    }
}

/// Which branch a strategy actually took this round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyBranch {
    Uncertainty,
    Meu,
    Random,
}

impl std::fmt::Display for StrategyBranch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StrategyBranch::Uncertainty => "uncertainty",
            StrategyBranch::Meu => "meu",
            StrategyBranch::Random => "random",
        })
    }
}

/// Result of one selection round.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    /// Index of the chosen sample in the current unlabeled pool.
    pub index: usize,
    /// Branch that produced the choice.
    pub branch: StrategyBranch,
    /// Per-candidate scores in pool order (distances or utilities), when kept.
    pub scores: Option<Vec<f64>>,
    /// True when any candidate evaluation fell back to the unretrained model.
    pub degraded: bool,
}

/// The two rng streams selection consumes. The coin and the pick streams are
/// separate so that degenerate mix probabilities reproduce the pure
/// strategies bit-exactly.
#[derive(Debug, Clone)]
pub struct SelectionRngs {
    pub mix_coin: ChaCha8Rng,
    pub random_pick: ChaCha8Rng,
}

impl SelectionRngs {
    pub fn new(trial_seed: u64, config: &StrategyConfig) -> Self {
        SelectionRngs {
            mix_coin: stream_rng(trial_seed, config.coin_stream),
            random_pick: stream_rng(trial_seed, config.pick_stream),
        }
    }
}

/// First index of the strictly largest value; `None` on empty input.
pub(crate) fn argmax_first(values: &[f64]) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    Some(best)
}

/// First index of the strictly smallest value; `None` on empty input.
pub(crate) fn argmin_first(values: &[f64]) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    Some(best)
}

/// Picks the unlabeled sample closest to the decision boundary, measured as
/// `|f(x)| / ‖w‖`; ties go to the lowest pool index.
pub fn select_uncertainty(model: &LinearModel, pools: &DataPools) -> Result<SelectionOutcome> {
    if pools.unlabeled.is_empty() {
        return Err(Error::Selection("unlabeled pool is empty".into()));
    }
    let norm = model.weight_norm();
    let mut scores = Vec::with_capacity(pools.unlabeled.len());
    for s in &pools.unlabeled {
        scores.push(model.decision(&s.features)?.abs() / norm);
    }
    let index = argmin_first(&scores).expect("non-empty pool");
    Ok(SelectionOutcome {
        index,
        branch: StrategyBranch::Uncertainty,
        scores: Some(scores),
        degraded: false,
    })
}

/// A sample whose expected utility is being evaluated: either a member of
/// the unlabeled pool, or an external point treated as if it had just been
/// added to that pool.
#[derive(Debug, Clone, Copy)]
pub enum Candidate<'a> {
    InPool(usize),
    External(&'a FeatureVector),
}

/// An expected-utility value plus its degradation flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityValue {
    pub value: f64,
    /// True when a putative-label retrain failed and that branch used the
    /// current classifier instead.
    pub degraded: bool,
}

/// Shared per-round state for utility evaluation: posteriors of the current
/// classifier over the unlabeled pool, and id-sorted iteration orders.
pub(crate) struct UtilityContext<'a> {
    base: &'a CalibratedClassifier,
    labeled: &'a [Sample],
    unlabeled: &'a [Sample],
    validation: &'a [Sample],
    labels: Vec<Label>,
    /// p_θ(+1|x_j) for every unlabeled j, in pool order.
    unlabeled_pos: Vec<f64>,
    labeled_order: Vec<usize>,
    unlabeled_order: Vec<usize>,
}

impl<'a> UtilityContext<'a> {
    pub(crate) fn new(
        base: &'a CalibratedClassifier,
        labeled: &'a [Sample],
        unlabeled: &'a [Sample],
        validation: &'a [Sample],
    ) -> Result<Self> {
        if labeled.is_empty() {
            return Err(Error::Selection("labeled pool is empty".into()));
        }
        let dim = base.model().weights.len();
        let mut labels = Vec::with_capacity(labeled.len());
        for s in labeled {
            let label = s.label.ok_or_else(|| {
                Error::Validation(format!("labeled-pool sample {} carries no label", s.id))
            })?;
            if s.features.dim() != dim {
                return Err(Error::Validation(format!(
                    "labeled sample {} has dimension {} (model expects {dim})",
                    s.id,
                    s.features.dim()
                )));
            }
            labels.push(label);
        }
        let mut unlabeled_pos = Vec::with_capacity(unlabeled.len());
        for s in unlabeled {
            let margin = base.model().decision(&s.features)?;
            unlabeled_pos.push(base.posterior_from_margin(margin, Label::Pos));
        }
        Ok(UtilityContext {
            base,
            labeled,
            unlabeled,
            validation,
            labels,
            unlabeled_pos,
            labeled_order: id_order(labeled),
            unlabeled_order: id_order(unlabeled),
        })
    }

    /// Evaluates the expected utility of one candidate.
    pub(crate) fn utility(
        &self,
        candidate: Candidate<'_>,
        trainer: &dyn Trainer,
        calibrator: &dyn Calibrator,
    ) -> Result<UtilityValue> {
        let (x, q_pos, excluded, population) = match candidate {
            Candidate::InPool(i) => {
                let s = self.unlabeled.get(i).ok_or_else(|| {
                    Error::Selection(format!(
                        "candidate index {i} out of bounds for unlabeled pool of {}",
                        self.unlabeled.len()
                    ))
                })?;
                (
                    &s.features,
                    self.unlabeled_pos[i],
                    Some(i),
                    self.labeled.len() + self.unlabeled.len(),
                )
            }
            Candidate::External(x) => {
                if !x.is_finite() {
                    return Err(Error::Selection("candidate features are not finite".into()));
                }
                let margin = self.base.model().decision(x)?;
                (
                    x,
                    self.base.posterior_from_margin(margin, Label::Pos),
                    None,
                    self.labeled.len() + self.unlabeled.len() + 1,
                )
            }
        };

        let mut total = 0.0;
        let mut degraded = false;
        for (putative, weight) in [(Label::Pos, q_pos), (Label::Neg, 1.0 - q_pos)] {
            let retrained = self.retrain(x, putative, trainer, calibrator);
            let plus = match &retrained {
                Ok(clf) => clf,
                Err(err) => {
                    log::debug!(
                        "retrain under putative label {putative} failed ({err}); scoring this branch with the current classifier"
                    );
                    degraded = true;
                    self.base
                }
            };
            let mut inner = 0.0;
            for &j in &self.labeled_order {
                let margin = plus.model().margin(&self.labeled[j].features);
                inner += plus.posterior_from_margin(margin, self.labels[j]);
            }
            inner += plus.posterior_from_margin(plus.model().margin(x), putative);
            for &j in &self.unlabeled_order {
                if excluded == Some(j) {
                    continue;
                }
                let margin = plus.model().margin(&self.unlabeled[j].features);
                let plus_pos = plus.posterior_from_margin(margin, Label::Pos);
                let base_pos = self.unlabeled_pos[j];
                inner += base_pos * plus_pos + (1.0 - base_pos) * (1.0 - plus_pos);
            }
            total += weight * inner / population as f64;
        }
        Ok(UtilityValue {
            value: total,
            degraded,
        })
    }

    /// Retrains on the labeled pool plus `(x, putative)` and recalibrates,
    /// warm-starting from the current classifier's dual solution when it
    /// lines up with the new training set.
    fn retrain(
        &self,
        x: &FeatureVector,
        putative: Label,
        trainer: &dyn Trainer,
        calibrator: &dyn Calibrator,
    ) -> Result<CalibratedClassifier> {
        let mut features: Vec<&FeatureVector> = self.labeled.iter().map(|s| &s.features).collect();
        features.push(x);
        let mut labels = self.labels.clone();
        labels.push(putative);
        let set = TrainingSet::from_parts(features, &labels)?;

        let mut warm = self.base.svm_fit().alpha.clone();
        warm.push(0.0);
        let warm_start = (warm.len() == set.len()).then_some(warm.as_slice());
        let fit = trainer.fit(&set, warm_start)?;
        let platt = calibrator.calibrate(&fit.model, self.validation)?;
        Ok(CalibratedClassifier::from_parts(fit, platt))
    }
}

fn id_order(samples: &[Sample]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by_key(|&i| samples[i].id);
    order
}

/// Expected utility of querying unlabeled sample `i`.
pub fn expected_utility(
    clf: &CalibratedClassifier,
    pools: &DataPools,
    i: usize,
    trainer: &dyn Trainer,
    calibrator: &dyn Calibrator,
) -> Result<f64> {
    Ok(expected_utility_detailed(clf, pools, Candidate::InPool(i), trainer, calibrator)?.value)
}

/// Expected utility of an arbitrary candidate, with the degradation flag.
pub fn expected_utility_detailed(
    clf: &CalibratedClassifier,
    pools: &DataPools,
    candidate: Candidate<'_>,
    trainer: &dyn Trainer,
    calibrator: &dyn Calibrator,
) -> Result<UtilityValue> {
    let ctx = UtilityContext::new(clf, &pools.labeled, &pools.unlabeled, &pools.validation)?;
    ctx.utility(candidate, trainer, calibrator)
}

/// Picks the unlabeled sample with maximum expected utility; ties go to the
/// lowest pool index.
pub fn select_meu(
    clf: &CalibratedClassifier,
    pools: &DataPools,
    trainer: &dyn Trainer,
    calibrator: &dyn Calibrator,
) -> Result<SelectionOutcome> {
    if pools.unlabeled.is_empty() {
        return Err(Error::Selection("unlabeled pool is empty".into()));
    }
    let ctx = UtilityContext::new(clf, &pools.labeled, &pools.unlabeled, &pools.validation)?;
    let mut utilities = Vec::with_capacity(pools.unlabeled.len());
    let mut degraded = false;
    for i in 0..pools.unlabeled.len() {
        let u = ctx.utility(Candidate::InPool(i), trainer, calibrator)?;
        degraded |= u.degraded;
        utilities.push(u.value);
    }
    let index = argmax_first(&utilities).expect("non-empty pool");
    Ok(SelectionOutcome {
        index,
        branch: StrategyBranch::Meu,
        scores: Some(utilities),
        degraded,
    })
}

/// Picks uniformly at random from the unlabeled pool.
pub fn select_random(rng: &mut ChaCha8Rng, pools: &DataPools) -> Result<SelectionOutcome> {
    if pools.unlabeled.is_empty() {
        return Err(Error::Selection("unlabeled pool is empty".into()));
    }
    let index = rng.gen_range(0..pools.unlabeled.len());
    Ok(SelectionOutcome {
        index,
        branch: StrategyBranch::Random,
        scores: None,
        degraded: false,
    })
}

/// Coin-flip strategy: companion with probability `p`, uncertainty otherwise.
/// The coin comes from its own rng stream so `p = 0` and `p = 1` reproduce
/// the pure strategies bit-exactly.
pub fn select_mixed(
    rngs: &mut SelectionRngs,
    p: f64,
    companion: Companion,
    clf: &CalibratedClassifier,
    pools: &DataPools,
    trainer: &dyn Trainer,
    calibrator: &dyn Calibrator,
) -> Result<SelectionOutcome> {
    if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
        return Err(Error::Config(format!(
            "mix probability must lie in [0, 1], got {p}"
        )));
    }
    let coin: f64 = rngs.mix_coin.gen();
    if coin < p {
        match companion {
            Companion::Meu => select_meu(clf, pools, trainer, calibrator),
            Companion::Random => select_random(&mut rngs.random_pick, pools),
        }
    } else {
        select_uncertainty(clf.model(), pools)
    }
}

/// Dispatches to the configured strategy and applies the score-retention
/// setting.
pub fn select_with(
    config: &StrategyConfig,
    rngs: &mut SelectionRngs,
    clf: &CalibratedClassifier,
    pools: &DataPools,
    trainer: &dyn Trainer,
    calibrator: &dyn Calibrator,
) -> Result<SelectionOutcome> {
    config.validate()?;
    let mut outcome = match config.kind {
        StrategyKind::Uncertainty => select_uncertainty(clf.model(), pools)?,
        StrategyKind::Meu => select_meu(clf, pools, trainer, calibrator)?,
        StrategyKind::Random => select_random(&mut rngs.random_pick, pools)?,
        StrategyKind::Mixed => select_mixed(
            rngs,
            config.p,
            config.companion,
            clf,
            pools,
            trainer,
            calibrator,
        )?,
    };
    if !config.record_scores {
        outcome.scores = None;
    }
    Ok(outcome)
}
