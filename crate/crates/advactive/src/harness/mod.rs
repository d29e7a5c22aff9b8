//! Experiment orchestration.
//!
//! A *round* is one query: optionally let the attacker inject, let the
//! strategy pick an unlabeled sample, label it with the oracle, move it to
//! the labeled pool, retrain, recalibrate, and score the test set. A *trial*
//! re-splits the source pool with a fresh seed, trains an initial
//! classifier, and runs a budget of rounds. An *experiment* averages many
//! trials into an error curve.
//!
//! Everything here is a pure function of the configuration: seeds derive
//! from the master seed, rounds are strictly sequential, and no clocks or
//! global state are consulted.

pub mod output;

use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::attack::{craft_attack, AttackConfig, AttackerView};
use crate::calibration::{CalibratedClassifier, PlattCalibrator};
use crate::data::{
    generate_synthetic_source, DataPools, DatasetSpec, Provenance, SampleId, SourceData, TaskKind,
};
use crate::error::{Error, Result};
use crate::oracle::Oracle;
use crate::rng::{derive_trial_seed, stream, stream_rng};
use crate::selection::{select_with, SelectionRngs, StrategyBranch, StrategyConfig};
use crate::svm::{test_error, CdTrainer, SolverConfig, Trainer, TrainingSet};

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub strategy: StrategyConfig,
    pub attack: AttackConfig,
    pub solver: SolverConfig,
    /// Number of query rounds per trial.
    pub budget: usize,
    /// Number of independent trials.
    pub trials: usize,
    /// Root seed; every stream in the experiment derives from it.
    pub master_seed: u64,
    /// Where the CLI writes result files.
    pub output_dir: PathBuf,
}

/// Default query budget for the synthetic task.
pub const SYNTHETIC_BUDGET: usize = 50;
/// Default query budget for the digits task.
pub const MNIST_BUDGET: usize = 100;

impl ExperimentConfig {
    /// A ready-to-run configuration with task-appropriate defaults.
    pub fn for_task(task: TaskKind, master_seed: u64, output_dir: PathBuf) -> Self {
        let (dataset, budget) = match task {
            TaskKind::Synthetic2d => (
                DatasetSpec::synthetic_default(master_seed),
                SYNTHETIC_BUDGET,
            ),
            TaskKind::Mnist56 => (DatasetSpec::mnist_default(master_seed), MNIST_BUDGET),
        };
        // The digit task runs in 144 dimensions and, under attack, accumulates
        // near-duplicate boundary points that leave the dual optimum degenerate;
        // demanding 1e-8 there burns epochs on a terminal crawl that changes no
        // decision value by a measurable amount. 1e-6 is still orders of
        // magnitude tighter than common linear-SVM defaults.
        let mut solver = SolverConfig::default();
        if task == TaskKind::Mnist56 {
            solver.tolerance = 1e-6;
        }
        ExperimentConfig {
            dataset,
            strategy: StrategyConfig::pure(crate::selection::StrategyKind::Uncertainty),
            attack: AttackConfig::default(),
            solver,
            budget,
            trials: 10,
            master_seed,
            output_dir,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.strategy.validate()?;
        self.attack.validate()?;
        self.solver.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trial count must be at least 1".into()));
        }
        // With the attack on, each round injects before it selects, so the
        // pool can never exhaust; without it, the budget is capped by the
        // initial unlabeled pool.
        if !self.attack.enabled && self.budget > self.dataset.unlabeled_size() {
            return Err(Error::Config(format!(
                "budget {} exceeds the initial unlabeled pool of {}",
                self.budget,
                self.dataset.unlabeled_size()
            )));
        }
        Ok(())
    }
}

/// What happened in one query round.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RoundEvent {
    /// 1-based query index.
    pub query: usize,
    pub test_error: f64,
    pub chosen_id: SampleId,
    /// Provenance of the transferred sample.
    pub provenance: Provenance,
    pub branch: StrategyBranch,
    /// True when any candidate evaluation fell back to the current model.
    pub degraded: bool,
    /// Samples the attacker injected this round.
    pub injected_ids: Vec<SampleId>,
    /// Per-candidate selection scores, when score recording is on.
    pub scores: Option<Vec<f64>>,
    /// Digest of the retrained model's quantized weights.
    pub model_hash: String,
}

/// Record of one trial.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub trial_seed: u64,
    /// Test error by query index; entry 0 is the initial classifier,
    /// padded with the last value if the pool exhausted early.
    pub errors: Vec<f64>,
    pub events: Vec<RoundEvent>,
    /// Query at which the unlabeled pool exhausted, if it did.
    pub truncated_at: Option<usize>,
}

/// Mean test error by query index, with the per-trial curves it came from.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ErrorCurve {
    pub mean: Vec<f64>,
    pub per_trial: Vec<Vec<f64>>,
}

impl ErrorCurve {
    /// Pointwise mean across trial records.
    pub fn from_trials(records: &[TrialRecord]) -> Result<Self> {
        let Some(first) = records.first() else {
            return Ok(ErrorCurve {
                mean: Vec::new(),
                per_trial: Vec::new(),
            });
        };
        let len = first.errors.len();
        for r in records {
            if r.errors.len() != len {
                return Err(Error::Validation(format!(
                    "trial {} has {} error entries, expected {len}",
                    r.trial_index,
                    r.errors.len()
                )));
            }
        }
        let mut mean = vec![0.0; len];
        for r in records {
            for (m, e) in mean.iter_mut().zip(&r.errors) {
                *m += e;
            }
        }
        for m in &mut mean {
            *m /= records.len() as f64;
        }
        Ok(ErrorCurve {
            mean,
            per_trial: records.iter().map(|r| r.errors.clone()).collect(),
        })
    }

    /// A curve holding a single series.
    pub fn from_single(values: Vec<f64>) -> Self {
        ErrorCurve {
            mean: values,
            per_trial: Vec::new(),
        }
    }

    pub fn final_mean(&self) -> Option<f64> {
        self.mean.last().copied()
    }
}

/// Digest of a model's weights and bias quantized at 1e−12: a cheap,
/// reproducible fingerprint for regression comparisons.
pub fn model_hash(model: &crate::svm::LinearModel) -> String {
    const QUANTUM: f64 = 1e-12;
    let mut hasher = Sha256::new();
    for &w in model.weights.iter().chain(std::iter::once(&model.bias)) {
        let q = (w / QUANTUM).round() as i128;
        hasher.update(q.to_le_bytes());
    }
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// The oracle appropriate for a source's task.
pub fn build_oracle_for(source: &SourceData) -> Result<Oracle> {
    match source.task {
        TaskKind::Synthetic2d => Ok(Oracle::Bayes),
        TaskKind::Mnist56 => Oracle::full_svm(&source.full_labeled_corpus()),
    }
}

/// Live state of one trial: the pools, the current classifier, and the
/// bookkeeping that the invariant checks audit after every round.
pub struct TrialState<'a> {
    pools: DataPools,
    clf: CalibratedClassifier,
    oracle: &'a Oracle,
    trainer: CdTrainer,
    calibrator: PlattCalibrator,
    strategy: StrategyConfig,
    attack: AttackConfig,
    rngs: SelectionRngs,
    initial_error: f64,
    next_id: u64,
    query: usize,
    injections_made: usize,
    natural_total: usize,
    test_size: usize,
    validation_size: usize,
}

impl<'a> TrialState<'a> {
    /// Trains the initial classifier on freshly split pools.
    pub fn new(
        config: &ExperimentConfig,
        pools: DataPools,
        oracle: &'a Oracle,
        trial_seed: u64,
        next_id: u64,
    ) -> Result<Self> {
        let trainer = CdTrainer::new(config.solver.clone());
        let calibrator = PlattCalibrator::default();
        let fit = trainer.fit(&TrainingSet::from_samples(&pools.labeled)?, None)?;
        let clf = CalibratedClassifier::fit(fit, &pools.validation, &calibrator)?;
        let initial_error = test_error(clf.model(), &pools.test)?;
        let natural_total = pools.labeled.len() + pools.unlabeled.len();
        let test_size = pools.test.len();
        let validation_size = pools.validation.len();
        Ok(TrialState {
            rngs: SelectionRngs::new(trial_seed, &config.strategy),
            pools,
            clf,
            oracle,
            trainer,
            calibrator,
            strategy: config.strategy.clone(),
            attack: config.attack.clone(),
            initial_error,
            next_id,
            query: 0,
            injections_made: 0,
            natural_total,
            test_size,
            validation_size,
        })
    }

    pub fn pools(&self) -> &DataPools {
        &self.pools
    }

    pub fn classifier(&self) -> &CalibratedClassifier {
        &self.clf
    }

    /// Test error of the initial classifier (query 0).
    pub fn initial_error(&self) -> f64 {
        self.initial_error
    }

    /// Rounds attempted so far.
    pub fn query(&self) -> usize {
        self.query
    }

    pub fn injections_made(&self) -> usize {
        self.injections_made
    }

    /// Runs one round; `Ok(None)` means the unlabeled pool was exhausted and
    /// the trial should stop early.
    pub fn run_round(&mut self) -> Result<Option<RoundEvent>> {
        self.query += 1;

        let mut injected_ids = Vec::new();
        if self.attack.enabled {
            for _ in 0..self.attack.injections_per_round {
                let crafted = craft_attack(
                    &self.clf,
                    &AttackerView::of(&self.pools),
                    &self.attack,
                    &self.trainer,
                    &self.calibrator,
                    SampleId(self.next_id),
                )?;
                if let Some(sample) = crafted {
                    let id = sample.id;
                    self.pools.inject(sample)?;
                    self.next_id += 1;
                    self.injections_made += 1;
                    injected_ids.push(id);
                }
            }
        }

        if self.pools.unlabeled.is_empty() {
            return Ok(None);
        }

        let outcome = select_with(
            &self.strategy,
            &mut self.rngs,
            &self.clf,
            &self.pools,
            &self.trainer,
            &self.calibrator,
        )?;
        let chosen = &self.pools.unlabeled[outcome.index];
        let provenance = chosen.provenance;
        let label = self.oracle.label(&chosen.features)?;
        let chosen_id = self.pools.transfer_unlabeled(outcome.index, label)?;

        // Retrain on the grown labeled pool, warm-starting from the previous
        // dual solution (the new sample sits at the end of the pool).
        let set = TrainingSet::from_samples(&self.pools.labeled)?;
        let mut warm = self.clf.svm_fit().alpha.clone();
        warm.push(0.0);
        let warm_start = (warm.len() == set.len()).then_some(warm.as_slice());
        let fit = self.trainer.fit(&set, warm_start)?;
        self.clf = CalibratedClassifier::fit(fit, &self.pools.validation, &self.calibrator)?;
        let error = test_error(self.clf.model(), &self.pools.test)?;

        self.assert_invariants();

        Ok(Some(RoundEvent {
            query: self.query,
            test_error: error,
            chosen_id,
            provenance,
            branch: outcome.branch,
            degraded: outcome.degraded,
            injected_ids,
            scores: outcome.scores,
            model_hash: model_hash(self.clf.model()),
        }))
    }

    /// Conservation and no-leakage audits, run after every round.
    fn assert_invariants(&self) {
        let natural = self
            .pools
            .labeled
            .iter()
            .chain(&self.pools.unlabeled)
            .filter(|s| s.provenance == Provenance::Natural)
            .count();
        assert_eq!(
            natural, self.natural_total,
            "natural samples leaked out of the training pools"
        );
        let adversarial = self.pools.labeled.len() + self.pools.unlabeled.len() - natural;
        assert_eq!(
            adversarial, self.injections_made,
            "adversarial sample count diverged from injections made"
        );
        assert_eq!(self.pools.test.len(), self.test_size, "test set mutated");
        assert_eq!(
            self.pools.validation.len(),
            self.validation_size,
            "validation set mutated"
        );
        self.pools.assert_disjoint();
    }
}

/// Runs one trial: fresh split, initial classifier, budget-many rounds.
/// The error vector always has `budget + 1` entries; early exhaustion pads
/// with the last observed error and sets `truncated_at`.
pub fn run_trial(
    config: &ExperimentConfig,
    source: &SourceData,
    oracle: &Oracle,
    trial_index: usize,
) -> Result<TrialRecord> {
    let trial_seed = derive_trial_seed(config.master_seed, trial_index);
    let mut split_rng = stream_rng(trial_seed, stream::SPLIT);
    let pools = source.partition(&config.dataset, &mut split_rng)?;
    let mut state = TrialState::new(config, pools, oracle, trial_seed, source.next_free_id())?;

    let mut errors = Vec::with_capacity(config.budget + 1);
    errors.push(state.initial_error());
    let mut events = Vec::new();
    let mut truncated_at = None;
    for _ in 0..config.budget {
        match state.run_round()? {
            Some(event) => {
                errors.push(event.test_error);
                events.push(event);
            }
            None => {
                truncated_at = Some(state.query());
                log::warn!(
                    "trial {trial_index}: unlabeled pool exhausted at query {}; padding curve",
                    state.query()
                );
                break;
            }
        }
    }
    let last = *errors.last().expect("at least the initial error");
    while errors.len() < config.budget + 1 {
        errors.push(last);
    }

    Ok(TrialRecord {
        trial_index,
        trial_seed,
        errors,
        events,
        truncated_at,
    })
}

/// A finished (or aborted) experiment: per-trial records, the averaged
/// curve, and oracle metadata.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub curve: ErrorCurve,
    pub oracle_name: String,
    pub oracle_model_hash: Option<String>,
    /// Error summary when a trial failed and the experiment aborted early;
    /// the records collected so far are still returned.
    pub failure: Option<String>,
}

/// Runs all trials against an existing source and oracle.
pub fn run_experiment_with_source(
    config: &ExperimentConfig,
    source: &SourceData,
    oracle: &Oracle,
) -> Result<ExperimentRun> {
    config.validate()?;
    if source.task != config.dataset.task {
        return Err(Error::Config(format!(
            "source holds a {} task but the config asks for {}",
            source.task, config.dataset.task
        )));
    }
    let mut records = Vec::with_capacity(config.trials);
    let mut failure = None;
    for trial_index in 0..config.trials {
        match run_trial(config, source, oracle, trial_index) {
            Ok(record) => records.push(record),
            Err(err) => {
                failure = Some(format!("trial {trial_index} failed: {err}"));
                break;
            }
        }
    }
    let curve = ErrorCurve::from_trials(&records)?;
    Ok(ExperimentRun {
        config: config.clone(),
        records,
        curve,
        oracle_name: oracle.name().to_string(),
        oracle_model_hash: oracle.model().map(model_hash),
        failure,
    })
}

/// Runs a self-contained experiment. The synthetic task generates its own
/// source; the digits task needs external image data, so it must go through
/// [`run_experiment_with_source`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun> {
    config.validate()?;
    match config.dataset.task {
        TaskKind::Synthetic2d => {
            let source = generate_synthetic_source(&config.dataset)?;
            let oracle = build_oracle_for(&source)?;
            run_experiment_with_source(config, &source, &oracle)
        }
        TaskKind::Mnist56 => Err(Error::Config(
            "the digits task needs an image corpus; parse IDX files and use run_experiment_with_source"
                .into(),
        )),
    }
}
