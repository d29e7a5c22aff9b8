//! Two-class soft-margin linear SVM.
//!
//! Minimizes `(1/2)‖w‖² + C·Σᵢ max(0, 1 − yᵢ·f(xᵢ))` with `f(x) = w·x + b`,
//! solved in the dual by coordinate descent over the box `0 ≤ αᵢ ≤ C`.
//! The bias rides along as an augmented constant feature of value 1, so it is
//! regularized like any weight; this perturbs exact max-margin geometry
//! slightly and downstream tolerances account for it.
//!
//! Determinism: each epoch visits the coordinates in a freshly shuffled order
//! drawn from a generator seeded with a fixed constant, so a fixed input order
//! yields a bit-identical model every time. The shuffle matters for quality,
//! not just style: a fixed cyclic order can fall into slow zig-zag cycles when
//! the training set contains near-duplicate rows (the dual optimum is then
//! degenerate along those coordinates), while a shuffled order breaks the
//! cycle and converges at the usual rate.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{FeatureVector, Label, Sample};
use crate::error::{Error, Result};

/// Seed of the per-epoch coordinate shuffle. A constant, so two solves over
/// the same input are bit-identical; it exists to decorrelate the visiting
/// order from the sample order, not to vary between runs.
const SHUFFLE_SEED: u64 = 0x5b3a_9d24_c17e_06f8;

/// Hyperparameters of the dual coordinate-descent solver.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    /// Hinge-loss weight C.
    pub c: f64,
    /// Convergence tolerance on the largest projected dual gradient over an epoch.
    pub tolerance: f64,
    /// Epoch cap; exceeding it is a training error.
    pub max_epochs: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            c: 1.0,
            tolerance: 1e-8,
            max_epochs: 100_000,
        }
    }
}

impl SolverConfig {
    pub fn with_c(c: f64) -> Self {
        SolverConfig {
            c,
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!(
                "C must be positive and finite, got {}",
                self.c
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Config(format!(
                "tolerance must be positive and finite, got {}",
                self.tolerance
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        Ok(())
    }
}

/// Linear decision rule `f(x) = w·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    /// Decision value `w·x + b`, checking the dimension.
    pub fn decision(&self, x: &FeatureVector) -> Result<f64> {
        if x.dim() != self.weights.len() {
            return Err(Error::Validation(format!(
                "feature dimension {} does not match model dimension {}",
                x.dim(),
                self.weights.len()
            )));
        }
        Ok(self.margin(x))
    }

    /// Decision value without the dimension check (hot paths validate once).
    pub fn margin(&self, x: &FeatureVector) -> f64 {
        debug_assert_eq!(x.dim(), self.weights.len());
        dot(&self.weights, x.as_slice()) + self.bias
    }

    /// Predicted label; `f(x) = 0` maps to +1.
    pub fn predict(&self, x: &FeatureVector) -> Result<Label> {
        Ok(Label::from_decision(self.decision(x)?))
    }

    pub fn weight_norm_sq(&self) -> f64 {
        dot(&self.weights, &self.weights)
    }

    pub fn weight_norm(&self) -> f64 {
        self.weight_norm_sq().sqrt()
    }
}

/// Decision value of `model` on `x` (dimension-checked).
pub fn decision(model: &LinearModel, x: &FeatureVector) -> Result<f64> {
    model.decision(x)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A trained model together with its dual solution.
///
/// The dual variables let later retrainings on a grown sample list warm-start
/// from the previous optimum instead of from zero.
#[derive(Debug, Clone)]
pub struct SvmFit {
    pub model: LinearModel,
    /// One dual variable per training sample, in training order.
    pub alpha: Vec<f64>,
    /// Epochs the solver ran before reaching the tolerance.
    pub epochs_run: usize,
}

/// Borrowed training view: feature refs plus ±1 targets.
#[derive(Debug, Clone)]
pub struct TrainingSet<'a> {
    x: Vec<&'a FeatureVector>,
    y: Vec<f64>,
    dim: usize,
}

impl<'a> TrainingSet<'a> {
    /// Builds a view over labeled samples; every sample must carry a label.
    pub fn from_samples(samples: &'a [Sample]) -> Result<Self> {
        let mut x = Vec::with_capacity(samples.len());
        let mut y = Vec::with_capacity(samples.len());
        for s in samples {
            let label = s.label.ok_or_else(|| {
                Error::Validation(format!("training sample {} carries no label", s.id))
            })?;
            x.push(&s.features);
            y.push(label.signum());
        }
        Self::validated(x, y)
    }

    /// Builds a view from parallel feature/label slices.
    pub fn from_parts(x: Vec<&'a FeatureVector>, labels: &[Label]) -> Result<Self> {
        if x.len() != labels.len() {
            return Err(Error::Validation(format!(
                "{} feature vectors but {} labels",
                x.len(),
                labels.len()
            )));
        }
        let y = labels.iter().map(|l| l.signum()).collect();
        Self::validated(x, y)
    }

    fn validated(x: Vec<&'a FeatureVector>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Training("empty training set".into()));
        }
        let dim = x[0].dim();
        for (i, f) in x.iter().enumerate() {
            if f.dim() != dim {
                return Err(Error::Validation(format!(
                    "training sample {i} has dimension {} but sample 0 has {dim}",
                    f.dim()
                )));
            }
            if !f.is_finite() {
                return Err(Error::Validation(format!(
                    "training sample {i} contains non-finite features"
                )));
            }
        }
        if !(y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0)) {
            return Err(Error::Training(
                "training set contains a single class; both classes are required".into(),
            ));
        }
        Ok(TrainingSet { x, y, dim })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Dual coordinate descent over the augmented-bias representation.
///
/// `warm_start`, when given, must hold one dual variable per sample (values
/// in `[0, C]`); the solver resumes from it. The run is deterministic either
/// way.
pub fn solve(
    set: &TrainingSet,
    config: &SolverConfig,
    warm_start: Option<&[f64]>,
) -> Result<SvmFit> {
    config.validate()?;
    let n = set.len();
    let d = set.dim;
    let c = config.c;

    let mut alpha = match warm_start {
        Some(a0) => {
            if a0.len() != n {
                return Err(Error::Validation(format!(
                    "warm start has {} dual variables for {n} samples",
                    a0.len()
                )));
            }
            if a0
                .iter()
                .any(|&a| !a.is_finite() || !(0.0..=c).contains(&a))
            {
                return Err(Error::Validation(
                    "warm-start dual variables must lie in [0, C]".into(),
                ));
            }
            a0.to_vec()
        }
        None => vec![0.0; n],
    };

    // Augmented weight vector: w_aug[..d] are the weights, w_aug[d] the bias.
    let mut w_aug = vec![0.0; d + 1];
    for i in 0..n {
        if alpha[i] != 0.0 {
            let coef = alpha[i] * set.y[i];
            axpy(coef, set.x[i].as_slice(), &mut w_aug[..d]);
            w_aug[d] += coef;
        }
    }

    // Diagonal of the dual Hessian; the +1 comes from the bias feature.
    let qii: Vec<f64> = set
        .x
        .iter()
        .map(|f| dot(f.as_slice(), f.as_slice()) + 1.0)
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(SHUFFLE_SEED);
    let mut epochs_run = 0;
    let mut converged = false;
    let mut last_residual = f64::INFINITY;
    while epochs_run < config.max_epochs {
        epochs_run += 1;
        order.shuffle(&mut shuffle_rng);
        let mut max_pg = 0.0f64;
        for &i in &order {
            let yi = set.y[i];
            let g = yi * (dot(&w_aug[..d], set.x[i].as_slice()) + w_aug[d]) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            max_pg = max_pg.max(pg.abs());
            if pg != 0.0 {
                let old = alpha[i];
                let new = (old - g / qii[i]).clamp(0.0, c);
                if new != old {
                    alpha[i] = new;
                    let coef = (new - old) * yi;
                    axpy(coef, set.x[i].as_slice(), &mut w_aug[..d]);
                    w_aug[d] += coef;
                }
            }
        }
        last_residual = max_pg;
        if max_pg <= config.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Training(format!(
            "coordinate descent did not converge within {} epochs (residual {last_residual:.3e} > tolerance {:.3e})",
            config.max_epochs, config.tolerance
        )));
    }

    let bias = w_aug[d];
    w_aug.truncate(d);
    Ok(SvmFit {
        model: LinearModel {
            weights: w_aug,
            bias,
        },
        alpha,
        epochs_run,
    })
}

fn axpy(coef: f64, x: &[f64], acc: &mut [f64]) {
    debug_assert_eq!(x.len(), acc.len());
    for (a, &v) in acc.iter_mut().zip(x) {
        *a += coef * v;
    }
}

/// Trains on labeled samples with `config`, from a cold start.
pub fn train(samples: &[Sample], config: &SolverConfig) -> Result<LinearModel> {
    Ok(solve(&TrainingSet::from_samples(samples)?, config, None)?.model)
}

/// Something that can fit an SVM to a training set, optionally warm-started.
///
/// Selection and attack code receive the trainer as a parameter so tests can
/// substitute stubs (for example, one that always fails to converge).
pub trait Trainer {
    fn fit(&self, set: &TrainingSet, warm_start: Option<&[f64]>) -> Result<SvmFit>;
}

/// The coordinate-descent solver as a [`Trainer`].
#[derive(Debug, Clone, Default)]
pub struct CdTrainer {
    pub config: SolverConfig,
}

impl CdTrainer {
    pub fn new(config: SolverConfig) -> Self {
        CdTrainer { config }
    }
}

impl Trainer for CdTrainer {
    fn fit(&self, set: &TrainingSet, warm_start: Option<&[f64]>) -> Result<SvmFit> {
        solve(set, &self.config, warm_start)
    }
}

/// Fraction of test samples whose predicted label differs from their label.
/// The tie `f(x) = 0` predicts +1.
pub fn test_error(model: &LinearModel, test: &[Sample]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Validation("test set is empty".into()));
    }
    let mut wrong = 0usize;
    for s in test {
        let label = s
            .label
            .ok_or_else(|| Error::Validation(format!("test sample {} carries no label", s.id)))?;
        if model.predict(&s.features)? != label {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / test.len() as f64)
}

/// Primal objective `(1/2)(‖w‖² + b²) + C·Σ hinge` of a model on a set.
/// The bias term appears because the bias is a regularized augmented feature.
pub fn primal_objective(model: &LinearModel, set: &TrainingSet, c: f64) -> f64 {
    let reg = 0.5 * (model.weight_norm_sq() + model.bias * model.bias);
    let hinge: f64 = set
        .x
        .iter()
        .zip(&set.y)
        .map(|(f, &y)| (1.0 - y * model.margin(f)).max(0.0))
        .sum();
    reg + c * hinge
}

/// Dual objective `Σα − (1/2)‖w(α)‖²` in the augmented representation.
pub fn dual_objective(fit: &SvmFit) -> f64 {
    let norm_sq = fit.model.weight_norm_sq() + fit.model.bias * fit.model.bias;
    fit.alpha.iter().sum::<f64>() - 0.5 * norm_sq
}
