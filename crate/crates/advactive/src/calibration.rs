//! Posterior calibration of SVM margins via Platt scaling.
//!
//! Maps a decision value `f` to `p(+1|x) = 1/(1 + exp(A·f + B))` where the
//! sigmoid parameters minimize cross-entropy against smoothed label targets
//! on a held-out validation set. `p(−1|x)` is the exact complement. The fit
//! runs Newton's method with a ridge-stabilized Hessian and backtracking
//! line search, entirely deterministic.

use crate::data::{FeatureVector, Label, Sample};
use crate::error::{Error, Result};
use crate::svm::{LinearModel, SvmFit};

/// Sigmoid parameters of the margin-to-posterior map.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlattParams {
    pub a: f64,
    pub b: f64,
}

/// A fitted sigmoid plus diagnostics of its optimization run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlattFit {
    pub params: PlattParams,
    /// True when validation margins were numerically constant and the fit
    /// fell back to the prior-only sigmoid.
    pub degenerate_margins: bool,
    /// Newton iterations performed.
    pub iterations: usize,
}

/// Newton optimizer settings for the sigmoid fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PlattCalibrator {
    /// Stop once `max(|∂F/∂A|, |∂F/∂B|)` falls to this level.
    pub grad_tol: f64,
    /// Iteration cap; hitting it is normal termination, not an error.
    pub max_iterations: usize,
}

impl Default for PlattCalibrator {
    fn default() -> Self {
        PlattCalibrator {
            grad_tol: 1e-10,
            max_iterations: 200,
        }
    }
}

/// Spread below which validation margins count as constant.
const DEGENERATE_MARGIN_SPREAD: f64 = 1e-12;
/// Sigmoid exponents are clamped to this magnitude before `exp`.
const MAX_EXPONENT: f64 = 500.0;
/// Armijo sufficient-decrease constant for the line search.
const ARMIJO_C: f64 = 1e-4;
/// Ridge added to the Hessian diagonal before solving the Newton system.
const HESSIAN_RIDGE: f64 = 1e-12;

/// Cross-entropy targets `(t₊, t₋)` smoothed by label counts.
pub fn smoothed_targets(n_pos: usize, n_neg: usize) -> (f64, f64) {
    let t_pos = (n_pos as f64 + 1.0) / (n_pos as f64 + 2.0);
    let t_neg = 1.0 / (n_neg as f64 + 2.0);
    (t_pos, t_neg)
}

/// Posterior of the positive class for a raw margin under `params`.
pub fn posterior_from_margin(params: &PlattParams, margin: f64) -> f64 {
    let s = (params.a * margin + params.b).clamp(-MAX_EXPONENT, MAX_EXPONENT);
    1.0 / (1.0 + s.exp())
}

/// Cross-entropy objective at `(a, b)` over margins with per-sample targets.
pub fn platt_objective(a: f64, b: f64, margins: &[f64], targets: &[f64]) -> f64 {
    debug_assert_eq!(margins.len(), targets.len());
    let mut total = 0.0;
    for (&f, &t) in margins.iter().zip(targets) {
        let s = a * f + b;
        // ln(1 + e^s) − (1 − t)·s, arranged to avoid overflow either side.
        total += if s >= 0.0 {
            (-s).exp().ln_1p() + t * s
        } else {
            s.exp().ln_1p() - (1.0 - t) * s
        };
    }
    total
}

/// Gradient `(∂F/∂a, ∂F/∂b)` of [`platt_objective`] at `(a, b)`.
pub fn platt_gradient(a: f64, b: f64, margins: &[f64], targets: &[f64]) -> (f64, f64) {
    debug_assert_eq!(margins.len(), targets.len());
    let (mut ga, mut gb) = (0.0, 0.0);
    for (&f, &t) in margins.iter().zip(targets) {
        let s = (a * f + b).clamp(-MAX_EXPONENT, MAX_EXPONENT);
        let p = 1.0 / (1.0 + s.exp());
        let d = t - p;
        ga += f * d;
        gb += d;
    }
    (ga, gb)
}

impl PlattCalibrator {
    /// Fits the sigmoid to a model's margins on labeled validation samples.
    pub fn fit(&self, model: &LinearModel, validation: &[Sample]) -> Result<PlattFit> {
        let (margins, labels) = margins_and_labels(model, validation)?;
        self.fit_margins(&margins, &labels)
    }

    /// Fits the sigmoid to precomputed margins and their labels.
    pub fn fit_margins(&self, margins: &[f64], labels: &[Label]) -> Result<PlattFit> {
        self.fit_inner(margins, labels, None)
    }

    /// Like [`fit_margins`](Self::fit_margins) but records the objective
    /// value at the start and after every Newton iteration.
    pub fn fit_margins_traced(
        &self,
        margins: &[f64],
        labels: &[Label],
        trace: &mut Vec<f64>,
    ) -> Result<PlattFit> {
        self.fit_inner(margins, labels, Some(trace))
    }

    fn fit_inner(
        &self,
        margins: &[f64],
        labels: &[Label],
        mut trace: Option<&mut Vec<f64>>,
    ) -> Result<PlattFit> {
        if margins.is_empty() {
            return Err(Error::Calibration(
                "no validation margins to calibrate on".into(),
            ));
        }
        if margins.len() != labels.len() {
            return Err(Error::Calibration(format!(
                "{} margins but {} labels",
                margins.len(),
                labels.len()
            )));
        }
        if margins.iter().any(|m| !m.is_finite()) {
            return Err(Error::Validation("non-finite validation margin".into()));
        }

        let n_pos = labels.iter().filter(|l| **l == Label::Pos).count();
        let n_neg = labels.len() - n_pos;
        let (t_pos, t_neg) = smoothed_targets(n_pos, n_neg);
        let prior_b = ((n_neg as f64 + 1.0) / (n_pos as f64 + 1.0)).ln();

        let spread = max_of(margins) - min_of(margins);
        if spread < DEGENERATE_MARGIN_SPREAD {
            return Ok(PlattFit {
                params: PlattParams { a: 0.0, b: prior_b },
                degenerate_margins: true,
                iterations: 0,
            });
        }

        let targets: Vec<f64> = labels
            .iter()
            .map(|l| if *l == Label::Pos { t_pos } else { t_neg })
            .collect();

        let (mut a, mut b) = (0.0, prior_b);
        let mut objective = platt_objective(a, b, margins, &targets);
        if let Some(t) = trace.as_deref_mut() {
            t.push(objective);
        }

        let mut iterations = 0;
        while iterations < self.max_iterations {
            let (ga, gb) = platt_gradient(a, b, margins, &targets);
            if ga.abs().max(gb.abs()) <= self.grad_tol {
                break;
            }
            iterations += 1;

            // Hessian of the cross-entropy in (a, b), ridge-stabilized.
            let (mut haa, mut hab, mut hbb) = (HESSIAN_RIDGE, 0.0, HESSIAN_RIDGE);
            for (&f, _) in margins.iter().zip(&targets) {
                let s = (a * f + b).clamp(-MAX_EXPONENT, MAX_EXPONENT);
                let p = 1.0 / (1.0 + s.exp());
                let w = p * (1.0 - p);
                haa += f * f * w;
                hab += f * w;
                hbb += w;
            }
            let det = haa * hbb - hab * hab;
            if det <= 0.0 || !det.is_finite() {
                return Err(Error::Calibration(format!(
                    "sigmoid Hessian is singular (determinant {det:.3e})"
                )));
            }
            let da = -(hbb * ga - hab * gb) / det;
            let db = -(-hab * ga + haa * gb) / det;

            // Backtracking line search with Armijo sufficient decrease.
            let directional = ga * da + gb * db;
            let mut step = 1.0;
            let mut accepted = false;
            while step > 1e-30 {
                let candidate = platt_objective(a + step * da, b + step * db, margins, &targets);
                if candidate <= objective + ARMIJO_C * step * directional {
                    a += step * da;
                    b += step * db;
                    objective = candidate;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push(objective);
            }
            if !accepted {
                // No representable step improves the objective; the current
                // point is the working optimum.
                break;
            }
        }

        Ok(PlattFit {
            params: PlattParams { a, b },
            degenerate_margins: false,
            iterations,
        })
    }
}

fn margins_and_labels(
    model: &LinearModel,
    validation: &[Sample],
) -> Result<(Vec<f64>, Vec<Label>)> {
    if validation.is_empty() {
        return Err(Error::Calibration("empty validation set".into()));
    }
    let mut margins = Vec::with_capacity(validation.len());
    let mut labels = Vec::with_capacity(validation.len());
    for s in validation {
        let label = s.label.ok_or_else(|| {
            Error::Validation(format!("validation sample {} carries no label", s.id))
        })?;
        margins.push(model.decision(&s.features)?);
        labels.push(label);
    }
    Ok((margins, labels))
}

/// Fits the sigmoid with default optimizer settings.
pub fn fit_platt(model: &LinearModel, validation: &[Sample]) -> Result<PlattFit> {
    PlattCalibrator::default().fit(model, validation)
}

/// Something that can calibrate a model's margins into posteriors.
///
/// Passed as a parameter alongside [`crate::svm::Trainer`] so tests can
/// substitute stubs with prescribed behavior.
pub trait Calibrator {
    fn calibrate(&self, model: &LinearModel, validation: &[Sample]) -> Result<PlattFit>;
}

impl Calibrator for PlattCalibrator {
    fn calibrate(&self, model: &LinearModel, validation: &[Sample]) -> Result<PlattFit> {
        self.fit(model, validation)
    }
}

/// A trained SVM paired with the sigmoid calibrated for it.
///
/// Construction is atomic — the sigmoid is always fit against the margins of
/// the exact model it is stored with, so the pair cannot drift apart.
#[derive(Debug, Clone)]
pub struct CalibratedClassifier {
    fit: SvmFit,
    platt: PlattFit,
}

impl CalibratedClassifier {
    /// Calibrates `fit` against `validation` and pairs the two.
    pub fn fit(fit: SvmFit, validation: &[Sample], calibrator: &PlattCalibrator) -> Result<Self> {
        let platt = calibrator.fit(&fit.model, validation)?;
        Ok(CalibratedClassifier { fit, platt })
    }

    /// Pairs an already-fitted sigmoid with its model. The caller vouches
    /// that the sigmoid was fit against this exact model.
    pub fn from_parts(fit: SvmFit, platt: PlattFit) -> Self {
        CalibratedClassifier { fit, platt }
    }

    pub fn model(&self) -> &LinearModel {
        &self.fit.model
    }

    pub fn svm_fit(&self) -> &SvmFit {
        &self.fit
    }

    pub fn platt(&self) -> &PlattFit {
        &self.platt
    }

    /// Posterior `p(label|x)`, dimension-checked.
    pub fn posterior(&self, x: &FeatureVector, label: Label) -> Result<f64> {
        let margin = self.fit.model.decision(x)?;
        Ok(self.posterior_from_margin(margin, label))
    }

    /// Posterior `p(label|x)` from a precomputed margin. The two labels'
    /// posteriors are exact complements.
    pub fn posterior_from_margin(&self, margin: f64, label: Label) -> f64 {
        let pos = posterior_from_margin(&self.platt.params, margin);
        match label {
            Label::Pos => pos,
            Label::Neg => 1.0 - pos,
        }
    }
}


fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}
