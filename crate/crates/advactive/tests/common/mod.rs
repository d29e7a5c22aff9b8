//! Shared fixtures and independent reference implementations for the
//! integration suites: a brute-force QP solver, a grid-search sigmoid
//! fitter, a line-by-line transcription of the expected-utility formula,
//! and a synthetic digit-image corpus for the mnist56 task.
//!
//! The reference implementations deliberately share no code with the crate
//! beyond its public data types, so agreement between the two paths is
//! evidence of correctness rather than of common ancestry.

#![allow(dead_code)] // each integration target uses a different subset

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use advactive::calibration::{CalibratedClassifier, PlattCalibrator, PlattParams};
use advactive::data::{
    DataPools, DatasetSpec, FeatureVector, IdxImages, Label, Sample, SampleId, TaskKind,
};
use advactive::svm::{train, CdTrainer, LinearModel, SolverConfig, Trainer, TrainingSet};

// ---------------------------------------------------------------------------
// Brute-force QP reference for the soft-margin dual.
// ---------------------------------------------------------------------------

/// Optimal dual variables and dual objective found by exhaustive search.
pub struct QpSolution {
    pub alpha: Vec<f64>,
    /// Value of the dual maximum, `Σα − ½ αᵀQα`.
    pub objective: f64,
}

/// Gauss–Jordan elimination with partial pivoting; `None` when singular.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .expect("finite matrix entries")
        })?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Solves `max_α Σα − ½ αᵀQα` over the box `0 ≤ α ≤ C` with
/// `Q_ij = y_i y_j (x_i·x_j + 1)` (the `+1` folds the bias into the
/// kernel) by enumerating all 3ⁿ bound patterns. Every feasible candidate
/// under-estimates the maximum, and the optimal pattern reproduces it
/// exactly, so the best candidate is the optimum.
pub fn brute_force_dual(points: &[Vec<f64>], labels: &[f64], c: f64) -> QpSolution {
    let n = points.len();
    assert!(n <= 12, "3^n enumeration is only for tiny instances");
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let dot: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| a * b).sum();
                    labels[i] * labels[j] * (dot + 1.0)
                })
                .collect()
        })
        .collect();

    let dual_value = |alpha: &[f64]| -> f64 {
        let quad: f64 = (0..n)
            .map(|i| alpha[i] * (0..n).map(|j| q[i][j] * alpha[j]).sum::<f64>())
            .sum();
        alpha.iter().sum::<f64>() - 0.5 * quad
    };

    let mut best: Option<QpSolution> = None;
    for pattern in 0..3usize.pow(n as u32) {
        let mut code = pattern;
        let states: Vec<u8> = (0..n)
            .map(|_| {
                let s = (code % 3) as u8;
                code /= 3;
                s
            })
            .collect();
        let free: Vec<usize> = (0..n).filter(|&i| states[i] == 2).collect();
        let mut alpha: Vec<f64> = states
            .iter()
            .map(|&s| if s == 1 { c } else { 0.0 })
            .collect();
        if !free.is_empty() {
            // Stationarity on the free block: Q_FF α_F = 1 − Q_FB α_B.
            let a_mat: Vec<Vec<f64>> = free
                .iter()
                .map(|&i| free.iter().map(|&j| q[i][j]).collect())
                .collect();
            let rhs: Vec<f64> = free
                .iter()
                .map(|&i| {
                    1.0 - (0..n)
                        .filter(|j| states[*j] == 1)
                        .map(|j| q[i][j] * c)
                        .sum::<f64>()
                })
                .collect();
            let Some(solution) = solve_linear(a_mat, rhs) else {
                continue;
            };
            if solution
                .iter()
                .any(|&v| !v.is_finite() || v < -1e-9 || v > c + 1e-9)
            {
                continue;
            }
            for (k, &i) in free.iter().enumerate() {
                alpha[i] = solution[k].clamp(0.0, c);
            }
        }
        let objective = dual_value(&alpha);
        if best.as_ref().is_none_or(|b| objective > b.objective) {
            best = Some(QpSolution { alpha, objective });
        }
    }
    let best = best.expect("at least the all-zero pattern is feasible");

    // Sanity: the winner satisfies the KKT conditions of the box QP.
    for i in 0..n {
        let grad: f64 = (0..n).map(|j| q[i][j] * best.alpha[j]).sum::<f64>() - 1.0;
        let at_lower = best.alpha[i] <= 1e-8;
        let at_upper = best.alpha[i] >= c - 1e-8;
        assert!(
            (at_lower && grad >= -1e-6)
                || (at_upper && grad <= 1e-6)
                || (!at_lower && !at_upper && grad.abs() <= 1e-6),
            "enumeration winner violates KKT at {i}: alpha={} grad={grad}",
            best.alpha[i]
        );
    }
    best
}

/// A random tiny training problem for solver cross-checks.
pub struct QpInstance {
    pub points: Vec<Vec<f64>>,
    /// ±1 targets; the first two are fixed so both classes always appear.
    pub labels: Vec<f64>,
    pub c: f64,
}

/// Standard-normal 2-D instances of 2..=`max_points` points with C cycling
/// through {0.1, 1, 10}.
pub fn random_qp_instances(count: usize, max_points: usize, seed: u64) -> Vec<QpInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..count)
        .map(|k| {
            let n = rng.gen_range(2..=max_points);
            let points: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![normal.sample(&mut rng), normal.sample(&mut rng)])
                .collect();
            let labels: Vec<f64> = (0..n)
                .map(|i| match i {
                    0 => 1.0,
                    1 => -1.0,
                    _ => {
                        if rng.gen_bool(0.5) {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                })
                .collect();
            let c = [0.1, 1.0, 10.0][k % 3];
            QpInstance { points, labels, c }
        })
        .collect()
}

/// Views a QP instance as typed features and labels for the solver.
pub fn qp_training_set(instance: &QpInstance) -> (Vec<FeatureVector>, Vec<Label>) {
    let features: Vec<FeatureVector> = instance
        .points
        .iter()
        .map(|p| FeatureVector(p.clone()))
        .collect();
    let labels: Vec<Label> = instance
        .labels
        .iter()
        .map(|&y| if y > 0.0 { Label::Pos } else { Label::Neg })
        .collect();
    (features, labels)
}

// ---------------------------------------------------------------------------
// Independent sigmoid fitter: dense grid plus finite-difference Newton.
// ---------------------------------------------------------------------------

/// Sigmoid cross-entropy in (a, b), written from the definition with the
/// usual `log1p` stabilization. `z` saturates at ±500 like the posterior.
fn sigmoid_objective(a: f64, b: f64, margins: &[f64], targets: &[f64]) -> f64 {
    margins
        .iter()
        .zip(targets)
        .map(|(&f, &t)| {
            let z = (a * f + b).clamp(-500.0, 500.0);
            // −[t ln p + (1−t) ln(1−p)] with p = 1/(1+e^z) reduces to
            // ln(1+e^z) − (1−t)·z.
            let log1pe = if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            log1pe - (1.0 - t) * z
        })
        .sum()
}

/// Fits the sigmoid by exhaustive grid refinement followed by a Newton
/// polish on finite-difference derivatives. Slow and simple on purpose.
pub fn grid_sigmoid_fit(margins: &[f64], labels: &[Label]) -> (f64, f64) {
    let n_pos = labels.iter().filter(|&&l| l == Label::Pos).count();
    let n_neg = labels.len() - n_pos;
    let t_pos = (n_pos as f64 + 1.0) / (n_pos as f64 + 2.0);
    let t_neg = 1.0 / (n_neg as f64 + 2.0);
    let targets: Vec<f64> = labels
        .iter()
        .map(|&l| if l == Label::Pos { t_pos } else { t_neg })
        .collect();
    let f = |a: f64, b: f64| sigmoid_objective(a, b, margins, &targets);

    // Coarse-to-fine grid.
    let (mut ca, mut cb) = (-30.0, 0.0);
    let (mut span_a, mut span_b) = (50.0, 20.0);
    for _ in 0..24 {
        let mut best = (f(ca, cb), ca, cb);
        for i in 0..=20 {
            for j in 0..=20 {
                let a = ca - span_a + 2.0 * span_a * i as f64 / 20.0;
                let b = cb - span_b + 2.0 * span_b * j as f64 / 20.0;
                let v = f(a, b);
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        (ca, cb) = (best.1, best.2);
        span_a *= 0.4;
        span_b *= 0.4;
    }

    // Newton polish on central differences.
    let h = 1e-5;
    for _ in 0..80 {
        let ga = (f(ca + h, cb) - f(ca - h, cb)) / (2.0 * h);
        let gb = (f(ca, cb + h) - f(ca, cb - h)) / (2.0 * h);
        if ga.abs().max(gb.abs()) < 1e-12 {
            break;
        }
        let haa = (f(ca + h, cb) - 2.0 * f(ca, cb) + f(ca - h, cb)) / (h * h);
        let hbb = (f(ca, cb + h) - 2.0 * f(ca, cb) + f(ca, cb - h)) / (h * h);
        let hab = (f(ca + h, cb + h) - f(ca + h, cb - h) - f(ca - h, cb + h) + f(ca - h, cb - h))
            / (4.0 * h * h);
        let det = haa * hbb - hab * hab;
        if det.abs() < 1e-18 {
            break;
        }
        let da = (hbb * ga - hab * gb) / det;
        let db = (haa * gb - hab * ga) / det;
        let mut step = 1.0;
        let current = f(ca, cb);
        while step > 1e-12 && f(ca - step * da, cb - step * db) > current {
            step *= 0.5;
        }
        ca -= step * da;
        cb -= step * db;
    }
    (ca, cb)
}

// ---------------------------------------------------------------------------
// Direct transcription of the expected-utility formula.
// ---------------------------------------------------------------------------

/// Class-posterior from raw model and sigmoid parameters, written from the
/// definition.
pub fn raw_posterior(
    model: &LinearModel,
    platt: &PlattParams,
    x: &FeatureVector,
    label: Label,
) -> f64 {
    let margin: f64 = model
        .weights
        .iter()
        .zip(&x.0)
        .map(|(w, v)| w * v)
        .sum::<f64>()
        + model.bias;
    let z = (platt.a * margin + platt.b).clamp(-500.0, 500.0);
    let p_pos = 1.0 / (1.0 + z.exp());
    match label {
        Label::Pos => p_pos,
        Label::Neg => 1.0 - p_pos,
    }
}

/// Expected utility of querying `pools.unlabeled[candidate]`, computed as a
/// direct sum in textbook order:
///
///   Ũ = Σ_ŷ p(ŷ|x) · (1/N) · [ Σ_{j∈L∪{x}} p⁺(y_j|x_j)
///       + Σ_{j∈U∖{x}} Σ_y p(y|x_j) · p⁺(y|x_j) ]
///
/// where p is the current calibrated posterior, p⁺ the posterior after
/// retraining on L ∪ {(x, ŷ)} (cold start) with the sigmoid refit on the
/// validation set, and N = |L| + |U|.
pub fn direct_expected_utility(
    clf: &CalibratedClassifier,
    pools: &DataPools,
    candidate: usize,
    solver: &SolverConfig,
) -> f64 {
    let n = (pools.labeled.len() + pools.unlabeled.len()) as f64;
    let xc = &pools.unlabeled[candidate].features;
    let old_model = clf.model();
    let old_platt = clf.platt().params;
    let calibrator = PlattCalibrator::default();

    let mut total = 0.0;
    for y_hat in [Label::Pos, Label::Neg] {
        let weight = raw_posterior(old_model, &old_platt, xc, y_hat);

        let mut union: Vec<Sample> = pools.labeled.clone();
        union.push(Sample::natural(SampleId(u64::MAX), xc.clone(), y_hat));
        let new_model = train(&union, solver).expect("micro-instance retrain");
        let new_platt = calibrator
            .fit(&new_model, &pools.validation)
            .expect("micro-instance calibration")
            .params;

        let mut inner = 0.0;
        for s in &pools.labeled {
            inner += raw_posterior(&new_model, &new_platt, &s.features, s.label.unwrap());
        }
        inner += raw_posterior(&new_model, &new_platt, xc, y_hat);
        for (j, s) in pools.unlabeled.iter().enumerate() {
            if j == candidate {
                continue;
            }
            for y in [Label::Pos, Label::Neg] {
                inner += raw_posterior(old_model, &old_platt, &s.features, y)
                    * raw_posterior(&new_model, &new_platt, &s.features, y);
            }
        }
        total += weight * inner / n;
    }
    total
}

/// Expected utility of a candidate that is not in the pool (an attacker
/// crafting), written directly: the normalizer counts the candidate itself
/// (`N = |L| + |U| + 1`) and the independent-sample sum runs over all of U.
pub fn direct_external_utility(
    clf: &CalibratedClassifier,
    pools: &DataPools,
    xc: &FeatureVector,
    solver: &SolverConfig,
) -> f64 {
    let n = (pools.labeled.len() + pools.unlabeled.len() + 1) as f64;
    let old_model = clf.model();
    let old_platt = clf.platt().params;
    let calibrator = PlattCalibrator::default();

    let mut total = 0.0;
    for y_hat in [Label::Pos, Label::Neg] {
        let weight = raw_posterior(old_model, &old_platt, xc, y_hat);
        let mut union: Vec<Sample> = pools.labeled.clone();
        union.push(Sample::natural(SampleId(u64::MAX), xc.clone(), y_hat));
        let new_model = train(&union, solver).expect("external retrain");
        let new_platt = calibrator
            .fit(&new_model, &pools.validation)
            .expect("external calibration")
            .params;

        let mut inner = 0.0;
        for s in &pools.labeled {
            inner += raw_posterior(&new_model, &new_platt, &s.features, s.label.unwrap());
        }
        inner += raw_posterior(&new_model, &new_platt, xc, y_hat);
        for s in &pools.unlabeled {
            for y in [Label::Pos, Label::Neg] {
                inner += raw_posterior(old_model, &old_platt, &s.features, y)
                    * raw_posterior(&new_model, &new_platt, &s.features, y);
            }
        }
        total += weight * inner / n;
    }
    total
}

// ---------------------------------------------------------------------------
// Synthetic digit corpus for the mnist56 task.
// ---------------------------------------------------------------------------

const GLYPH_FIVE: [&str; 8] = [
    "########", "#.......", "#.......", "######..", ".......#", ".......#", "#......#", ".######.",
];

const GLYPH_SIX: [&str; 8] = [
    "..#####.", ".#......", "#.......", "######..", "#......#", "#......#", "#......#", ".######.",
];

/// Image side length of the generated corpus.
pub const SURROGATE_SIDE: usize = 12;

/// Generates a deterministic labeled image corpus of noisy, jittered "5"
/// and "6" glyphs in IDX form: `per_digit` images of each digit, 12×12
/// pixels, alternating labels. Stands in for the real handwritten-digit
/// files, which are too large to ship with the tests.
pub fn surrogate_digit_corpus(per_digit: usize, seed: u64) -> (IdxImages, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 8.0).unwrap();
    let mut pixels = Vec::with_capacity(2 * per_digit * SURROGATE_SIDE * SURROGATE_SIDE);
    let mut labels = Vec::with_capacity(2 * per_digit);
    for i in 0..2 * per_digit {
        let digit: u8 = if i % 2 == 0 { 5 } else { 6 };
        let glyph = if digit == 5 { &GLYPH_FIVE } else { &GLYPH_SIX };
        labels.push(digit);
        let dr = rng.gen_range(1..=3);
        let dc = rng.gen_range(1..=3);
        let intensity: f64 = rng.gen_range(170.0..=255.0);
        for r in 0..SURROGATE_SIDE {
            for c in 0..SURROGATE_SIDE {
                let lit = r >= dr
                    && r < dr + 8
                    && c >= dc
                    && c < dc + 8
                    && glyph[r - dr].as_bytes()[c - dc] == b'#';
                let value = if lit { intensity } else { 0.0 } + noise.sample(&mut rng);
                pixels.push(value.clamp(0.0, 255.0).round() as u8);
            }
        }
    }
    (
        IdxImages {
            count: 2 * per_digit,
            rows: SURROGATE_SIDE,
            cols: SURROGATE_SIDE,
            pixels,
        },
        labels,
    )
}

/// Dataset spec for the surrogate digit corpus.
pub fn surrogate_spec(pool_per_class: usize, test_per_class: usize, seed: u64) -> DatasetSpec {
    DatasetSpec {
        task: TaskKind::Mnist56,
        pool_per_class,
        labeled_per_class: 5,
        validation_per_class: 5,
        test_pos: test_per_class,
        test_neg: test_per_class,
        seed,
    }
}

// ---------------------------------------------------------------------------
// Small shared helpers.
// ---------------------------------------------------------------------------

/// Gaussian micro-pools around ±(mean, 0) with rule labels, for formula
/// tests that need full control over pool sizes.
pub fn gaussian_micro_pools(
    seed: u64,
    n_labeled: usize,
    n_unlabeled: usize,
    n_validation: usize,
) -> DataPools {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut id = 0u64;
    let draw = |rng: &mut ChaCha8Rng, id: &mut u64, labeled: bool| {
        let class = if *id % 2 == 0 { 1.0 } else { -1.0 };
        let x = FeatureVector(vec![2.0 * class + normal.sample(rng), normal.sample(rng)]);
        let label = if x.0[0] >= 0.0 {
            Label::Pos
        } else {
            Label::Neg
        };
        let sample = if labeled {
            Sample::natural(SampleId(*id), x, label)
        } else {
            Sample::natural_unlabeled(SampleId(*id), x)
        };
        *id += 1;
        sample
    };
    let mut labeled: Vec<Sample> = (0..n_labeled.max(2))
        .map(|_| draw(&mut rng, &mut id, true))
        .collect();
    // Guarantee both classes in the labeled set.
    labeled[0].label = Some(Label::Pos);
    labeled[0].features.0[0] = labeled[0].features.0[0].abs().max(0.5);
    labeled[1].label = Some(Label::Neg);
    labeled[1].features.0[0] = -labeled[1].features.0[0].abs().max(0.5);
    let validation: Vec<Sample> = (0..n_validation.max(2))
        .map(|_| draw(&mut rng, &mut id, true))
        .collect();
    let unlabeled: Vec<Sample> = (0..n_unlabeled.max(1))
        .map(|_| draw(&mut rng, &mut id, false))
        .collect();
    DataPools {
        labeled,
        validation,
        unlabeled,
        test: Vec::new(),
    }
}

/// Trains and calibrates a classifier on a pool's labeled and validation
/// sets, the same way a trial initializes.
pub fn train_calibrated(pools: &DataPools, solver: &SolverConfig) -> CalibratedClassifier {
    let trainer = CdTrainer::new(solver.clone());
    let fit = trainer
        .fit(&TrainingSet::from_samples(&pools.labeled).unwrap(), None)
        .unwrap();
    CalibratedClassifier::fit(fit, &pools.validation, &PlattCalibrator::default()).unwrap()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard error of the mean (sample standard deviation over √n).
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}
