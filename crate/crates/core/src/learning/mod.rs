//! Parameter estimation: ERM on labeled objects, and hard or soft EM when
//! labels are scarce or missing.
//!
//! All fits share one penalized solver: lasso on feature weights, ridge on
//! source intercepts (and copying-pair weights), minimized by accelerated
//! proximal gradient. Fitting is single-threaded and deterministic.

pub mod objective;
mod solver;

use crate::baselines::majority_vote;
use crate::error::{FusionError, Result};
use crate::instance::{FusionInstance, GroundTruth};
use crate::model::{seeded_argmax, Diagnostics, PosteriorTable, ScoreModel, SourcePair, WeightVector};
use crate::stats::log_sum_exp;

pub use objective::{FitMask, ObjectLoss, Penalized, SmoothLoss, SourceBinomialLoss, Target};
pub use solver::soft_threshold;
use solver::{minimize, SolverSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnAlgorithm {
    /// Log-likelihood of labeled object values.
    ErmObject,
    /// Logistic regression on per-observation correctness.
    ErmObservation,
    EmHard,
    EmSoft,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub algorithm: LearnAlgorithm,
    /// λ₁, on feature weights only.
    pub l1_feature_penalty: f64,
    /// λ₂, on source intercepts (and copying-pair weights).
    pub l2_intercept_penalty: f64,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub objective_tol: f64,
    /// Hard EM stops once at most this fraction of unlabeled objects flip.
    pub label_change_tol: f64,
    pub step_size: f64,
    pub seed: u64,
    /// Copying pairs to model; empty disables the extension.
    pub copying_pairs: Vec<SourcePair>,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            algorithm: LearnAlgorithm::ErmObject,
            l1_feature_penalty: 0.0,
            l2_intercept_penalty: 0.01,
            max_outer_iters: 100,
            max_inner_iters: 500,
            objective_tol: 1e-6,
            label_change_tol: 0.0,
            step_size: 1.0,
            seed: 0,
            copying_pairs: Vec::new(),
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(FusionError::InvalidInput(what.to_string()));
        if !(self.l1_feature_penalty >= 0.0 && self.l2_intercept_penalty >= 0.0) {
            return bad("penalties must be non-negative");
        }
        if self.max_outer_iters == 0 {
            return bad("max_outer_iters must be at least 1");
        }
        if !(self.step_size > 0.0 && self.objective_tol >= 0.0 && self.label_change_tol >= 0.0) {
            return bad("step size must be positive and tolerances non-negative");
        }
        Ok(())
    }

    pub fn with_algorithm(mut self, algorithm: LearnAlgorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    fn settings(&self) -> SolverSettings {
        SolverSettings {
            max_iters: self.max_inner_iters,
            tol: self.objective_tol,
            step_size: self.step_size,
        }
    }

    /// Zero weights shaped for `instance`, with this config's copying pairs.
    pub fn initial_weights(&self, instance: &FusionInstance) -> WeightVector {
        WeightVector::for_instance(instance).with_pairs(self.copying_pairs.iter().copied())
    }
}

/// Minimize `loss` plus the configured penalties from `init`.
pub fn fit_loss(
    loss: &dyn SmoothLoss,
    init: &WeightVector,
    config: &LearnConfig,
    mask: FitMask,
) -> Result<(WeightVector, Diagnostics)> {
    config.validate()?;
    let problem = Penalized {
        loss,
        template: init,
        l1: config.l1_feature_penalty,
        l2: config.l2_intercept_penalty,
        mask,
    };
    let (flat, diag) = minimize(&problem, init.to_flat(), &config.settings())?;
    Ok((init.from_flat(&flat), diag))
}

/// Shared M-step / ERM solver on hard or soft object labels, warm-started
/// from `init`.
pub fn fit_weights_from(
    instance: &FusionInstance,
    labels: &[(usize, Target)],
    config: &LearnConfig,
    init: &WeightVector,
) -> Result<(WeightVector, Diagnostics)> {
    if labels.is_empty() {
        return Err(FusionError::InvalidInput("no labeled objects to fit".into()));
    }
    let loss = ObjectLoss {
        instance,
        targets: labels,
    };
    fit_loss(&loss, init, config, FitMask::ALL)
}

/// [`fit_weights_from`] starting at zero weights.
pub fn fit_weights(
    instance: &FusionInstance,
    labels: &[(usize, Target)],
    config: &LearnConfig,
) -> Result<(WeightVector, Diagnostics)> {
    fit_weights_from(instance, labels, config, &config.initial_weights(instance))
}

fn hard_labels(gt: &GroundTruth) -> Vec<(usize, Target)> {
    gt.iter().map(|(o, v)| (o, Target::Hard(v))).collect()
}

/// ERM over the likelihood of labeled object values.
pub fn fit_erm_object(
    instance: &FusionInstance,
    ground_truth: &GroundTruth,
    config: &LearnConfig,
) -> Result<(WeightVector, Diagnostics)> {
    if ground_truth.is_empty() {
        return Err(FusionError::InvalidInput("ERM needs at least one labeled object".into()));
    }
    fit_weights(instance, &hard_labels(ground_truth), config)
}

/// Per-source `(correct, total)` counts over labeled observations.
pub fn labeled_counts(instance: &FusionInstance, ground_truth: &GroundTruth) -> (Vec<f64>, Vec<f64>) {
    let mut correct = vec![0.0; instance.n_sources()];
    let mut total = vec![0.0; instance.n_sources()];
    for (o, truth) in ground_truth.iter() {
        for c in instance.claims(o) {
            total[c.source] += 1.0;
            if c.value == truth {
                correct[c.source] += 1.0;
            }
        }
    }
    (correct, total)
}

/// ERM as logistic regression on whether each labeled observation is correct.
pub fn fit_erm_observation(
    instance: &FusionInstance,
    ground_truth: &GroundTruth,
    config: &LearnConfig,
) -> Result<(WeightVector, Diagnostics)> {
    if ground_truth.is_empty() {
        return Err(FusionError::InvalidInput("ERM needs at least one labeled object".into()));
    }
    let (successes, trials) = labeled_counts(instance, ground_truth);
    let loss = SourceBinomialLoss {
        instance,
        successes,
        trials,
    };
    fit_loss(&loss, &config.initial_weights(instance), config, FitMask::ALL)
}

/// Outcome of an EM run.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub weights: WeightVector,
    pub posteriors: PosteriorTable,
    /// Hard EM: final value assignment; soft EM: MAP of the final posteriors.
    /// Labeled objects always carry their label.
    pub values: Vec<usize>,
    pub diagnostics: Diagnostics,
    /// Per outer round: hard EM records the penalized M-step objective; soft
    /// EM records the penalized expected complete-data log-likelihood plus the
    /// entropy of the E-step distribution, which EM never decreases.
    pub trace: Vec<f64>,
}

/// EM over the unlabeled objects; labeled objects are clamped to their
/// labels in every E-step. The first E-step is a seeded majority vote.
pub fn fit_em(
    instance: &FusionInstance,
    ground_truth: &GroundTruth,
    config: &LearnConfig,
) -> Result<EmFit> {
    config.validate()?;
    match config.algorithm {
        LearnAlgorithm::EmSoft => fit_em_soft(instance, ground_truth, config),
        _ => fit_em_hard(instance, ground_truth, config),
    }
}

fn initial_assignment(instance: &FusionInstance, gt: &GroundTruth, seed: u64) -> Vec<usize> {
    let mut values = majority_vote(instance, seed);
    for (o, v) in gt.iter() {
        values[o] = v;
    }
    values
}

fn fit_em_hard(instance: &FusionInstance, gt: &GroundTruth, config: &LearnConfig) -> Result<EmFit> {
    let mut values = initial_assignment(instance, gt, config.seed);
    let unlabeled: Vec<usize> = (0..instance.n_objects()).filter(|&o| !gt.contains(o)).collect();
    let max_flips = (config.label_change_tol * unlabeled.len() as f64).floor() as usize;
    let mut w = config.initial_weights(instance);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut rounds = 0;

    while rounds < config.max_outer_iters {
        rounds += 1;
        let labels: Vec<(usize, Target)> = values
            .iter()
            .enumerate()
            .map(|(o, &v)| (o, Target::Hard(v)))
            .collect();
        let (next, diag) = fit_weights_from(instance, &labels, config, &w)?;
        w = next;
        trace.push(diag.objective);

        let model = ScoreModel::new(instance, &w);
        let mut flips = 0;
        for &o in &unlabeled {
            let v = seeded_argmax(&model.scores(o), config.seed, o);
            if v != values[o] {
                values[o] = v;
                flips += 1;
            }
        }
        if flips <= max_flips {
            converged = true;
            break;
        }
    }

    Ok(EmFit {
        posteriors: PosteriorTable::compute(instance, &w),
        diagnostics: Diagnostics {
            iterations: rounds,
            objective: trace.last().copied().unwrap_or(f64::NAN),
            converged,
        },
        weights: w,
        values,
        trace,
    })
}

fn entropy_nats(q: &[f64]) -> f64 {
    q.iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum()
}

fn fit_em_soft(instance: &FusionInstance, gt: &GroundTruth, config: &LearnConfig) -> Result<EmFit> {
    let init = initial_assignment(instance, gt, config.seed);
    let one_hot = |o: usize, v: usize| {
        let mut q = vec![0.0; instance.domain(o).len()];
        q[v] = 1.0;
        q
    };
    let mut targets: Vec<(usize, Target)> = (0..instance.n_objects())
        .map(|o| match gt.get(o) {
            Some(v) => (o, Target::Hard(v)),
            None => (o, Target::Soft(one_hot(o, init[o]))),
        })
        .collect();
    let mut w = config.initial_weights(instance);
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut rounds = 0;

    while rounds < config.max_outer_iters {
        rounds += 1;
        let (next, diag) = fit_weights_from(instance, &targets, config, &w)?;
        w = next;
        let entropy: f64 = targets
            .iter()
            .map(|(_, t)| match t {
                Target::Soft(q) => entropy_nats(q),
                Target::Hard(_) => 0.0,
            })
            .sum();
        let value = -diag.objective + entropy;

        let model = ScoreModel::new(instance, &w);
        for (o, t) in targets.iter_mut() {
            if let Target::Soft(q) = t {
                let scores = model.scores(*o);
                let lse = log_sum_exp(&scores);
                for (qd, s) in q.iter_mut().zip(&scores) {
                    *qd = (s - lse).exp();
                }
            }
        }

        let improvement = trace.last().map(|prev| value - prev);
        trace.push(value);
        if matches!(improvement, Some(gain) if gain < config.objective_tol * value.abs().max(1.0)) {
            converged = true;
            break;
        }
    }

    let posteriors = PosteriorTable::compute(instance, &w);
    let values = (0..instance.n_objects())
        .map(|o| match gt.get(o) {
            Some(v) => v,
            None => seeded_argmax(posteriors.row(o), config.seed, o),
        })
        .collect();
    Ok(EmFit {
        posteriors,
        diagnostics: Diagnostics {
            iterations: rounds,
            objective: trace.last().copied().unwrap_or(f64::NAN),
            converged,
        },
        weights: w,
        values,
        trace,
    })
}

/// Fit according to `config.algorithm`.
pub fn fit(
    instance: &FusionInstance,
    ground_truth: &GroundTruth,
    config: &LearnConfig,
) -> Result<(WeightVector, Diagnostics)> {
    match config.algorithm {
        LearnAlgorithm::ErmObject => fit_erm_object(instance, ground_truth, config),
        LearnAlgorithm::ErmObservation => fit_erm_observation(instance, ground_truth, config),
        LearnAlgorithm::EmHard | LearnAlgorithm::EmSoft => {
            fit_em(instance, ground_truth, config).map(|f| (f.weights, f.diagnostics))
        }
    }
}
