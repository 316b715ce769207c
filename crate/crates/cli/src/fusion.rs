//! The `fuse` pipeline shared by the `fuse` and `evaluate` commands.

use clap::ValueEnum;
use veritas_core::analysis::add_copying_features;
use veritas_core::baselines::{counts_fit, counts_infer, majority_vote};
use veritas_core::learning::{fit_em, fit_erm_object, fit_erm_observation};
use veritas_core::optimizer::{decide, model_dimension, Choice};
use veritas_core::{
    map_values, trust_score, Algorithm, Diagnostics, FusionError, FusionInstance, FusionResult,
    GroundTruth, LearnAlgorithm, LearnConfig, OptimizerDecision, WeightVector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Auto,
    Erm,
    Em,
    Majority,
    Counts,
}

impl Algo {
    pub fn label(self) -> &'static str {
        match self {
            Algo::Auto => "AUTO",
            Algo::Erm => "ERM",
            Algo::Em => "EM",
            Algo::Majority => "MAJORITY",
            Algo::Counts => "COUNTS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ErmLoss {
    Object,
    Observation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmVariant {
    Hard,
    Soft,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuseParams {
    pub algo: Algo,
    pub tau: f64,
    pub l1: f64,
    pub l2: f64,
    pub seed: u64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub erm_loss: ErmLoss,
    pub em_variant: EmVariant,
    /// Model copying between source pairs sharing this many objects.
    pub copying_min_overlap: Option<usize>,
    /// Additive smoothing of the Counts baseline.
    pub smoothing: f64,
}

impl Default for FuseParams {
    fn default() -> Self {
        let learn = LearnConfig::default();
        Self {
            algo: Algo::Auto,
            tau: veritas_core::optimizer::DEFAULT_TAU,
            l1: learn.l1_feature_penalty,
            l2: learn.l2_intercept_penalty,
            seed: 0,
            max_outer: learn.max_outer_iters,
            max_inner: learn.max_inner_iters,
            erm_loss: ErmLoss::Object,
            em_variant: EmVariant::Hard,
            copying_min_overlap: None,
            smoothing: 1.0,
        }
    }
}

impl FuseParams {
    fn learn_config(&self, instance: &FusionInstance) -> veritas_core::Result<LearnConfig> {
        let copying_pairs = match self.copying_min_overlap {
            Some(k) => add_copying_features(instance, k)?,
            None => Vec::new(),
        };
        let config = LearnConfig {
            l1_feature_penalty: self.l1,
            l2_intercept_penalty: self.l2,
            max_outer_iters: self.max_outer,
            max_inner_iters: self.max_inner,
            seed: self.seed,
            copying_pairs,
            ..LearnConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuseOutput {
    pub result: FusionResult,
    pub decision: OptimizerDecision,
}

fn clamp_labels(values: &mut [usize], ground_truth: &GroundTruth) {
    for (o, v) in ground_truth.iter() {
        values[o] = v;
    }
}

/// Weights whose intercepts reproduce fixed accuracies.
fn weights_from_accuracies(instance: &FusionInstance, accuracies: &[f64]) -> veritas_core::Result<WeightVector> {
    let mut w = WeightVector::for_instance(instance);
    for (slot, &a) in w.source_intercepts.iter_mut().zip(accuracies) {
        *slot = trust_score(a.clamp(1e-12, 1.0 - 1e-12))?;
    }
    Ok(w)
}

fn run_erm(
    instance: &FusionInstance,
    ground_truth: &GroundTruth,
    params: &FuseParams,
    config: LearnConfig,
) -> veritas_core::Result<FusionResult> {
    let (w, diag) = match params.erm_loss {
        ErmLoss::Object => fit_erm_object(instance, ground_truth, &config.with_algorithm(LearnAlgorithm::ErmObject))?,
        ErmLoss::Observation => {
            fit_erm_observation(instance, ground_truth, &config.with_algorithm(LearnAlgorithm::ErmObservation))?
        }
    };
    let mut values = map_values(instance, &w, params.seed);
    clamp_labels(&mut values, ground_truth);
    Ok(FusionResult::new(instance, values, w, Algorithm::Erm, diag))
}

fn run_em(
    instance: &FusionInstance,
    ground_truth: &GroundTruth,
    params: &FuseParams,
    config: LearnConfig,
) -> veritas_core::Result<FusionResult> {
    let algorithm = match params.em_variant {
        EmVariant::Hard => LearnAlgorithm::EmHard,
        EmVariant::Soft => LearnAlgorithm::EmSoft,
    };
    let fit = fit_em(instance, ground_truth, &config.with_algorithm(algorithm))?;
    Ok(FusionResult::new(instance, fit.values, fit.weights, Algorithm::Em, fit.diagnostics))
}

/// Fuse `instance`; labeled objects always keep their labels.
pub fn fuse(instance: &FusionInstance, ground_truth: &GroundTruth, params: &FuseParams) -> veritas_core::Result<FuseOutput> {
    if params.tau.is_nan() || params.tau <= 0.0 {
        return Err(FusionError::InvalidInput("tau must be positive".into()));
    }
    let decision = decide(instance, ground_truth, params.tau, model_dimension(instance));
    let config = params.learn_config(instance)?;
    let result = match params.algo {
        Algo::Auto => match decision.choice {
            Choice::Erm => run_erm(instance, ground_truth, params, config)?,
            Choice::Em => run_em(instance, ground_truth, params, config)?,
        },
        Algo::Erm => {
            if ground_truth.is_empty() {
                return Err(FusionError::InvalidInput("ERM needs a truth file with at least one label".into()));
            }
            run_erm(instance, ground_truth, params, config)?
        }
        Algo::Em => run_em(instance, ground_truth, params, config)?,
        Algo::Majority => {
            let mut values = majority_vote(instance, params.seed);
            clamp_labels(&mut values, ground_truth);
            let labels = GroundTruth::from_indices(instance, values.iter().copied().enumerate())?;
            let acc = counts_fit(instance, &labels, params.smoothing);
            let w = weights_from_accuracies(instance, &acc)?;
            FusionResult::new(instance, values, w, Algorithm::Majority, closed_form())
        }
        Algo::Counts => {
            let acc = counts_fit(instance, ground_truth, params.smoothing);
            let mut values = counts_infer(instance, &acc, params.seed);
            clamp_labels(&mut values, ground_truth);
            let w = weights_from_accuracies(instance, &acc)?;
            FusionResult::new(instance, values, w, Algorithm::Counts, closed_form())
        }
    };
    Ok(FuseOutput { result, decision })
}

fn closed_form() -> Diagnostics {
    Diagnostics {
        iterations: 0,
        objective: f64::NAN,
        converged: true,
    }
}
