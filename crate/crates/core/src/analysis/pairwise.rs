//! Unsupervised accuracy estimation from pairs of observations.
//!
//! Every object keeps exactly two observers, one of which is designated its
//! primary. The agreement rate over all objects estimates
//! `A_E = Σ_s (2A_s − 1)`; each object then yields an unbiased pseudo-count
//! of its primary being right, and a feature-only logistic model is fitted to
//! the per-source pseudo-counts.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FusionError, Result};
use crate::instance::FusionInstance;
use crate::learning::{fit_loss, FitMask, LearnConfig, SourceBinomialLoss};
use crate::model::mix;
use crate::stats::logistic;

#[derive(Debug, Clone, PartialEq)]
pub struct PairEstimate {
    /// Estimate of `Σ_s (2A_s − 1)`.
    pub a_e_hat: f64,
    /// Clamped pseudo-counts `a_s`.
    pub pseudo_counts: Vec<f64>,
    /// Number of objects whose primary is `s`.
    pub primary_counts: Vec<usize>,
    pub feature_weights: Vec<f64>,
    pub accuracies: Vec<f64>,
}

/// Drop objects with fewer than two observations and keep two random
/// observers of the rest.
pub fn reduce_to_pairs(instance: &FusionInstance, seed: u64) -> Result<FusionInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep: Vec<Vec<usize>> = (0..instance.n_objects())
        .map(|o| {
            let claims = instance.claims(o);
            if claims.len() < 2 {
                Vec::new()
            } else {
                sample(&mut rng, claims.len(), 2)
                    .into_iter()
                    .map(|i| claims[i].source)
                    .collect()
            }
        })
        .collect();
    instance.filter_claims(|o, c| keep[o].contains(&c.source))
}

/// Run the estimator after reducing `instance` to pairs with `config.seed`.
pub fn pairwise_unsupervised_estimate(
    instance: &FusionInstance,
    delta: f64,
    config: &LearnConfig,
) -> Result<PairEstimate> {
    let reduced = reduce_to_pairs(instance, config.seed)?;
    estimate_from_pairs(&reduced, delta, config, mix(config.seed, 0x5052_494d))
}

/// Run the estimator on an instance where every object has exactly two
/// observations; `designation_seed` picks each object's primary.
///
/// Estimates are clamped to `[0.5 + δ/2, 1 − δ/2]`, the accuracy band the
/// estimator assumes.
pub fn estimate_from_pairs(
    instance: &FusionInstance,
    delta: f64,
    config: &LearnConfig,
    designation_seed: u64,
) -> Result<PairEstimate> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(FusionError::InvalidInput(format!("delta {delta} outside (0, 0.5]")));
    }
    let n_s = instance.n_sources();
    if n_s < 3 {
        return Err(FusionError::InvalidInput("pairwise estimation needs at least three sources".into()));
    }
    if instance.n_features() == 0 {
        return Err(FusionError::InvalidInput("pairwise estimation fits feature weights; none given".into()));
    }
    if let Some(o) = (0..instance.n_objects()).find(|&o| instance.claims(o).len() != 2) {
        return Err(FusionError::InvalidInput(format!(
            "object `{}` does not have exactly two observations",
            instance.objects()[o]
        )));
    }
    let n_o = instance.n_objects();
    if n_o == 0 {
        return Err(FusionError::InvalidInput("no objects left after pair reduction".into()));
    }
    let s = n_s as f64;

    let agree: Vec<bool> = (0..n_o)
        .map(|o| instance.claims(o)[0].value == instance.claims(o)[1].value)
        .collect();
    let signed: f64 = agree.iter().map(|&a| if a { 1.0 } else { -1.0 }).sum();
    let a_e_hat = (s * (s - 1.0) / n_o as f64 * signed).max(0.0).sqrt();
    if a_e_hat == 0.0 {
        return Err(FusionError::ChanceAgreement);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(designation_seed);
    let mut pseudo = vec![0.0; n_s];
    let mut primary = vec![0usize; n_s];
    for (o, &ag) in agree.iter().enumerate() {
        let src = instance.claims(o)[usize::from(rng.gen::<bool>())].source;
        let a_o = (2.0 * s * f64::from(u8::from(ag)) - (s - a_e_hat)) / (2.0 * a_e_hat);
        pseudo[src] += a_o;
        primary[src] += 1;
    }
    for (a, &n) in pseudo.iter_mut().zip(&primary) {
        *a = a.clamp(0.0, n as f64);
    }

    let loss = SourceBinomialLoss {
        instance,
        successes: pseudo.clone(),
        trials: primary.iter().map(|&n| n as f64).collect(),
    };
    let mask = FitMask { intercepts: false, features: true, pairs: false };
    let init = crate::model::WeightVector::for_instance(instance);
    let (w, _) = fit_loss(&loss, &init, config, mask)?;
    let (lo, hi) = (0.5 + delta / 2.0, 1.0 - delta / 2.0);
    let accuracies = (0..n_s)
        .map(|src| {
            let z: f64 = instance.feature_row(src).iter().zip(&w.feature_weights).map(|(f, w)| f * w).sum();
            logistic(z).clamp(lo, hi)
        })
        .collect();

    Ok(PairEstimate {
        a_e_hat,
        pseudo_counts: pseudo,
        primary_counts: primary,
        feature_weights: w.feature_weights,
        accuracies,
    })
}
