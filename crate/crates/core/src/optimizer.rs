//! ERM-versus-EM selection from information units.
//!
//! Ground truth on an object observed by `m` sources is worth `m` units. The
//! E-step of EM is modeled as a majority vote over sources that share one
//! average accuracy `A`; an object whose vote is right with probability `p_e`
//! is worth `m · (1 − H(p_e))` units. `A` itself comes from the mean pairwise
//! agreement between sources.

use serde::Serialize;

use crate::error::{FusionError, Result};
use crate::instance::{FusionInstance, GroundTruth};
use crate::stats::{binary_entropy, binomial_cdf};

/// Threshold used when none is given.
pub const DEFAULT_TAU: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Choice {
    Erm,
    Em,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerDecision {
    pub choice: Choice,
    pub erm_bound: f64,
    pub estimated_avg_accuracy: f64,
    pub ground_truth_units: f64,
    pub em_units: f64,
    pub tau: f64,
}

/// Options for [`em_units_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitOptions {
    /// Multiply each object's `1 − H(p_e)` by its observer count `m`, putting
    /// EM units on the same scale as ground-truth units.
    pub scale_by_observers: bool,
}

impl Default for UnitOptions {
    fn default() -> Self {
        Self {
            scale_by_observers: true,
        }
    }
}

/// Agreement matrix: `X[i][j]` is the mean of `+1` (agree) / `−1` (disagree)
/// over objects both sources observe; zero on the diagonal and for pairs
/// without overlap.
pub fn agreement_matrix(instance: &FusionInstance) -> Vec<Vec<f64>> {
    agreement_with_overlap(instance).0
}

fn agreement_with_overlap(instance: &FusionInstance) -> (Vec<Vec<f64>>, Vec<Vec<u32>>) {
    let n = instance.n_sources();
    let mut sum = vec![vec![0.0; n]; n];
    let mut overlap = vec![vec![0u32; n]; n];
    for o in 0..instance.n_objects() {
        let claims = instance.claims(o);
        for (i, a) in claims.iter().enumerate() {
            for b in &claims[i + 1..] {
                let x = if a.value == b.value { 1.0 } else { -1.0 };
                sum[a.source][b.source] += x;
                sum[b.source][a.source] += x;
                overlap[a.source][b.source] += 1;
                overlap[b.source][a.source] += 1;
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if overlap[i][j] > 0 {
                sum[i][j] /= f64::from(overlap[i][j]);
            }
        }
    }
    (sum, overlap)
}

/// Average source accuracy from the least-squares fit of `X ≈ μ²` over
/// source pairs that share at least one object, with `A = (μ + 1) / 2`
/// clamped to `[0.5, 1]`.
pub fn estimate_avg_accuracy(instance: &FusionInstance) -> Result<f64> {
    let n = instance.n_sources();
    if n < 2 {
        return Err(FusionError::InvalidInput(
            "average accuracy needs at least two sources".into(),
        ));
    }
    let (x, overlap) = agreement_with_overlap(instance);
    let mut total = 0.0;
    let mut observed = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i != j && overlap[i][j] > 0 {
                total += x[i][j];
                observed += 1;
            }
        }
    }
    if observed == 0 {
        return Err(FusionError::InvalidInput(
            "no pair of sources observes a common object".into(),
        ));
    }
    let mu = (total.max(0.0) / observed as f64).sqrt();
    Ok(((mu + 1.0) / 2.0).clamp(0.5, 1.0))
}

/// Probability that a majority vote of `m` sources with accuracy `a` over
/// `domain_size` candidates is right: `1 − P(Bin(m, a) ≤ ⌊m / |D|⌋)`.
///
/// Unanimous objects (`domain_size == 1`) are scored as binary decisions.
pub fn majority_success_probability(m: usize, domain_size: usize, a: f64) -> f64 {
    let d = domain_size.max(2);
    let threshold = (m / d) as u64;
    1.0 - binomial_cdf(threshold, m as u64, a)
}

/// Units contributed by one object.
pub fn object_em_units(m: usize, domain_size: usize, a: f64, options: UnitOptions) -> f64 {
    let p_e = majority_success_probability(m, domain_size, a);
    if p_e < 0.5 {
        return 0.0;
    }
    let gain = 1.0 - binary_entropy(p_e);
    if options.scale_by_observers {
        m as f64 * gain
    } else {
        gain
    }
}

/// Estimated information units produced by the E-step of EM.
pub fn em_units(instance: &FusionInstance, a: f64) -> f64 {
    em_units_with(instance, a, UnitOptions::default())
}

pub fn em_units_with(instance: &FusionInstance, a: f64, options: UnitOptions) -> f64 {
    (0..instance.n_objects())
        .map(|o| object_em_units(instance.claims(o).len(), instance.domain(o).len(), a, options))
        .sum()
}

/// Units carried by ground truth: the observer count of each labeled object.
pub fn ground_truth_units(instance: &FusionInstance, ground_truth: &GroundTruth) -> f64 {
    ground_truth
        .iter()
        .map(|(o, _)| instance.claims(o).len() as f64)
        .sum()
}

/// Generalization-bound proxy `√(dim / |G|) · ln(max(|G|, 2))`; infinite
/// without labels.
pub fn erm_bound(model_dim: usize, n_labeled: usize) -> f64 {
    if n_labeled == 0 {
        return f64::INFINITY;
    }
    let g = n_labeled as f64;
    (model_dim as f64 / g).sqrt() * g.max(2.0).ln()
}

/// Number of learnable parameters the bound is charged for: one intercept
/// per source plus one weight per domain feature.
pub fn model_dimension(instance: &FusionInstance) -> usize {
    instance.n_sources() + instance.n_features()
}

/// Choose ERM when the bound is below `tau`; otherwise EM iff its estimated
/// units exceed those of the ground truth. No labels forces EM.
pub fn decide(
    instance: &FusionInstance,
    ground_truth: &GroundTruth,
    tau: f64,
    model_dim: usize,
) -> OptimizerDecision {
    let bound = erm_bound(model_dim, ground_truth.len());
    // without a usable agreement signal assume coin-flip sources
    let a = estimate_avg_accuracy(instance).unwrap_or(0.5);
    let em = em_units(instance, a);
    let gt = ground_truth_units(instance, ground_truth);
    let choice = if ground_truth.is_empty() {
        Choice::Em
    } else if bound <= tau {
        Choice::Erm
    } else if em > gt {
        Choice::Em
    } else {
        Choice::Erm
    };
    OptimizerDecision {
        choice,
        erm_bound: bound,
        estimated_avg_accuracy: a,
        ground_truth_units: gt,
        em_units: em,
        tau,
    }
}
