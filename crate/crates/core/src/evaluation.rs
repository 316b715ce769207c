//! Metrics and the random train/test split protocol.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{FusionError, Result};
use crate::instance::{FusionInstance, GroundTruth};

/// Training fractions swept by default.
pub const TRAIN_FRACTIONS: [f64; 5] = [0.001, 0.01, 0.05, 0.1, 0.2];

/// Replications per configuration.
pub const DEFAULT_REPS: usize = 5;

/// Fraction of `test` objects whose predicted value index equals the label.
pub fn object_accuracy(predicted: &[usize], truth: &GroundTruth, test: &[usize]) -> Result<f64> {
    if test.is_empty() {
        return Err(FusionError::InvalidInput("empty test set".into()));
    }
    let mut hits = 0usize;
    for &o in test {
        let v = truth
            .get(o)
            .ok_or_else(|| FusionError::InvalidInput(format!("test object #{o} has no label")))?;
        if predicted[o] == v {
            hits += 1;
        }
    }
    Ok(hits as f64 / test.len() as f64)
}

/// Per-source fraction of labeled observations that are correct, with the
/// number of labeled observations; `None` for sources with none.
pub fn empirical_accuracies(instance: &FusionInstance, truth: &GroundTruth) -> Vec<Option<(f64, usize)>> {
    (0..instance.n_sources())
        .map(|s| {
            let mut n = 0usize;
            let mut c = 0usize;
            for &(o, v) in instance.source_claims(s) {
                if let Some(t) = truth.get(o) {
                    n += 1;
                    c += usize::from(t == v);
                }
            }
            (n > 0).then(|| (c as f64 / n as f64, n))
        })
        .collect()
}

/// Observation-weighted mean absolute error of estimated accuracies against
/// each source's empirical accuracy under `full_truth`.
pub fn weighted_accuracy_error(estimated: &[f64], instance: &FusionInstance, full_truth: &GroundTruth) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (s, entry) in empirical_accuracies(instance, full_truth).into_iter().enumerate() {
        if let Some((target, n)) = entry {
            num += n as f64 * (estimated[s] - target).abs();
            den += n as f64;
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Seeded split of `objects`; the training side gets `⌈fraction · n⌉`
/// objects, at least one.
pub fn make_split(objects: &[usize], train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(FusionError::InvalidInput(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let mut shuffled = objects.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // guard against products like 0.05 · 1000 = 50.000000000000007
    let n_train = ((train_fraction * objects.len() as f64 - 1e-9).ceil() as usize)
        .max(1)
        .min(objects.len());
    let test = shuffled.split_off(n_train);
    let mut train = shuffled;
    train.sort_unstable();
    let mut test = test;
    test.sort_unstable();
    Ok((train, test))
}

/// Seed of replication `rep` derived from a base seed.
pub fn replicate_seed(base: u64, rep: usize) -> u64 {
    crate::model::mix(base, rep as u64 + 1)
}

/// One row of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub config: String,
    pub seed: u64,
    pub algorithm: String,
    pub object_accuracy: f64,
    pub weighted_accuracy_error: f64,
    /// Wall time, only recorded on request so reports stay reproducible.
    pub runtime_ms: Option<f64>,
}
