//! The logistic source-accuracy model and exact per-object posteriors.
//!
//! A source's trust score is the log-odds of its accuracy,
//! `σ_s = w_s + Σ_k w_k f_{s,k}`. The score of a candidate value `d` for an
//! object is the sum of trust scores of the sources reporting `d`, plus any
//! copying-pair terms; the posterior is the softmax of candidate scores over
//! the object's domain. Because the model factorizes per object given the
//! weights, posteriors are computed in closed form.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};
use crate::instance::FusionInstance;
use crate::stats::{log_sum_exp, logistic};

/// Scores within this absolute distance of the maximum count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Unordered source pair, stored with `0 < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourcePair(pub usize, pub usize);

impl SourcePair {
    pub fn new(a: usize, b: usize) -> Self {
        if a <= b {
            SourcePair(a, b)
        } else {
            SourcePair(b, a)
        }
    }
}

/// Model parameters: per-source intercepts, per-feature weights and optional
/// copying-pair weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub source_intercepts: Vec<f64>,
    pub feature_weights: Vec<f64>,
    pub pair_weights: BTreeMap<SourcePair, f64>,
}

impl WeightVector {
    pub fn zeros(n_sources: usize, n_features: usize) -> Self {
        Self {
            source_intercepts: vec![0.0; n_sources],
            feature_weights: vec![0.0; n_features],
            pair_weights: BTreeMap::new(),
        }
    }

    pub fn for_instance(instance: &FusionInstance) -> Self {
        Self::zeros(instance.n_sources(), instance.n_features())
    }

    /// Register copying pairs with zero weight (existing weights are kept).
    pub fn with_pairs(mut self, pairs: impl IntoIterator<Item = SourcePair>) -> Self {
        for p in pairs {
            self.pair_weights.entry(p).or_insert(0.0);
        }
        self
    }

    pub fn n_params(&self) -> usize {
        self.source_intercepts.len() + self.feature_weights.len() + self.pair_weights.len()
    }

    /// Flatten as `[intercepts | feature weights | pair weights]`, pairs in key order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend_from_slice(&self.source_intercepts);
        out.extend_from_slice(&self.feature_weights);
        out.extend(self.pair_weights.values().copied());
        out
    }

    /// Inverse of [`to_flat`](Self::to_flat), reusing this vector's layout.
    pub fn from_flat(&self, flat: &[f64]) -> Self {
        let s = self.source_intercepts.len();
        let k = self.feature_weights.len();
        debug_assert_eq!(flat.len(), self.n_params());
        Self {
            source_intercepts: flat[..s].to_vec(),
            feature_weights: flat[s..s + k].to_vec(),
            pair_weights: self
                .pair_weights
                .keys()
                .zip(&flat[s + k..])
                .map(|(&p, &w)| (p, w))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|x| x.is_finite())
    }

    /// `σ_s` for every source.
    pub fn trust_scores(&self, instance: &FusionInstance) -> Vec<f64> {
        (0..instance.n_sources())
            .map(|s| self.trust_score_of(instance.feature_row(s), s))
            .collect()
    }

    fn trust_score_of(&self, row: &[f64], s: usize) -> f64 {
        self.source_intercepts[s]
            + row
                .iter()
                .zip(&self.feature_weights)
                .map(|(f, w)| f * w)
                .sum::<f64>()
    }

    /// `A_s` for every source.
    pub fn accuracies(&self, instance: &FusionInstance) -> Vec<f64> {
        self.trust_scores(instance).into_iter().map(logistic).collect()
    }
}

/// Estimated accuracy of source `s`: `logistic(w_s + Σ_k w_k f_{s,k})`.
pub fn source_accuracy(w: &WeightVector, s: usize, features: &[Vec<f64>]) -> f64 {
    logistic(w.trust_score_of(&features[s], s))
}

/// Log-odds of an accuracy.
pub fn trust_score(accuracy: f64) -> Result<f64> {
    if !(accuracy > 0.0 && accuracy < 1.0) {
        return Err(FusionError::Domain(format!(
            "accuracy {accuracy} is outside (0, 1)"
        )));
    }
    Ok((accuracy / (1.0 - accuracy)).ln())
}

/// A copying pair that fires on an object: both sources agree on `value`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairHit {
    pub slot: usize,
    pub value: usize,
}

/// Weights bound to an instance, with trust scores precomputed.
pub struct ScoreModel<'a> {
    instance: &'a FusionInstance,
    weights: &'a WeightVector,
    trust: Vec<f64>,
    pair_slots: BTreeMap<SourcePair, usize>,
}

impl<'a> ScoreModel<'a> {
    pub fn new(instance: &'a FusionInstance, weights: &'a WeightVector) -> Self {
        let pair_slots = weights
            .pair_weights
            .keys()
            .enumerate()
            .map(|(i, &p)| (p, i))
            .collect();
        Self {
            instance,
            weights,
            trust: weights.trust_scores(instance),
            pair_slots,
        }
    }

    pub fn trust(&self) -> &[f64] {
        &self.trust
    }

    /// Copying pairs registered in the weights whose sources agree on `object`.
    pub(crate) fn pair_hits(&self, object: usize) -> Vec<PairHit> {
        if self.pair_slots.is_empty() {
            return Vec::new();
        }
        let claims = self.instance.claims(object);
        let mut hits = Vec::new();
        for (i, a) in claims.iter().enumerate() {
            for b in &claims[i + 1..] {
                if a.value != b.value {
                    continue;
                }
                if let Some(&slot) = self.pair_slots.get(&SourcePair::new(a.source, b.source)) {
                    hits.push(PairHit {
                        slot,
                        value: a.value,
                    });
                }
            }
        }
        hits
    }

    /// Unnormalized log-score of every candidate in the object's domain.
    pub fn scores(&self, object: usize) -> Vec<f64> {
        let mut scores = vec![0.0; self.instance.domain(object).len()];
        for c in self.instance.claims(object) {
            scores[c.value] += self.trust[c.source];
        }
        let hits = self.pair_hits(object);
        if !hits.is_empty() {
            let pair_w: Vec<f64> = self.weights.pair_weights.values().copied().collect();
            for h in hits {
                for (d, sc) in scores.iter_mut().enumerate() {
                    if d != h.value {
                        *sc += pair_w[h.slot];
                    }
                }
            }
        }
        scores
    }

    pub fn posterior(&self, object: usize) -> Vec<f64> {
        softmax(&self.scores(object))
    }
}

/// Normalized `exp(scores)` with max subtraction.
pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(scores);
    scores.iter().map(|s| (s - lse).exp()).collect()
}

/// Posterior over the domain of `object`.
pub fn posterior(instance: &FusionInstance, w: &WeightVector, object: usize) -> Vec<f64> {
    ScoreModel::new(instance, w).posterior(object)
}

/// Per-object probability vectors aligned with each object's domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTable {
    rows: Vec<Vec<f64>>,
}

impl PosteriorTable {
    pub fn compute(instance: &FusionInstance, w: &WeightVector) -> Self {
        let model = ScoreModel::new(instance, w);
        Self {
            rows: (0..instance.n_objects()).map(|o| model.posterior(o)).collect(),
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
    }

    pub fn row(&self, object: usize) -> &[f64] {
        &self.rows[object]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Index of the maximum score; ties (within [`TIE_TOLERANCE`]) are broken
/// uniformly at random by a generator keyed on `(seed, object)`, so the
/// outcome does not depend on evaluation order.
pub fn seeded_argmax(scores: &[f64], seed: u64, object: usize) -> usize {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| (max - s).abs() <= TIE_TOLERANCE)
        .map(|(i, _)| i)
        .collect();
    match tied.len() {
        0 => 0,
        1 => tied[0],
        n => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, object as u64));
            tied[rng.gen_range(0..n)]
        }
    }
}

/// splitmix64 finalizer over `seed ^ key`.
pub(crate) fn mix(seed: u64, key: u64) -> u64 {
    let mut z = seed ^ key.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// MAP value index for every object.
pub fn map_values(instance: &FusionInstance, w: &WeightVector, seed: u64) -> Vec<usize> {
    let model = ScoreModel::new(instance, w);
    (0..instance.n_objects())
        .map(|o| seeded_argmax(&model.scores(o), seed, o))
        .collect()
}

/// Which procedure produced a [`FusionResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Algorithm {
    Erm,
    Em,
    Majority,
    Counts,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Erm => "ERM",
            Algorithm::Em => "EM",
            Algorithm::Majority => "MAJORITY",
            Algorithm::Counts => "COUNTS",
        })
    }
}

/// Optimization bookkeeping.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
}

/// Estimated values and accuracies for a fused instance.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionResult {
    /// Value index per object.
    pub values: Vec<usize>,
    pub accuracies: Vec<f64>,
    pub weights: WeightVector,
    pub algorithm: Algorithm,
    pub diagnostics: Diagnostics,
}

impl FusionResult {
    /// Assemble a result; accuracies are always recomputed from the weights.
    pub fn new(
        instance: &FusionInstance,
        values: Vec<usize>,
        weights: WeightVector,
        algorithm: Algorithm,
        diagnostics: Diagnostics,
    ) -> Self {
        Self {
            accuracies: weights.accuracies(instance),
            values,
            weights,
            algorithm,
            diagnostics,
        }
    }

    pub fn value_name<'a>(&self, instance: &'a FusionInstance, object: usize) -> &'a str {
        &instance.domain(object)[self.values[object]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn votes(values: &[&str]) -> FusionInstance {
        let mut b = FusionInstance::builder(vec![]);
        for (s, v) in values.iter().enumerate() {
            b.add_observation("o", &format!("s{s}"), v).unwrap();
        }
        b.build().unwrap()
    }

    #[test]
    fn accuracy_of_zero_weights_is_half() {
        let w = WeightVector::zeros(1, 1);
        assert_eq!(source_accuracy(&w, 0, &[vec![3.0]]), 0.5);
    }

    #[test]
    fn accuracy_from_log_odds() {
        let mut w = WeightVector::zeros(1, 0);
        w.source_intercepts[0] = (7.0f64 / 3.0).ln();
        assert!((source_accuracy(&w, 0, &[vec![]]) - 0.7).abs() < 1e-15);
        let mut w = WeightVector::zeros(1, 1);
        w.feature_weights[0] = -(7.0f64 / 3.0).ln();
        assert!((source_accuracy(&w, 0, &[vec![1.0]]) - 0.3).abs() < 1e-15);
        w.feature_weights[0] = -0.8473;
        assert!((source_accuracy(&w, 0, &[vec![1.0]]) - 0.3).abs() < 1e-5);
    }

    #[test]
    fn trust_score_values() {
        assert_eq!(trust_score(0.5).unwrap(), 0.0);
        // ln(7/3) evaluated at 30 digits
        assert!((trust_score(0.7).unwrap() - 0.847_297_860_387_203_6).abs() < 1e-15);
        assert!((trust_score(0.3).unwrap() + 0.847_297_860_387_203_6).abs() < 1e-15);
        assert!(trust_score(0.0).is_err());
        assert!(trust_score(1.0).is_err());
        assert!(trust_score(f64::NAN).is_err());
    }

    #[test]
    fn posterior_singleton_domain() {
        let inst = votes(&["a"]);
        assert_eq!(posterior(&inst, &WeightVector::zeros(1, 0), 0), vec![1.0]);
    }

    #[test]
    fn posterior_two_to_one() {
        let inst = votes(&["a", "a", "b"]);
        let mut w = WeightVector::zeros(3, 0);
        w.source_intercepts = vec![1.0; 3];
        let p = posterior(&inst, &w, 0);
        // e^2 / (e^2 + e^1)
        assert!((p[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn posterior_symmetric_split() {
        let inst = votes(&["a", "b"]);
        assert_eq!(posterior(&inst, &WeightVector::zeros(2, 0), 0), vec![0.5, 0.5]);
    }

    #[test]
    fn posterior_survives_huge_scores() {
        let inst = votes(&["a", "b"]);
        let mut w = WeightVector::zeros(2, 0);
        w.source_intercepts = vec![700.0, 699.0];
        let p = posterior(&inst, &w, 0);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p[0] - logistic(1.0)).abs() < 1e-12);
    }

    #[test]
    fn map_strict_argmax_and_seeded_ties() {
        let inst = votes(&["a", "a", "b"]);
        let mut w = WeightVector::zeros(3, 0);
        w.source_intercepts = vec![1.0; 3];
        assert_eq!(map_values(&inst, &w, 1), vec![0]);

        let tie = votes(&["a", "b"]);
        let w = WeightVector::zeros(2, 0);
        for seed in 0..20 {
            let first = map_values(&tie, &w, seed);
            assert_eq!(first, map_values(&tie, &w, seed));
        }
        let picks: std::collections::HashSet<usize> =
            (0..64).map(|seed| map_values(&tie, &w, seed)[0]).collect();
        assert_eq!(picks.len(), 2, "both tied values should be reachable");
    }

    #[test]
    fn flat_round_trip_keeps_layout() {
        let w = WeightVector::zeros(2, 1).with_pairs([SourcePair::new(1, 0)]);
        let flat = vec![1.0, 2.0, 3.0, 4.0];
        let back = w.from_flat(&flat);
        assert_eq!(back.to_flat(), flat);
        assert_eq!(back.pair_weights[&SourcePair(0, 1)], 4.0);
    }
}
