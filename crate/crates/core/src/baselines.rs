//! Majority vote and the Counts (naive Bayes) baseline.

use crate::instance::{FusionInstance, GroundTruth};
use crate::learning::labeled_counts;
use crate::model::seeded_argmax;

/// Most frequently reported value per object, seeded tie-break.
pub fn majority_vote(instance: &FusionInstance, seed: u64) -> Vec<usize> {
    (0..instance.n_objects())
        .map(|o| {
            let mut counts = vec![0.0; instance.domain(o).len()];
            for c in instance.claims(o) {
                counts[c.value] += 1.0;
            }
            seeded_argmax(&counts, seed, o)
        })
        .collect()
}

/// Smoothed fraction of labeled observations each source got right:
/// `(c_s + α) / (n_s + 2α)`, or 0.5 for sources with no labeled observations.
pub fn counts_fit(instance: &FusionInstance, ground_truth: &GroundTruth, smoothing: f64) -> Vec<f64> {
    let (correct, total) = labeled_counts(instance, ground_truth);
    correct
        .iter()
        .zip(&total)
        .map(|(&c, &n)| {
            if n == 0.0 {
                0.5
            } else {
                (c + smoothing) / (n + 2.0 * smoothing)
            }
        })
        .collect()
}

/// Naive Bayes inference: each source is right with probability `A_s`, and
/// otherwise reports one of the other `|D_o| − 1` values uniformly.
pub fn counts_infer(instance: &FusionInstance, accuracies: &[f64], seed: u64) -> Vec<usize> {
    (0..instance.n_objects())
        .map(|o| {
            let k = instance.domain(o).len();
            let spread = ((k - 1).max(1)) as f64;
            let scores: Vec<f64> = (0..k)
                .map(|d| {
                    instance
                        .claims(o)
                        .iter()
                        .map(|c| {
                            let a = accuracies[c.source];
                            if c.value == d {
                                a.ln()
                            } else {
                                ((1.0 - a) / spread).ln()
                            }
                        })
                        .sum()
                })
                .collect();
            seeded_argmax(&scores, seed, o)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_object(values: &[&str]) -> FusionInstance {
        let mut b = FusionInstance::builder(vec![]);
        for (s, v) in values.iter().enumerate() {
            b.add_observation("o", &format!("s{s}"), v).unwrap();
        }
        b.build().unwrap()
    }

    #[test]
    fn majority_picks_mode() {
        let inst = one_object(&["a", "b", "a"]);
        assert_eq!(majority_vote(&inst, 3), vec![0]);
    }

    #[test]
    fn majority_tie_is_reproducible() {
        let inst = one_object(&["a", "b"]);
        for seed in 0..10 {
            assert_eq!(majority_vote(&inst, seed), majority_vote(&inst, seed));
        }
    }

    #[test]
    fn unanimous_sources() {
        let mut b = FusionInstance::builder(vec![]);
        for o in 0..5 {
            for s in 0..3 {
                b.add_observation(&format!("o{o}"), &format!("s{s}"), &format!("v{o}")).unwrap();
            }
        }
        let inst = b.build().unwrap();
        assert_eq!(majority_vote(&inst, 9), vec![0; 5]);
    }

    #[test]
    fn counts_fit_fractions() {
        let mut b = FusionInstance::builder(vec![]);
        for o in 0..10 {
            let v = if o < 8 { "t" } else { "f" };
            b.add_observation(&format!("o{o}"), "s", v).unwrap();
            b.add_observation(&format!("o{o}"), "anchor", "t").unwrap();
        }
        b.add_observation("free", "idle", "x").unwrap();
        let inst = b.build().unwrap();
        let gt = GroundTruth::new(&inst, (0..10).map(|o| (o, "t"))).unwrap();
        let acc = counts_fit(&inst, &gt, 0.0);
        assert!((acc[0] - 0.8).abs() < 1e-15);
        assert_eq!(acc[1], 1.0);
        assert_eq!(acc[2], 0.5);
        let smoothed = counts_fit(&inst, &gt, 1.0);
        assert!((smoothed[1] - 11.0 / 12.0).abs() < 1e-15);
        assert_eq!(smoothed[2], 0.5);
    }

    #[test]
    fn counts_infer_weighs_log_odds() {
        // s0 (0.9) says a; s1, s2 (0.6) say b: ln 9 ≈ 2.197 > 2 ln 1.5 ≈ 0.811
        let inst = one_object(&["a", "b", "b"]);
        assert_eq!(counts_infer(&inst, &[0.9, 0.6, 0.6], 0), vec![0]);
        assert_eq!(counts_infer(&inst, &[0.6, 0.9, 0.9], 0), vec![1]);
    }

    #[test]
    fn counts_infer_symmetric_tie_matches_majority() {
        let inst = one_object(&["a", "b"]);
        for seed in 0..16 {
            assert_eq!(counts_infer(&inst, &[0.7, 0.7], seed), majority_vote(&inst, seed));
        }
    }
}
