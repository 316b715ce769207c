use crate::model::WeightVector;
use crate::stats::logistic;

/// Accuracy of a source the model has never seen, from its features alone
/// (its intercept is taken as zero).
pub fn predict_new_source_accuracy(weights: &WeightVector, feature_row: &[f64]) -> f64 {
    let z: f64 = weights
        .feature_weights
        .iter()
        .zip(feature_row)
        .map(|(w, f)| w * f)
        .sum();
    logistic(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::source_accuracy;
    use crate::stats::logistic;

    #[test]
    fn zero_row_is_half() {
        let mut w = WeightVector::zeros(1, 3);
        w.feature_weights = vec![1.0, -2.0, 0.5];
        assert_eq!(predict_new_source_accuracy(&w, &[0.0, 0.0, 0.0]), 0.5);
    }

    #[test]
    fn differs_from_known_source_by_intercept() {
        let mut w = WeightVector::zeros(1, 2);
        w.feature_weights = vec![0.7, -0.2];
        w.source_intercepts = vec![0.9];
        let row = vec![1.0, 2.0];
        let full = source_accuracy(&w, 0, std::slice::from_ref(&row));
        let cold = predict_new_source_accuracy(&w, &row);
        let logit = |p: f64| (p / (1.0 - p)).ln();
        assert!((logit(full) - logit(cold) - 0.9).abs() < 1e-12);
        assert!((cold - logistic(0.3)).abs() < 1e-15);
    }

    #[test]
    fn monotone_in_positive_weight() {
        let mut w = WeightVector::zeros(0, 2);
        w.feature_weights = vec![0.8, -0.3];
        let mut last = 0.0;
        for x in [-2.0, -1.0, 0.0, 0.5, 3.0] {
            let p = predict_new_source_accuracy(&w, &[x, 1.0]);
            assert!(p > last);
            last = p;
        }
    }
}
