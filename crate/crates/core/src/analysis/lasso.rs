use crate::error::{FusionError, Result};
use crate::instance::{FusionInstance, GroundTruth};
use crate::learning::{
    fit_loss, labeled_counts, FitMask, LearnAlgorithm, LearnConfig, ObjectLoss, Penalized,
    SmoothLoss, SourceBinomialLoss, Target,
};

/// Ratio between the smallest and largest penalty on a path.
pub const LASSO_RATIO: f64 = 1e-3;

/// Feature weights along a descending grid of lasso penalties.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoPath {
    pub feature_names: Vec<String>,
    /// Strictly decreasing; `grid[0]` is `λ_max`.
    pub grid: Vec<f64>,
    /// Display position in `[0, 1]`, 0 at `λ_max`, 1 at the smallest penalty.
    pub mu: Vec<f64>,
    /// Feature-weight vector per grid point.
    pub weights: Vec<Vec<f64>>,
}

impl LassoPath {
    /// Index of the first grid point at which each feature is nonzero.
    pub fn activation_index(&self, tol: f64) -> Vec<Option<usize>> {
        (0..self.feature_names.len())
            .map(|k| self.weights.iter().position(|w| w[k].abs() > tol))
            .collect()
    }
}

/// Regularization path of an ERM fit (object or observation loss, per
/// `config.algorithm`), warm-started from `λ_max` down to `λ_max · 10⁻³`.
pub fn lasso_path(
    instance: &FusionInstance,
    ground_truth: &GroundTruth,
    grid_size: usize,
    config: &LearnConfig,
) -> Result<LassoPath> {
    if instance.n_features() == 0 {
        return Err(FusionError::InvalidInput("lasso path needs at least one feature".into()));
    }
    if ground_truth.is_empty() {
        return Err(FusionError::InvalidInput("lasso path needs labeled objects".into()));
    }
    if grid_size == 0 {
        return Err(FusionError::InvalidInput("grid size must be at least 1".into()));
    }

    let targets: Vec<(usize, Target)> = ground_truth.iter().map(|(o, v)| (o, Target::Hard(v))).collect();
    let (successes, trials) = labeled_counts(instance, ground_truth);
    let object_loss = ObjectLoss { instance, targets: &targets };
    let observation_loss = SourceBinomialLoss { instance, successes, trials };
    let loss: &dyn SmoothLoss = match config.algorithm {
        LearnAlgorithm::ErmObservation => &observation_loss,
        _ => &object_loss,
    };

    // null solution: intercepts (and pairs) fitted, feature weights held at 0
    let frozen = FitMask { intercepts: true, features: false, pairs: true };
    let (null, _) = fit_loss(loss, &config.initial_weights(instance), config, frozen)?;
    let probe = Penalized {
        loss,
        template: &null,
        l1: 0.0,
        l2: config.l2_intercept_penalty,
        mask: FitMask::ALL,
    };
    let (_, grad) = probe.smooth_value_grad(&null.to_flat());
    let lambda_max = grad[probe.feature_range()].iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    if lambda_max <= 0.0 {
        return Err(FusionError::InvalidInput(
            "no feature has a nonzero gradient at the null solution".into(),
        ));
    }

    let grid: Vec<f64> = if grid_size == 1 {
        vec![lambda_max]
    } else {
        (0..grid_size)
            .map(|i| lambda_max * LASSO_RATIO.powf(i as f64 / (grid_size - 1) as f64))
            .collect()
    };
    let lambda_min = *grid.last().expect("non-empty grid");
    let span = (lambda_max / lambda_min).ln();
    let mu = grid
        .iter()
        .map(|l| if span > 0.0 { 1.0 - (l / lambda_min).ln() / span } else { 0.0 })
        .collect();

    let mut weights = vec![null.feature_weights.clone()];
    let mut current = null;
    for &lambda in &grid[1..] {
        let cfg = LearnConfig { l1_feature_penalty: lambda, ..config.clone() };
        let (next, _) = fit_loss(loss, &current, &cfg, FitMask::ALL)?;
        weights.push(next.feature_weights.clone());
        current = next;
    }

    Ok(LassoPath {
        feature_names: instance.feature_names().to_vec(),
        grid,
        mu,
        weights,
    })
}
