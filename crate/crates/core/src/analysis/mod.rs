//! Feature importance, cold-start prediction, copying detection and the
//! unsupervised pairwise accuracy estimator.

mod cold_start;
mod copying;
mod lasso;
mod pairwise;

pub use cold_start::predict_new_source_accuracy;
pub use copying::{add_copying_features, DEFAULT_MIN_OVERLAP};
pub use lasso::{lasso_path, LassoPath, LASSO_RATIO};
pub use pairwise::{
    estimate_from_pairs, pairwise_unsupervised_estimate, reduce_to_pairs, PairEstimate,
};
