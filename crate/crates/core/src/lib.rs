//! Data fusion with learned source accuracies.
//!
//! Sources report values for objects; every object has one true value. Each
//! source's accuracy is modeled as a logistic function of a per-source
//! intercept and optional domain features, the posterior over an object's
//! candidate values follows in closed form, and weights are learned either
//! from labeled objects (ERM) or by EM. [`optimizer::decide`] picks between the
//! two from the amount of ground truth and the estimated agreement between
//! sources.

pub mod analysis;
pub mod baselines;
pub mod error;
pub mod evaluation;
pub mod instance;
pub mod io;
pub mod learning;
pub mod model;
pub mod optimizer;
pub mod simulation;
pub mod stats;

pub use error::{FusionError, Result};
pub use instance::{Claim, FusionInstance, GroundTruth, InstanceBuilder};
pub use learning::{EmFit, LearnAlgorithm, LearnConfig, Target};
pub use model::{
    map_values, posterior, source_accuracy, trust_score, Algorithm, Diagnostics, FusionResult,
    PosteriorTable, SourcePair, WeightVector,
};
pub use optimizer::{Choice, OptimizerDecision};
