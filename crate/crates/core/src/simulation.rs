//! Seeded synthetic fusion instances.
//!
//! True values are uniform over a fixed per-object domain `v0..v{D-1}`. Each
//! source observes each object independently with probability `density` (or
//! exactly two random sources observe every object in pair-sampling mode),
//! reports the truth with its accuracy and otherwise a uniformly chosen wrong
//! value. Objects that end up unobserved are re-rolled.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FusionError, Result};
use crate::instance::{FusionInstance, GroundTruth};
use crate::stats::logistic;

#[derive(Debug, Clone, PartialEq)]
pub enum Sampling {
    /// Each (source, object) pair is observed with this probability.
    Density(f64),
    /// Exactly two distinct random sources observe every object.
    Pairs,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AccuracyModel {
    /// `A_s ~ U[mean − spread, mean + spread]`.
    Uniform { mean: f64, spread: f64 },
    /// Boolean features with the given density and
    /// `A_s = logistic(true_weights · f_s)`; features beyond
    /// `true_weights.len()` have weight zero. With `constant_feature`, column 0
    /// is always 1 and acts as a bias.
    FeatureLogistic {
        true_weights: Vec<f64>,
        n_features: usize,
        feature_density: f64,
        constant_feature: bool,
    },
    /// Explicit per-source accuracies.
    Fixed(Vec<f64>),
}

/// `copier` repeats `original`'s report whenever both observe an object,
/// except with probability `noise`, when it reports on its own.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloneSpec {
    pub copier: usize,
    pub original: usize,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_sources: usize,
    pub n_objects: usize,
    pub sampling: Sampling,
    pub domain_size: usize,
    pub accuracy: AccuracyModel,
    pub clones: Vec<CloneSpec>,
    pub seed: u64,
}

impl SimConfig {
    pub fn uniform(n_sources: usize, n_objects: usize, density: f64, mean: f64, spread: f64, seed: u64) -> Self {
        Self {
            n_sources,
            n_objects,
            sampling: Sampling::Density(density),
            domain_size: 2,
            accuracy: AccuracyModel::Uniform { mean, spread },
            clones: Vec::new(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FusionError::InvalidInput(m));
        if self.n_sources == 0 || self.n_objects == 0 {
            return bad("need at least one source and one object".into());
        }
        if self.domain_size < 2 {
            return bad(format!("domain size {} < 2", self.domain_size));
        }
        match self.sampling {
            Sampling::Density(p) if !(p > 0.0 && p <= 1.0) => {
                return bad(format!("density {p} outside (0, 1]"));
            }
            Sampling::Pairs if self.n_sources < 2 => {
                return bad("pair sampling needs at least two sources".into());
            }
            _ => {}
        }
        match &self.accuracy {
            AccuracyModel::Uniform { mean, spread } => {
                if !(*spread >= 0.0 && mean - spread >= 0.0 && mean + spread <= 1.0) {
                    return bad(format!("uniform accuracy {mean} ± {spread} leaves [0, 1]"));
                }
            }
            AccuracyModel::FeatureLogistic {
                true_weights,
                n_features,
                feature_density,
                ..
            } => {
                if true_weights.len() > *n_features {
                    return bad("more true weights than features".into());
                }
                if !(0.0..=1.0).contains(feature_density) {
                    return bad(format!("feature density {feature_density} outside [0, 1]"));
                }
                if true_weights.iter().any(|w| !w.is_finite()) {
                    return bad("non-finite true weight".into());
                }
            }
            AccuracyModel::Fixed(acc) => {
                if acc.len() != self.n_sources || acc.iter().any(|a| !(0.0..=1.0).contains(a)) {
                    return bad("fixed accuracies must be one per source within [0, 1]".into());
                }
            }
        }
        for c in &self.clones {
            if c.copier >= self.n_sources || c.original >= self.n_sources || c.copier == c.original {
                return bad(format!("bad clone spec {c:?}"));
            }
            if !(0.0..=1.0).contains(&c.noise) {
                return bad(format!("clone noise {} outside [0, 1]", c.noise));
            }
        }
        Ok(())
    }
}

/// A generated instance with everything the generator knows.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub instance: FusionInstance,
    /// Labels for every object whose true value some source reported.
    pub truth: GroundTruth,
    /// True value of every object, reported or not.
    pub true_values: Vec<String>,
    pub true_accuracies: Vec<f64>,
    pub true_weights: Option<Vec<f64>>,
}

pub fn source_name(s: usize) -> String {
    format!("s{s:05}")
}

pub fn object_name(o: usize) -> String {
    format!("o{o:06}")
}

fn value_name(v: usize) -> String {
    format!("v{v}")
}

/// Generate an instance; fully determined by `config.seed`.
pub fn generate(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_s = config.n_sources;

    let (feature_names, features, accuracies, true_weights) = match &config.accuracy {
        AccuracyModel::Uniform { mean, spread } => {
            let acc = (0..n_s)
                .map(|_| mean - spread + 2.0 * spread * rng.gen::<f64>())
                .collect();
            (Vec::new(), vec![Vec::new(); n_s], acc, None)
        }
        AccuracyModel::FeatureLogistic {
            true_weights,
            n_features,
            feature_density,
            constant_feature,
        } => {
            let names: Vec<String> = (0..*n_features)
                .map(|k| if k == 0 && *constant_feature { "bias".to_string() } else { format!("f{k}") })
                .collect();
            let mut weights = true_weights.clone();
            weights.resize(*n_features, 0.0);
            let rows: Vec<Vec<f64>> = (0..n_s)
                .map(|_| {
                    (0..*n_features)
                        .map(|k| {
                            let on = (k == 0 && *constant_feature) || rng.gen::<f64>() < *feature_density;
                            f64::from(u8::from(on))
                        })
                        .collect()
                })
                .collect();
            let acc = rows
                .iter()
                .map(|row| logistic(row.iter().zip(&weights).map(|(f, w)| f * w).sum()))
                .collect();
            (names, rows, acc, Some(weights))
        }
        AccuracyModel::Fixed(acc) => (Vec::new(), vec![Vec::new(); n_s], acc.clone(), None),
    };

    let mut builder = FusionInstance::builder(feature_names);
    for (s, row) in features.into_iter().enumerate() {
        builder.add_source(&source_name(s), row)?;
    }

    let d = config.domain_size;
    let mut truth = Vec::with_capacity(config.n_objects);
    for o in 0..config.n_objects {
        let true_value = rng.gen_range(0..d);
        truth.push(true_value);
        let observers: Vec<usize> = match config.sampling {
            Sampling::Density(p) => loop {
                let picked: Vec<usize> = (0..n_s).filter(|_| rng.gen::<f64>() < p).collect();
                if !picked.is_empty() {
                    break picked;
                }
            },
            Sampling::Pairs => {
                let mut pair = sample(&mut rng, n_s, 2).into_vec();
                pair.sort_unstable();
                pair
            }
        };
        let mut reports: Vec<Option<usize>> = vec![None; n_s];
        for &s in &observers {
            reports[s] = Some(report(&mut rng, accuracies[s], true_value, d));
        }
        for c in &config.clones {
            if let (Some(_), Some(orig)) = (reports[c.copier], reports[c.original]) {
                if rng.gen::<f64>() >= c.noise {
                    reports[c.copier] = Some(orig);
                }
            }
        }
        let name = object_name(o);
        for &s in &observers {
            let v = reports[s].expect("observer has a report");
            builder.add_observation(&name, &source_name(s), &value_name(v))?;
        }
    }

    let instance = builder.build()?;
    let labels: Vec<(usize, String)> = truth
        .iter()
        .enumerate()
        .map(|(o, &v)| (o, value_name(v)))
        .collect();
    let observed: Vec<(usize, &str)> = labels
        .iter()
        .filter(|(o, v)| instance.value_index(*o, v).is_some())
        .map(|(o, v)| (*o, v.as_str()))
        .collect();
    // objects where nobody reported the truth stay unlabeled (closed world)
    let truth = GroundTruth::new(&instance, observed)?;
    Ok(SimOutput {
        instance,
        truth,
        true_values: labels.into_iter().map(|(_, v)| v).collect(),
        true_accuracies: accuracies,
        true_weights,
    })
}

fn report(rng: &mut ChaCha8Rng, accuracy: f64, truth: usize, domain: usize) -> usize {
    if rng.gen::<f64>() < accuracy {
        truth
    } else {
        let wrong = rng.gen_range(0..domain - 1);
        if wrong >= truth {
            wrong + 1
        } else {
            wrong
        }
    }
}

impl SimOutput {
    /// Fraction of `test` objects whose predicted value is the true one.
    /// Objects whose truth nobody reported count as misses.
    pub fn object_accuracy(&self, predicted: &[usize], test: &[usize]) -> Result<f64> {
        if test.is_empty() {
            return Err(FusionError::InvalidInput("empty test set".into()));
        }
        let hits = test
            .iter()
            .filter(|&&o| self.instance.domain(o)[predicted[o]] == self.true_values[o])
            .count();
        Ok(hits as f64 / test.len() as f64)
    }

    /// Fraction of each source's observations that match the generator's truth.
    pub fn empirical_accuracies(&self) -> Vec<f64> {
        let inst = &self.instance;
        (0..inst.n_sources())
            .map(|s| {
                let claims = inst.source_claims(s);
                let hits = claims
                    .iter()
                    .filter(|(o, v)| self.truth.get(*o) == Some(*v))
                    .count();
                if claims.is_empty() {
                    f64::NAN
                } else {
                    hits as f64 / claims.len() as f64
                }
            })
            .collect()
    }
}
