//! Command-line front end for `veritas-core`.

pub mod fusion;
pub mod json;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;
use veritas_core::analysis::{lasso_path, pairwise_unsupervised_estimate, predict_new_source_accuracy};
use veritas_core::evaluation::{
    make_split, object_accuracy, replicate_seed, weighted_accuracy_error, ReportRow, DEFAULT_REPS,
};
use veritas_core::io::{load_features, load_instance, write_simulation, InputPaths};
use veritas_core::optimizer::{decide, model_dimension, DEFAULT_TAU};
use veritas_core::simulation::{generate, AccuracyModel, SimConfig, Sampling};
use veritas_core::{FusionInstance, FusionResult, GroundTruth, LearnAlgorithm, LearnConfig, WeightVector};

use fusion::{fuse, Algo, EmVariant, ErmLoss, FuseParams};

#[derive(Debug, Parser)]
#[command(name = "veritas", version, about = "Data fusion with learned source accuracies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate true values and source accuracies.
    Fuse(FuseArgs),
    /// Print the ERM/EM decision as JSON.
    Optimize(OptimizeArgs),
    /// Write the lasso regularization path as CSV.
    LassoPath(LassoArgs),
    /// Generate a synthetic instance.
    Simulate(SimulateArgs),
    /// Train/test evaluation over a grid of label fractions.
    Evaluate(EvaluateArgs),
    /// Predict accuracies of sources from their features alone.
    PredictSources(PredictArgs),
    /// Unsupervised accuracy estimate from pairs of observations.
    PairEstimate(PairArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub observations: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

impl InputArgs {
    fn load(&self) -> anyhow::Result<(FusionInstance, GroundTruth)> {
        let (inst, truth) = load_instance(&InputPaths {
            observations: self.observations.clone(),
            features: self.features.clone(),
            truth: self.truth.clone(),
        })?;
        Ok((inst, truth.unwrap_or_else(GroundTruth::empty)))
    }
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    /// L1 penalty on feature weights.
    #[arg(long, default_value_t = 0.0)]
    pub l1: f64,
    /// Ridge penalty on source intercepts and pair weights.
    #[arg(long, default_value_t = 0.01)]
    pub l2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 500)]
    pub max_inner: usize,
    #[arg(long, value_enum, default_value_t = ErmLoss::Object)]
    pub erm_loss: ErmLoss,
    #[arg(long, value_enum, default_value_t = EmVariant::Hard)]
    pub em: EmVariant,
    /// Model copying between source pairs that share this many objects.
    #[arg(long)]
    pub copying_min_overlap: Option<usize>,
}

impl LearnArgs {
    fn params(&self, algo: Algo) -> FuseParams {
        FuseParams {
            algo,
            tau: self.tau,
            l1: self.l1,
            l2: self.l2,
            seed: self.seed,
            max_outer: self.max_outer,
            max_inner: self.max_inner,
            erm_loss: self.erm_loss,
            em_variant: self.em,
            copying_min_overlap: self.copying_min_overlap,
            ..FuseParams::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = Algo::Auto)]
    pub algo: Algo,
    #[command(flatten)]
    pub learn: LearnArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    /// Accepted for symmetry with the other commands; the decision is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct LassoArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.01)]
    pub l2: f64,
    #[arg(long, value_enum, default_value_t = ErmLoss::Object)]
    pub erm_loss: ErmLoss,
    #[arg(long, default_value_t = 500)]
    pub max_inner: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub sources: usize,
    #[arg(long)]
    pub objects: usize,
    /// Probability that a source observes an object.
    #[arg(long, default_value_t = 0.1, conflicts_with = "pairs")]
    pub density: f64,
    /// Exactly two random sources observe each object.
    #[arg(long)]
    pub pairs: bool,
    #[arg(long, default_value_t = 2)]
    pub domain: usize,
    #[arg(long, default_value_t = 0.75)]
    pub acc_mean: f64,
    #[arg(long, default_value_t = 0.1)]
    pub acc_spread: f64,
    /// Feature-determined accuracies, e.g. `weights=1,-0.5;n=5;density=0.5;bias=true`.
    #[arg(long)]
    pub feature_model: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.05,0.1,0.2")]
    pub train_fractions: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    pub reps: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "auto,erm,em,majority,counts")]
    pub algos: Vec<Algo>,
    #[command(flatten)]
    pub learn: LearnArgs,
    /// Record wall time per run; the report is then no longer reproducible.
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// A `result.json` written by `fuse`.
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long)]
    pub observations: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.01)]
    pub l2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit status of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Output was written but a fit hit its iteration limit.
    NotConverged,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::NotConverged => 2,
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Fuse(a) => cmd_fuse(&a),
        Command::Optimize(a) => cmd_optimize(&a),
        Command::LassoPath(a) => cmd_lasso(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::PredictSources(a) => cmd_predict(&a),
        Command::PairEstimate(a) => cmd_pairs(&a),
    }
}

fn named<'a>(names: impl IntoIterator<Item = &'a String>, xs: &[f64]) -> Value {
    json::object(names.into_iter().cloned().zip(xs.iter().map(|&x| json::number(x))))
}

fn weights_json(instance: &FusionInstance, w: &WeightVector) -> Value {
    let pairs = w.pair_weights.iter().map(|(p, &x)| {
        let key = format!("{}|{}", instance.sources()[p.0], instance.sources()[p.1]);
        (key, json::number(x))
    });
    json::object([
        ("sources", named(instance.sources(), &w.source_intercepts)),
        ("features", named(instance.feature_names(), &w.feature_weights)),
        ("pairs", json::object(pairs)),
    ])
}

/// The `result.json` document.
pub fn result_json(
    instance: &FusionInstance,
    result: &FusionResult,
    decision: &veritas_core::OptimizerDecision,
) -> anyhow::Result<Value> {
    let values = (0..instance.n_objects())
        .map(|o| (instance.objects()[o].clone(), Value::String(result.value_name(instance, o).to_string())));
    let d = &result.diagnostics;
    Ok(json::object([
        ("algorithm", Value::String(result.algorithm.to_string())),
        ("values", json::object(values)),
        ("accuracies", named(instance.sources(), &result.accuracies)),
        ("weights", weights_json(instance, &result.weights)),
        ("optimizer", json::to_canonical(decision)?),
        (
            "diagnostics",
            json::object([
                ("iterations", Value::from(d.iterations)),
                ("objective", json::number(d.objective)),
                ("converged", Value::Bool(d.converged)),
            ]),
        ),
    ]))
}

fn cmd_fuse(a: &FuseArgs) -> anyhow::Result<Outcome> {
    let (inst, gt) = a.input.load()?;
    let out = fuse(&inst, &gt, &a.learn.params(a.algo))?;
    json::write(&a.out, &result_json(&inst, &out.result, &out.decision)?)?;
    Ok(if out.result.diagnostics.converged {
        Outcome::Success
    } else {
        Outcome::NotConverged
    })
}

fn cmd_optimize(a: &OptimizeArgs) -> anyhow::Result<Outcome> {
    if a.tau.is_nan() || a.tau <= 0.0 {
        bail!("tau must be positive");
    }
    let (inst, gt) = a.input.load()?;
    let decision = decide(&inst, &gt, a.tau, model_dimension(&inst));
    print!("{}", json::render(&json::to_canonical(&decision)?));
    Ok(Outcome::Success)
}

fn fmt_float(x: f64) -> String {
    json::round12(x).map_or_else(|| "NaN".to_string(), |r| r.to_string())
}

fn cmd_lasso(a: &LassoArgs) -> anyhow::Result<Outcome> {
    let (inst, gt) = a.input.load()?;
    let algorithm = match a.erm_loss {
        ErmLoss::Object => LearnAlgorithm::ErmObject,
        ErmLoss::Observation => LearnAlgorithm::ErmObservation,
    };
    let config = LearnConfig {
        algorithm,
        l2_intercept_penalty: a.l2,
        max_inner_iters: a.max_inner,
        ..LearnConfig::default()
    };
    config.validate()?;
    let path = lasso_path(&inst, &gt, a.grid, &config)?;
    let mut w = csv::Writer::from_path(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let mut header = vec!["lambda".to_string(), "mu".to_string()];
    header.extend(path.feature_names.iter().cloned());
    w.write_record(&header)?;
    for ((lambda, mu), weights) in path.grid.iter().zip(&path.mu).zip(&path.weights) {
        let mut row = vec![fmt_float(*lambda), fmt_float(*mu)];
        row.extend(weights.iter().map(|&x| fmt_float(x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(Outcome::Success)
}

/// Parse `weights=1,-0.5;n=5;density=0.5;bias=true`. Only `weights` is
/// required; `n` defaults to the number of weights.
pub fn parse_feature_model(spec: &str) -> anyhow::Result<AccuracyModel> {
    let mut weights = None;
    let mut n = None;
    let mut density = 0.5;
    let mut bias = false;
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("feature model entry `{part}` is not key=value"))?;
        match key.trim() {
            "weights" => {
                let ws = value
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .with_context(|| format!("feature model weights `{value}`"))?;
                weights = Some(ws);
            }
            "n" => n = Some(value.trim().parse::<usize>().context("feature model `n`")?),
            "density" => density = value.trim().parse().context("feature model `density`")?,
            "bias" => bias = value.trim().parse().context("feature model `bias`")?,
            other => bail!("unknown feature model key `{other}`"),
        }
    }
    let true_weights = weights.ok_or_else(|| anyhow!("feature model needs `weights=`"))?;
    Ok(AccuracyModel::FeatureLogistic {
        n_features: n.unwrap_or(true_weights.len()),
        true_weights,
        feature_density: density,
        constant_feature: bias,
    })
}

fn cmd_simulate(a: &SimulateArgs) -> anyhow::Result<Outcome> {
    let accuracy = match &a.feature_model {
        Some(spec) => parse_feature_model(spec)?,
        None => AccuracyModel::Uniform {
            mean: a.acc_mean,
            spread: a.acc_spread,
        },
    };
    let config = SimConfig {
        n_sources: a.sources,
        n_objects: a.objects,
        sampling: if a.pairs { Sampling::Pairs } else { Sampling::Density(a.density) },
        domain_size: a.domain,
        accuracy,
        clones: Vec::new(),
        seed: a.seed,
    };
    write_simulation(&a.out_dir, &generate(&config)?)?;
    Ok(Outcome::Success)
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    config: String,
    algorithm: String,
    runs: usize,
    object_accuracy: f64,
    weighted_accuracy_error: f64,
}

fn cmd_evaluate(a: &EvaluateArgs) -> anyhow::Result<Outcome> {
    let (inst, truth) = a.input.load()?;
    if truth.is_empty() {
        bail!("evaluate needs a truth file");
    }
    if a.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let labeled: Vec<usize> = truth.iter().map(|(o, _)| o).collect();
    let mut rows = Vec::new();
    for &fraction in &a.train_fractions {
        let config = format!("train_fraction={fraction}");
        for rep in 0..a.reps {
            let seed = replicate_seed(a.learn.seed, rep);
            let (train, test) = make_split(&labeled, fraction, seed)?;
            let train_gt = truth.restrict(&train);
            for &algo in &a.algos {
                let params = FuseParams {
                    seed,
                    ..a.learn.params(algo)
                };
                let start = Instant::now();
                let out = fuse(&inst, &train_gt, &params)?;
                let elapsed = start.elapsed().as_secs_f64() * 1e3;
                rows.push(ReportRow {
                    config: config.clone(),
                    seed,
                    algorithm: algo.label().to_string(),
                    object_accuracy: object_accuracy(&out.result.values, &truth, &test)?,
                    weighted_accuracy_error: weighted_accuracy_error(&out.result.accuracies, &inst, &truth),
                    runtime_ms: a.timing.then_some(elapsed),
                });
            }
        }
    }
    let mut groups: BTreeMap<(String, String), Vec<&ReportRow>> = BTreeMap::new();
    for r in &rows {
        groups.entry((r.config.clone(), r.algorithm.clone())).or_default().push(r);
    }
    let summary: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((config, algorithm), rs)| {
            let n = rs.len() as f64;
            SummaryRow {
                config,
                algorithm,
                runs: rs.len(),
                object_accuracy: rs.iter().map(|r| r.object_accuracy).sum::<f64>() / n,
                weighted_accuracy_error: rs.iter().map(|r| r.weighted_accuracy_error).sum::<f64>() / n,
            }
        })
        .collect();
    let report = json::object([("rows", json::to_canonical(&rows)?), ("summary", json::to_canonical(&summary)?)]);
    json::write(&a.out, &report)?;
    Ok(Outcome::Success)
}

fn read_json(path: &Path) -> anyhow::Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_predict(a: &PredictArgs) -> anyhow::Result<Outcome> {
    let result = read_json(&a.weights)?;
    let learned = result
        .pointer("/weights/features")
        .and_then(Value::as_object)
        .ok_or_else(|| anyhow!("{}: no `weights.features` object", a.weights.display()))?;
    let table = load_features(&a.features)?;
    let mut weights = Vec::with_capacity(table.names.len());
    for name in &table.names {
        let w = learned
            .get(name)
            .and_then(Value::as_f64)
            .ok_or_else(|| anyhow!("feature `{name}` has no learned weight in {}", a.weights.display()))?;
        weights.push(w);
    }
    let model = WeightVector {
        feature_weights: weights,
        ..WeightVector::zeros(0, table.names.len())
    };
    let preds: Vec<f64> = table
        .rows
        .iter()
        .map(|row| predict_new_source_accuracy(&model, row))
        .collect();
    json::write(&a.out, &json::object([("accuracies", named(&table.sources, &preds))]))?;
    Ok(Outcome::Success)
}

fn cmd_pairs(a: &PairArgs) -> anyhow::Result<Outcome> {
    let (inst, _) = load_instance(&InputPaths {
        observations: a.observations.clone(),
        features: Some(a.features.clone()),
        truth: None,
    })?;
    let config = LearnConfig {
        algorithm: LearnAlgorithm::ErmObservation,
        l2_intercept_penalty: a.l2,
        seed: a.seed,
        ..LearnConfig::default()
    };
    config.validate()?;
    let est = pairwise_unsupervised_estimate(&inst, a.delta, &config)?;
    let counts: Vec<f64> = est.primary_counts.iter().map(|&n| n as f64).collect();
    json::write(
        &a.out,
        &json::object([
            ("a_e_hat", json::number(est.a_e_hat)),
            ("delta", json::number(a.delta)),
            ("accuracies", named(inst.sources(), &est.accuracies)),
            ("feature_weights", named(inst.feature_names(), &est.feature_weights)),
            ("pseudo_counts", named(inst.sources(), &est.pseudo_counts)),
            ("primary_counts", named(inst.sources(), &counts)),
        ]),
    )?;
    Ok(Outcome::Success)
}
