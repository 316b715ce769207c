//! Smooth losses over the weight vector and their analytic gradients.
//!
//! Gradients are returned in the flat layout of [`WeightVector::to_flat`].

use crate::instance::FusionInstance;
use crate::model::{ScoreModel, WeightVector};
use crate::stats::{log_sum_exp, logistic, softplus};

/// Supervision for one object: a known value or a distribution over its domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Hard(usize),
    Soft(Vec<f64>),
}

impl Target {
    fn weight_of(&self, d: usize) -> f64 {
        match self {
            Target::Hard(v) => f64::from(u8::from(*v == d)),
            Target::Soft(q) => q[d],
        }
    }

    fn mass(&self) -> f64 {
        match self {
            Target::Hard(_) => 1.0,
            Target::Soft(q) => q.iter().sum(),
        }
    }
}

/// A differentiable loss in the model weights.
pub trait SmoothLoss {
    /// Loss value and its gradient in flat layout.
    fn value_grad(&self, w: &WeightVector) -> (f64, Vec<f64>);

    fn value(&self, w: &WeightVector) -> f64 {
        self.value_grad(w).0
    }
}

/// Weighted negative log-posterior over objects:
/// `Σ_o Σ_d q_o(d) · (−log P_w(o)[d])`.
pub struct ObjectLoss<'a> {
    pub instance: &'a FusionInstance,
    pub targets: &'a [(usize, Target)],
}

impl SmoothLoss for ObjectLoss<'_> {
    fn value_grad(&self, w: &WeightVector) -> (f64, Vec<f64>) {
        let inst = self.instance;
        let model = ScoreModel::new(inst, w);
        let mut d_trust = vec![0.0; inst.n_sources()];
        let mut d_pair = vec![0.0; w.pair_weights.len()];
        let mut total = 0.0;
        for (o, target) in self.targets {
            let o = *o;
            if inst.domain(o).len() < 2 {
                continue;
            }
            let scores = model.scores(o);
            let lse = log_sum_exp(&scores);
            let mass = target.mass();
            let mut g = vec![0.0; scores.len()];
            for (d, s) in scores.iter().enumerate() {
                let q = target.weight_of(d);
                total += q * (lse - s);
                g[d] = mass * (s - lse).exp() - q;
            }
            for c in inst.claims(o) {
                d_trust[c.source] += g[c.value];
            }
            // the pair term adds w_p to every candidate except the shared
            // value, and Σ_d g_d = 0, so its gradient is −g[shared]
            for hit in model.pair_hits(o) {
                d_pair[hit.slot] -= g[hit.value];
            }
        }
        (total, assemble(inst, w, &d_trust, &d_pair))
    }
}

/// Per-source binomial log-loss on accuracy:
/// `−Σ_s [c_s log A_s + (n_s − c_s) log(1 − A_s)]`.
///
/// Used for observation-level ERM (integer counts) and for pseudo-count fits.
pub struct SourceBinomialLoss<'a> {
    pub instance: &'a FusionInstance,
    pub successes: Vec<f64>,
    pub trials: Vec<f64>,
}

impl SmoothLoss for SourceBinomialLoss<'_> {
    fn value_grad(&self, w: &WeightVector) -> (f64, Vec<f64>) {
        let inst = self.instance;
        let trust = w.trust_scores(inst);
        let mut d_trust = vec![0.0; inst.n_sources()];
        let mut total = 0.0;
        for (s, &sigma) in trust.iter().enumerate() {
            let (c, n) = (self.successes[s], self.trials[s]);
            if n == 0.0 {
                continue;
            }
            total += c * softplus(-sigma) + (n - c) * softplus(sigma);
            d_trust[s] = n * logistic(sigma) - c;
        }
        (total, assemble(inst, w, &d_trust, &vec![0.0; w.pair_weights.len()]))
    }
}

/// Chain rule from per-source trust-score gradients to the flat layout.
fn assemble(inst: &FusionInstance, w: &WeightVector, d_trust: &[f64], d_pair: &[f64]) -> Vec<f64> {
    let k = w.feature_weights.len();
    let mut grad = Vec::with_capacity(w.n_params());
    grad.extend_from_slice(d_trust);
    let mut d_feat = vec![0.0; k];
    for (s, &g) in d_trust.iter().enumerate() {
        if g != 0.0 {
            for (acc, f) in d_feat.iter_mut().zip(inst.feature_row(s)) {
                *acc += g * f;
            }
        }
    }
    grad.extend(d_feat);
    grad.extend_from_slice(d_pair);
    grad
}

/// Which parameter blocks an optimization may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitMask {
    pub intercepts: bool,
    pub features: bool,
    pub pairs: bool,
}

impl FitMask {
    pub const ALL: FitMask = FitMask {
        intercepts: true,
        features: true,
        pairs: true,
    };
}

/// A loss plus penalties: ridge `λ₂` on intercepts and pair weights, lasso
/// `λ₁` on feature weights. Frozen blocks get zero gradient.
pub struct Penalized<'a> {
    pub loss: &'a dyn SmoothLoss,
    pub template: &'a WeightVector,
    pub l1: f64,
    pub l2: f64,
    pub mask: FitMask,
}

impl Penalized<'_> {
    pub fn n_sources(&self) -> usize {
        self.template.source_intercepts.len()
    }

    pub fn feature_range(&self) -> std::ops::Range<usize> {
        let s = self.n_sources();
        s..s + self.template.feature_weights.len()
    }

    /// Loss plus ridge terms, with gradient (frozen blocks zeroed).
    pub fn smooth_value_grad(&self, flat: &[f64]) -> (f64, Vec<f64>) {
        let w = self.template.from_flat(flat);
        let (mut value, mut grad) = self.loss.value_grad(&w);
        let feats = self.feature_range();
        for (i, x) in flat.iter().enumerate() {
            let ridge = !feats.contains(&i);
            if ridge && self.l2 > 0.0 {
                value += self.l2 * x * x;
                grad[i] += 2.0 * self.l2 * x;
            }
            if !self.is_free(i) {
                grad[i] = 0.0;
            }
        }
        (value, grad)
    }

    pub fn is_free(&self, i: usize) -> bool {
        let feats = self.feature_range();
        if i < feats.start {
            self.mask.intercepts
        } else if i < feats.end {
            self.mask.features
        } else {
            self.mask.pairs
        }
    }

    pub fn l1_term(&self, flat: &[f64]) -> f64 {
        if self.l1 == 0.0 {
            return 0.0;
        }
        self.l1 * flat[self.feature_range()].iter().map(|x| x.abs()).sum::<f64>()
    }

    /// Full objective, smooth part plus lasso.
    pub fn value(&self, flat: &[f64]) -> f64 {
        self.smooth_value_grad(flat).0 + self.l1_term(flat)
    }
}
