use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use veritas_core::baselines::{counts_infer, majority_vote};
use veritas_core::evaluation::object_accuracy;
use veritas_core::learning::{
    fit_em, fit_erm_object, fit_erm_observation, FitMask, LearnAlgorithm, LearnConfig, ObjectLoss, Penalized, Target,
};
use veritas_core::model::{map_values, SourcePair, WeightVector};
use veritas_core::optimizer::{decide, estimate_avg_accuracy, model_dimension};
use veritas_core::simulation::{generate, SimConfig};
use veritas_core::stats::{logistic, softplus};
use veritas_core::{Choice, FusionInstance, GroundTruth};

fn random_instance(n_sources: usize, n_objects: usize, n_values: usize, n_features: usize, seed: u64) -> FusionInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = (0..n_features).map(|k| format!("f{k}")).collect();
    let mut b = FusionInstance::builder(names);
    for s in 0..n_sources {
        let row = (0..n_features).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect();
        b.add_source(&format!("s{s}"), row).unwrap();
    }
    for o in 0..n_objects {
        for s in 0..n_sources {
            if rng.gen_bool(0.4) {
                let v = rng.gen_range(0..n_values);
                b.add_observation(&format!("o{o}"), &format!("s{s}"), &format!("v{v}")).unwrap();
            }
        }
    }
    b.build().unwrap()
}

fn config(algorithm: LearnAlgorithm, l2: f64) -> LearnConfig {
    LearnConfig {
        algorithm,
        l2_intercept_penalty: l2,
        max_inner_iters: 20_000,
        objective_tol: 1e-14,
        ..LearnConfig::default()
    }
}

/// Minimum of `f` over a square grid `[lo, hi]^dim`.
fn grid_min(dim: usize, lo: f64, hi: f64, steps: usize, f: impl Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let h = (hi - lo) / steps as f64;
    let mut idx = vec![0usize; dim];
    let mut best = (f64::INFINITY, vec![0.0; dim]);
    loop {
        let x: Vec<f64> = idx.iter().map(|&i| lo + h * i as f64).collect();
        let v = f(&x);
        if v < best.0 {
            best = (v, x);
        }
        let mut d = 0;
        loop {
            if d == dim {
                return best;
            }
            idx[d] += 1;
            if idx[d] <= steps {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

#[test]
fn equal_weights_reproduce_majority_vote() {
    let inst = random_instance(20, 50, 3, 0, 11);
    let mut w = WeightVector::for_instance(&inst);
    w.source_intercepts.iter_mut().for_each(|x| *x = 1.3);
    for seed in [0, 1, 99] {
        assert_eq!(map_values(&inst, &w, seed), majority_vote(&inst, seed));
    }
}

#[test]
fn equal_accuracies_reproduce_majority_vote() {
    let inst = random_instance(9, 40, 2, 0, 5);
    let acc = vec![0.8; inst.n_sources()];
    assert_eq!(counts_infer(&inst, &acc, 3), majority_vote(&inst, 3));
}

#[test]
fn opposing_pair_matches_grid_search() {
    let mut b = FusionInstance::builder(Vec::new());
    b.add_observation("o", "s1", "a").unwrap();
    b.add_observation("o", "s2", "b").unwrap();
    let inst = b.build().unwrap();
    let gt = GroundTruth::new(&inst, [(0, "a")]).unwrap();
    let l2 = 0.01;
    let objective = |w: &[f64]| softplus(w[1] - w[0]) + l2 * (w[0] * w[0] + w[1] * w[1]);

    let (w, _) = fit_erm_object(&inst, &gt, &config(LearnAlgorithm::ErmObject, l2)).unwrap();
    let (s1, s2) = (inst.source_index("s1").unwrap(), inst.source_index("s2").unwrap());
    let fitted = [w.source_intercepts[s1], w.source_intercepts[s2]];
    let (grid_value, grid_x) = grid_min(2, -3.0, 3.0, 1200, objective);

    assert!(fitted[0] > fitted[1]);
    assert!(objective(&fitted) <= grid_value + 1e-9);
    assert!((fitted[0] - grid_x[0]).abs() < 0.01 && (fitted[1] - grid_x[1]).abs() < 0.01);
}

#[test]
fn perfect_source_matches_scalar_minimum() {
    let mut b = FusionInstance::builder(Vec::new());
    for o in 0..10 {
        b.add_observation(&format!("o{o}"), "good", "t").unwrap();
        b.add_observation(&format!("o{o}"), "other", "f").unwrap();
    }
    let inst = b.build().unwrap();
    let gt = GroundTruth::new(&inst, (0..10).map(|o| (o, "t"))).unwrap();
    let l2 = 0.01;
    let (w, _) = fit_erm_observation(&inst, &gt, &config(LearnAlgorithm::ErmObservation, l2)).unwrap();
    let fitted = w.source_intercepts[inst.source_index("good").unwrap()];

    // stationary point of 10·softplus(−w) + λ₂w²: −10·logistic(−w) + 2λ₂w = 0
    let (mut lo, mut hi) = (0.0f64, 50.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if -10.0 * logistic(-mid) + 2.0 * l2 * mid < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((fitted - lo).abs() < 1e-4, "{fitted} vs {lo}");
    let a = logistic(fitted);
    assert!(a > 0.9 && a < 1.0);
}

#[test]
fn gradient_matches_central_differences() {
    let inst = random_instance(8, 30, 3, 3, 21);
    let labels: Vec<(usize, Target)> = (0..inst.n_objects())
        .map(|o| {
            if o % 2 == 0 {
                (o, Target::Hard(0))
            } else {
                let n = inst.domain(o).len();
                (o, Target::Soft(vec![1.0 / n as f64; n]))
            }
        })
        .collect();
    let loss = ObjectLoss {
        instance: &inst,
        targets: &labels,
    };
    let template = WeightVector::for_instance(&inst).with_pairs([SourcePair::new(0, 1), SourcePair::new(2, 5)]);
    let problem = Penalized {
        loss: &loss,
        template: &template,
        l1: 0.0,
        l2: 0.05,
        mask: FitMask::ALL,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for point in 0..2 {
        let x: Vec<f64> = (0..template.n_params())
            .map(|_| if point == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) })
            .collect();
        let (_, grad) = problem.smooth_value_grad(&x);
        let h = 1e-5;
        for i in 0..x.len() {
            let mut up = x.clone();
            let mut down = x.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (problem.smooth_value_grad(&up).0 - problem.smooth_value_grad(&down).0) / (2.0 * h);
            let err = (grad[i] - fd).abs() / fd.abs().max(1.0);
            assert!(err < 1e-5, "coordinate {i}: {} vs {fd}", grad[i]);
        }
    }
}

#[test]
fn copying_pair_matches_grid_search() {
    // two clones agree on the wrong value, an independent third is right
    let mut b = FusionInstance::builder(Vec::new());
    for o in 0..20 {
        let o = format!("o{o}");
        b.add_observation(&o, "c1", "wrong").unwrap();
        b.add_observation(&o, "c2", "wrong").unwrap();
        b.add_observation(&o, "ind", "right").unwrap();
    }
    let inst = b.build().unwrap();
    let gt = GroundTruth::new(&inst, (0..20).map(|o| (o, "right"))).unwrap();
    let pair = SourcePair::new(inst.source_index("c1").unwrap(), inst.source_index("c2").unwrap());
    let l2 = 0.05;
    let cfg = LearnConfig {
        copying_pairs: vec![pair],
        ..config(LearnAlgorithm::ErmObject, l2)
    };
    let (w, _) = fit_erm_object(&inst, &gt, &cfg).unwrap();
    let pw = w.pair_weights[&pair];

    // x = (clone intercept, independent intercept, pair weight); the clones
    // are exchangeable so one shared intercept suffices
    let objective = |x: &[f64]| {
        let margin = x[1] + x[2] - 2.0 * x[0];
        20.0 * softplus(-margin) + l2 * (2.0 * x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
    };
    let clone = w.source_intercepts[inst.source_index("c1").unwrap()];
    let ind = w.source_intercepts[inst.source_index("ind").unwrap()];
    let (grid_value, grid_x) = grid_min(3, -6.0, 6.0, 120, objective);

    assert!(pw > 0.0 && grid_x[2] > 0.0);
    assert!(objective(&[clone, ind, pw]) <= grid_value + 1e-9);
    assert!((pw - grid_x[2]).abs() < 0.1, "{pw} vs {}", grid_x[2]);
}

#[test]
fn stronger_ridge_shrinks_intercepts() {
    let inst = random_instance(10, 60, 2, 0, 8);
    let gt = GroundTruth::from_indices(&inst, (0..inst.n_objects()).map(|o| (o, 0))).unwrap();
    let norm = |l2| {
        let (w, _) = fit_erm_object(&inst, &gt, &config(LearnAlgorithm::ErmObject, l2)).unwrap();
        w.source_intercepts.iter().map(|x| x * x).sum::<f64>().sqrt()
    };
    assert!(norm(0.2) <= norm(0.1));
}

#[test]
fn hard_em_recovers_unlabeled_truth() {
    let cfg = LearnConfig::default().with_algorithm(LearnAlgorithm::EmHard);
    for seed in 0..5 {
        let sim = generate(&SimConfig::uniform(200, 500, 0.02, 0.8, 0.15, seed)).unwrap();
        let fit = fit_em(&sim.instance, &GroundTruth::empty(), &cfg).unwrap();
        let all: Vec<usize> = (0..sim.instance.n_objects()).collect();
        let acc = sim.object_accuracy(&fit.values, &all).unwrap();
        assert!(acc > 0.85, "seed {seed}: {acc}");
    }
}

#[test]
fn agreement_estimate_recovers_mean_accuracy() {
    let sim = generate(&SimConfig::uniform(100, 1000, 0.1, 0.8, 0.0, 17)).unwrap();
    let a = estimate_avg_accuracy(&sim.instance).unwrap();
    assert!((a - 0.8).abs() < 0.05, "{a}");
}

#[test]
fn optimizer_crossover() {
    let sim = generate(&SimConfig::uniform(100, 2000, 0.1, 0.85, 0.1, 3)).unwrap();
    let inst = &sim.instance;
    let labels = |fraction: f64| {
        let n = (fraction * inst.n_objects() as f64).round() as usize;
        sim.truth.restrict(&(0..n).collect::<Vec<_>>())
    };
    let sparse = decide(inst, &labels(0.001), 0.1, model_dimension(inst));
    assert_eq!(sparse.choice, Choice::Em);
    // no domain features: the bound vanishes once labels exist
    let rich = decide(inst, &labels(0.2), 0.1, inst.n_features());
    assert_eq!(rich.choice, Choice::Erm);
    assert!(rich.erm_bound <= 0.1);
}

#[test]
fn independent_guessing_scores_half() {
    let sim = generate(&SimConfig::uniform(20, 4000, 0.2, 0.8, 0.1, 9)).unwrap();
    let inst = &sim.instance;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let guess: Vec<usize> = (0..inst.n_objects()).map(|o| rng.gen_range(0..inst.domain(o).len())).collect();
    let binary: Vec<usize> = sim.truth.iter().map(|(o, _)| o).filter(|&o| inst.domain(o).len() == 2).collect();
    let acc = object_accuracy(&guess, &sim.truth, &binary).unwrap();
    let sd = (0.25 / binary.len() as f64).sqrt();
    assert!((acc - 0.5).abs() < 4.0 * sd, "{acc}");
}
