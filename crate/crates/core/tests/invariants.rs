use std::collections::BTreeMap;

use proptest::prelude::*;
use veritas_core::analysis::add_copying_features;
use veritas_core::io::{load_instance, simulation_paths, write_simulation};
use veritas_core::learning::{fit_em, fit_erm_object, fit_weights_from, LearnAlgorithm, LearnConfig, Target};
use veritas_core::model::{posterior, seeded_argmax, WeightVector};
use veritas_core::optimizer::{em_units, estimate_avg_accuracy, ground_truth_units};
use veritas_core::simulation::{generate, SimConfig};
use veritas_core::{FusionInstance, GroundTruth};

/// (object, source, value) triples, each (object, source) at most once.
type Triples = Vec<(usize, usize, usize)>;

fn triples(max_sources: usize, max_objects: usize, max_values: usize) -> impl Strategy<Value = Triples> {
    (2..=max_sources, 1..=max_objects).prop_flat_map(move |(s, o)| {
        proptest::collection::vec(proptest::option::weighted(0.7, 0..max_values), s * o).prop_map(move |cells| {
            let mut out = Vec::new();
            for (i, cell) in cells.into_iter().enumerate() {
                if let Some(v) = cell {
                    out.push((i / s, i % s, v));
                }
            }
            if out.is_empty() {
                out.push((0, 0, 0));
            }
            out
        })
    })
}

fn build(rows: &Triples, n_features: usize, value_name: impl Fn(usize) -> String) -> FusionInstance {
    let names = (0..n_features).map(|k| format!("f{k}")).collect();
    let mut b = FusionInstance::builder(names);
    for &(o, s, v) in rows {
        b.add_observation(&format!("o{o}"), &format!("s{s}"), &value_name(v)).unwrap();
    }
    b.build().unwrap()
}

fn plain(v: usize) -> String {
    format!("v{v}")
}

/// Weights keyed by source name so they survive reordering.
fn weights_for(inst: &FusionInstance, by_name: &BTreeMap<String, f64>) -> WeightVector {
    let mut w = WeightVector::for_instance(inst);
    for (s, name) in inst.sources().iter().enumerate() {
        w.source_intercepts[s] = by_name[name];
    }
    w
}

fn posterior_by_name(inst: &FusionInstance, w: &WeightVector, object: &str) -> BTreeMap<String, f64> {
    let o = inst.object_index(object).unwrap();
    inst.domain(o).iter().cloned().zip(posterior(inst, w, o)).collect()
}

fn quick_config(algorithm: LearnAlgorithm, l2: f64) -> LearnConfig {
    LearnConfig {
        algorithm,
        l2_intercept_penalty: l2,
        max_inner_iters: 5000,
        objective_tol: 1e-13,
        ..LearnConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posterior_is_a_distribution(rows in triples(6, 8, 4), w in proptest::collection::vec(-6.0f64..6.0, 6)) {
        let inst = build(&rows, 0, plain);
        let mut wv = WeightVector::for_instance(&inst);
        for (s, x) in wv.source_intercepts.iter_mut().enumerate() {
            *x = w[s];
        }
        for o in 0..inst.n_objects() {
            let p = posterior(&inst, &wv, o);
            prop_assert_eq!(p.len(), inst.domain(o).len());
            prop_assert!(p.iter().all(|x| *x >= 0.0 && x.is_finite()));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_ignores_observation_order(rows in triples(5, 6, 3), w in proptest::collection::vec(-4.0f64..4.0, 5)) {
        let forward = build(&rows, 0, plain);
        let mut rev = rows.clone();
        rev.reverse();
        let backward = build(&rev, 0, plain);
        let by_name: BTreeMap<String, f64> =
            forward.sources().iter().enumerate().map(|(s, n)| (n.clone(), w[s])).collect();
        let wf = weights_for(&forward, &by_name);
        let wb = weights_for(&backward, &by_name);
        for object in forward.objects() {
            let a = posterior_by_name(&forward, &wf, object);
            let b = posterior_by_name(&backward, &wb, object);
            prop_assert_eq!(a.len(), b.len());
            for (k, x) in &a {
                prop_assert!((x - b[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn copying_pairs_keep_normalization(rows in triples(5, 6, 3), pw in -5.0f64..5.0) {
        let inst = build(&rows, 0, plain);
        let pairs = add_copying_features(&inst, 1).unwrap();
        let mut w = WeightVector::for_instance(&inst).with_pairs(pairs);
        for x in w.pair_weights.values_mut() {
            *x = pw;
        }
        for o in 0..inst.n_objects() {
            let p = posterior(&inst, &w, o);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded_argmax_is_a_maximum(scores in proptest::collection::vec(-3i32..3, 1..8), seed in any::<u64>(), o in 0usize..100) {
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let i = seeded_argmax(&scores, seed, o);
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(scores[i], max);
        prop_assert_eq!(i, seeded_argmax(&scores, seed, o));
    }

    #[test]
    fn em_units_monotone_in_accuracy(rows in triples(6, 8, 3), a in 0.5f64..1.0, b in 0.5f64..1.0) {
        let inst = build(&rows, 0, plain);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(em_units(&inst, lo) <= em_units(&inst, hi) + 1e-9);
    }

    #[test]
    fn ground_truth_units_add_over_disjoint_sets(rows in triples(5, 8, 3), split in any::<u64>()) {
        let inst = build(&rows, 0, plain);
        let all: Vec<(usize, usize)> = (0..inst.n_objects()).map(|o| (o, 0)).collect();
        let (left, right): (Vec<_>, Vec<_>) = all.iter().partition(|(o, _)| (split >> (o % 64)) & 1 == 1);
        let total = ground_truth_units(&inst, &GroundTruth::from_indices(&inst, all.clone()).unwrap());
        let l = ground_truth_units(&inst, &GroundTruth::from_indices(&inst, left).unwrap());
        let r = ground_truth_units(&inst, &GroundTruth::from_indices(&inst, right).unwrap());
        prop_assert!((total - l - r).abs() < 1e-9);
    }

    #[test]
    fn agreement_estimate_ignores_names_and_order(rows in triples(5, 8, 3)) {
        let base = build(&rows, 0, plain);
        let renamed = build(&rows, 0, |v| format!("x{}", 7 - v));
        let mut rev = rows.clone();
        rev.reverse();
        let reordered = build(&rev, 0, plain);
        match estimate_avg_accuracy(&base) {
            Ok(a) => {
                prop_assert!((a - estimate_avg_accuracy(&renamed).unwrap()).abs() < 1e-12);
                prop_assert!((a - estimate_avg_accuracy(&reordered).unwrap()).abs() < 1e-12);
            }
            Err(_) => {
                prop_assert!(estimate_avg_accuracy(&renamed).is_err());
                prop_assert!(estimate_avg_accuracy(&reordered).is_err());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn erm_optimum_does_not_depend_on_start(rows in triples(4, 6, 3), init in proptest::collection::vec(-3.0f64..3.0, 4)) {
        let inst = build(&rows, 0, plain);
        let labels: Vec<(usize, Target)> = (0..inst.n_objects()).map(|o| (o, Target::Hard(0))).collect();
        let config = quick_config(LearnAlgorithm::ErmObject, 0.1);
        let zero = config.initial_weights(&inst);
        let mut start = zero.clone();
        for (s, x) in start.source_intercepts.iter_mut().enumerate() {
            *x = init[s];
        }
        let (_, d0) = fit_weights_from(&inst, &labels, &config, &zero).unwrap();
        let (_, d1) = fit_weights_from(&inst, &labels, &config, &start).unwrap();
        prop_assert!((d0.objective - d1.objective).abs() < 1e-5, "{} vs {}", d0.objective, d1.objective);
    }

    #[test]
    fn stronger_ridge_never_grows_intercepts(rows in triples(4, 6, 3)) {
        let inst = build(&rows, 0, plain);
        let gt = GroundTruth::from_indices(&inst, (0..inst.n_objects()).map(|o| (o, 0))).unwrap();
        let norm = |l2: f64| {
            let (w, _) = fit_erm_object(&inst, &gt, &quick_config(LearnAlgorithm::ErmObject, l2)).unwrap();
            w.source_intercepts.iter().map(|x| x * x).sum::<f64>().sqrt()
        };
        prop_assert!(norm(0.2) <= norm(0.1) + 1e-6);
    }

    #[test]
    fn hard_em_terminates_with_clamped_labels(rows in triples(5, 8, 3), labeled in proptest::collection::vec(any::<bool>(), 8), seed in 0u64..1000) {
        let inst = build(&rows, 0, plain);
        let picks: Vec<(usize, usize)> = (0..inst.n_objects())
            .filter(|o| labeled[*o])
            .map(|o| (o, inst.domain(o).len() - 1))
            .collect();
        let gt = GroundTruth::from_indices(&inst, picks).unwrap();
        let config = LearnConfig { seed, max_outer_iters: 20, ..LearnConfig::default() }.with_algorithm(LearnAlgorithm::EmHard);
        let fit = fit_em(&inst, &gt, &config).unwrap();
        prop_assert!(fit.diagnostics.iterations <= 20);
        prop_assert_eq!(fit.values.len(), inst.n_objects());
        for (o, v) in fit.values.iter().enumerate() {
            prop_assert!(*v < inst.domain(o).len());
        }
        for (o, v) in gt.iter() {
            prop_assert_eq!(fit.values[o], v);
        }
    }

    #[test]
    fn simulation_round_trips_through_files(seed in any::<u64>(), density in 0.05f64..0.6) {
        let sim = generate(&SimConfig::uniform(12, 30, density, 0.75, 0.1, seed)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_simulation(dir.path(), &sim).unwrap();
        let (inst, truth) = load_instance(&simulation_paths(dir.path())).unwrap();
        prop_assert_eq!(&inst, &sim.instance);
        prop_assert_eq!(truth.unwrap_or_default(), sim.truth.clone());
    }
}

