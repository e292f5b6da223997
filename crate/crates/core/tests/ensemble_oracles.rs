use mibids_core::dataset::{Dataset, FeatureSchema, MibRecord};
use mibids_core::ensemble::{
    reweight, train_adaboost_m1_traced, train_forest, BoostConfig, ForestConfig, MIN_ERROR,
};
use mibids_core::tree::TreeConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noisy(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Dataset {
    let schema = FeatureSchema::new(["x", "y", "z"]).unwrap();
    let records = (0..n)
        .map(|_| {
            let values: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
            let clean = ((values[0] + values[1]) * k as f64 / 2.0) as usize % k;
            let label = if rng.random_bool(0.15) { rng.random_range(0..k) } else { clean };
            MibRecord { values, label }
        })
        .collect();
    Dataset::new(schema, (0..k).map(|c| format!("c{c}")).collect(), records).unwrap()
}

fn first_max(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

#[test]
fn forest_prediction_is_mean_of_member_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let d = noisy(&mut rng, 120, 3);
    let f = train_forest(
        &d,
        &ForestConfig {
            n_trees: 5,
            ..ForestConfig::default()
        },
    )
    .unwrap();
    assert_eq!(f.trees().len(), 5);
    for _ in 0..200 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-0.2..1.2)).collect();
        let mut mean = vec![0.0; 3];
        for t in f.trees() {
            for (m, p) in mean.iter_mut().zip(t.predict_proba(&x).unwrap()) {
                *m += p / 5.0;
            }
        }
        let got = f.predict_proba(&x).unwrap();
        for (a, b) in got.iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(f.predict(&x).unwrap(), first_max(&got));
    }
}

#[test]
fn adaboost_prediction_is_weighted_vote_tally() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let d = noisy(&mut rng, 150, 4);
    let (b, _) = train_adaboost_m1_traced(&d, &BoostConfig::default(), &TreeConfig::default()).unwrap();
    assert!(b.stages().len() > 1);
    for _ in 0..200 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut tally = vec![0.0; 4];
        for (t, alpha) in b.stages() {
            tally[t.predict(&x).unwrap()] += alpha;
        }
        assert_eq!(b.predict(&x).unwrap(), first_max(&tally));
    }
}

#[test]
fn adaboost_round_invariants_and_error_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut bounded = 0;
    for trial in 0..12 {
        let n = rng.random_range(30..120);
        let k = rng.random_range(2..5);
        let d = noisy(&mut rng, n, k);
        let cfg = BoostConfig {
            n_rounds: 8,
            seed: trial,
        };
        let (b, trace) = train_adaboost_m1_traced(&d, &cfg, &TreeConfig::default()).unwrap();
        let mut bound = 1.0;
        let mut fallback = false;
        for r in &trace.rounds {
            if r.retained && !r.fallback {
                assert!(r.error < 0.5, "trial {trial}: retained error {}", r.error);
                let sum: f64 = r.weights.iter().sum();
                assert!((sum - 1.0).abs() < 1e-9, "trial {trial}: weight sum {sum}");
                let eps = r.error.max(MIN_ERROR);
                bound *= 2.0 * (eps * (1.0 - eps)).sqrt();
            }
            fallback |= r.fallback;
        }
        if fallback {
            continue;
        }
        let wrong = d.records().iter().filter(|r| b.predict(&r.values).unwrap() != r.label).count();
        let err = wrong as f64 / d.len() as f64;
        assert!(err <= bound + 1e-12, "trial {trial}: training error {err} > bound {bound}");
        bounded += 1;
    }
    assert!(bounded >= 10);
}

#[test]
fn worked_reweight_example() {
    let w = [0.25; 4];
    let r = reweight(&w, &[false, true, true, true]).unwrap();
    let want = [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
    for (a, b) in r.weights.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((r.beta - 1.0 / 3.0).abs() < 1e-12);
}
