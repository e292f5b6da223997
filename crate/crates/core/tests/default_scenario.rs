//! Holdout accuracy of every learner on the bundled synthetic scenario.

use std::time::Instant;

use mibids_core::dataset::{apply_normalizer, fit_normalizer, split, Dataset};
use mibids_core::ensemble::{train_adaboost_m1, train_forest, BoostConfig, ForestConfig};
use mibids_core::features::{select_group, FeatureGroup};
use mibids_core::mlp::{train_mlp, MlpConfig};
use mibids_core::synth::{default_scenario, generate};
use mibids_core::tree::{train_tree, TreeConfig};

fn holdout() -> (Dataset, Dataset) {
    let d = generate(&default_scenario()).unwrap();
    let d = select_group(&d, &FeatureGroup::interface()).unwrap();
    split(&d, 0.7, 42, false).unwrap()
}

fn accuracy(test: &Dataset, predict: impl Fn(&[f64]) -> usize) -> f64 {
    let hits = test.records().iter().filter(|r| predict(&r.values) == r.label).count();
    hits as f64 / test.len() as f64
}

#[test]
fn split_sizes() {
    let (train, test) = holdout();
    assert_eq!((train.len(), test.len()), (3498, 1500));
}

#[test]
fn unpruned_tree() {
    let (train, test) = holdout();
    let t = train_tree(&train, &vec![1.0; train.len()], &TreeConfig::unpruned()).unwrap();
    let acc = accuracy(&test, |x| t.predict(x).unwrap());
    println!("unpruned tree: {acc:.4}");
    assert!(acc >= 0.95, "{acc}");
}

#[test]
fn pruned_tree() {
    let (train, test) = holdout();
    let t = train_tree(&train, &vec![1.0; train.len()], &TreeConfig::default()).unwrap();
    let acc = accuracy(&test, |x| t.predict(x).unwrap());
    println!("pruned tree: {acc:.4}");
    assert!(acc >= 0.95, "{acc}");
}

#[test]
fn forest() {
    let (train, test) = holdout();
    let start = Instant::now();
    let f = train_forest(&train, &ForestConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let acc = accuracy(&test, |x| f.predict(x).unwrap());
    println!("forest: {acc:.4} in {secs:.2}s");
    assert!(acc >= 0.99, "{acc}");
    assert!(secs < 60.0);
}

#[test]
fn adaboost() {
    let (train, test) = holdout();
    let start = Instant::now();
    let b = train_adaboost_m1(&train, &BoostConfig::default(), &TreeConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let acc = accuracy(&test, |x| b.predict(x).unwrap());
    println!("adaboost: {acc:.4} in {secs:.2}s ({} stages)", b.stages().len());
    assert!(acc >= 0.97, "{acc}");
    assert!(secs < 60.0);
}

#[test]
fn mlp() {
    let (train, test) = holdout();
    let start = Instant::now();
    let n = fit_normalizer(&train).unwrap();
    let m = train_mlp(&apply_normalizer(&n, &train).unwrap(), &MlpConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let acc = accuracy(&test, |x| m.predict(&n.apply_row(x).unwrap()).unwrap());
    println!("mlp: {acc:.4} in {secs:.2}s");
    assert!(acc >= 0.95, "{acc}");
    assert!(secs < 60.0);
}
