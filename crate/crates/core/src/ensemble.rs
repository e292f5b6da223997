//! Random Forest and AdaBoost.M1 on top of [`crate::tree`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::tree::{train_tree, DecisionTree, TreeConfig};
use crate::util::{argmax, mix_seed};

/// Stand-in for a zero weighted error so the stage weight stays finite.
pub const MIN_ERROR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features tried per split; `None` means floor(log2 M) + 1.
    pub feature_sample_size: Option<usize>,
    pub bootstrap: bool,
    pub min_leaf_weight: f64,
    pub seed: u64,
    /// Train trees on the rayon pool. Output does not depend on this.
    pub parallel: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            feature_sample_size: None,
            bootstrap: true,
            min_leaf_weight: 1.0,
            seed: 42,
            parallel: true,
        }
    }
}

/// floor(log2 M) + 1, the usual random-forest subset size.
pub fn default_feature_sample_size(n_features: usize) -> usize {
    (n_features.max(1).ilog2() as usize + 1).min(n_features.max(1))
}

impl ForestConfig {
    pub fn resolved_feature_sample_size(&self, n_features: usize) -> usize {
        self.feature_sample_size
            .unwrap_or_else(|| default_feature_sample_size(n_features))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<DecisionTree>,
    n_classes: usize,
}

impl Forest {
    pub fn from_trees(trees: Vec<DecisionTree>) -> Result<Self> {
        let first = trees
            .first()
            .ok_or_else(|| Error::ModelFormat("forest has no trees".into()))?;
        let (m, k) = (first.n_features(), first.n_classes());
        if trees.iter().any(|t| t.n_features() != m || t.n_classes() != k) {
            return Err(Error::ModelFormat("forest trees disagree on shape".into()));
        }
        Ok(Forest { trees, n_classes: k })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.trees[0].n_features()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Mean of the member trees' leaf distributions.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.trees[0].check_len(x)?;
        let mut acc = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (a, p) in acc.iter_mut().zip(t.leaf_distribution(x)) {
                *a += p;
            }
        }
        let n = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(acc)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }
}

fn forest_tree(d: &Dataset, cfg: &ForestConfig, k: usize, t: usize) -> Result<DecisionTree> {
    let seed = mix_seed(cfg.seed, t as u64);
    let mut weights = vec![0.0; d.len()];
    if cfg.bootstrap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..d.len() {
            weights[rng.random_range(0..d.len())] += 1.0;
        }
    } else {
        weights.fill(1.0);
    }
    let tree_cfg = TreeConfig {
        min_leaf_weight: cfg.min_leaf_weight,
        pruning: false,
        feature_sample_size: Some(k),
        seed: mix_seed(seed, u64::MAX),
        ..TreeConfig::default()
    };
    train_tree(d, &weights, &tree_cfg)
}

/// Bagged, feature-subsampled unpruned trees. Tree `t` draws everything
/// from a seed derived from `(cfg.seed, t)`, so parallel and serial
/// training produce the same forest.
pub fn train_forest(d: &Dataset, cfg: &ForestConfig) -> Result<Forest> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.n_trees == 0 {
        return Err(Error::InvalidArgument("n_trees must be at least 1".into()));
    }
    let m = d.n_features();
    let k = cfg.resolved_feature_sample_size(m);
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(format!(
            "feature_sample_size {k} must lie in 1..={m}"
        )));
    }
    let trees: Result<Vec<DecisionTree>> = if cfg.parallel {
        (0..cfg.n_trees)
            .into_par_iter()
            .map(|t| forest_tree(d, cfg, k, t))
            .collect()
    } else {
        (0..cfg.n_trees).map(|t| forest_tree(d, cfg, k, t)).collect()
    };
    Forest::from_trees(trees?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostConfig {
    pub n_rounds: usize,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig { n_rounds: 10, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostedEnsemble {
    stages: Vec<(DecisionTree, f64)>,
    n_classes: usize,
}

/// Diagnostics for one boosting round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundStats {
    /// Weighted training error before clamping.
    pub error: f64,
    pub beta: f64,
    pub alpha: f64,
    /// Record weights after the update (sum 1).
    pub weights: Vec<f64>,
    /// Whether the tree joined the ensemble.
    pub retained: bool,
    /// Round-one tree kept despite an error of at least 1/2.
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct BoostTrace {
    pub rounds: Vec<RoundStats>,
}

impl BoostedEnsemble {
    pub fn from_stages(stages: Vec<(DecisionTree, f64)>) -> Result<Self> {
        let (first, _) = stages
            .first()
            .ok_or_else(|| Error::ModelFormat("boosted ensemble has no stages".into()))?;
        let (m, k) = (first.n_features(), first.n_classes());
        if stages
            .iter()
            .any(|(t, a)| t.n_features() != m || t.n_classes() != k || !(*a > 0.0) || !a.is_finite())
        {
            return Err(Error::ModelFormat("malformed boosting stage".into()));
        }
        Ok(BoostedEnsemble { stages, n_classes: k })
    }

    pub fn stages(&self) -> &[(DecisionTree, f64)] {
        &self.stages
    }

    pub fn n_features(&self) -> usize {
        self.stages[0].0.n_features()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Stage-weighted votes of the members' hard labels, normalized to sum 1.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.stages[0].0.check_len(x)?;
        let mut scores = vec![0.0; self.n_classes];
        for (t, alpha) in &self.stages {
            scores[argmax(t.leaf_distribution(x))] += alpha;
        }
        let total: f64 = scores.iter().sum();
        scores.iter_mut().for_each(|s| *s /= total);
        Ok(scores)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }
}

/// Result of one AdaBoost.M1 reweighting step.
#[derive(Debug, Clone, PartialEq)]
pub struct Reweight {
    pub error: f64,
    pub beta: f64,
    pub alpha: f64,
    pub weights: Vec<f64>,
}

/// Applies the M1 update for a base learner with error below 1/2: correct
/// records are scaled by beta = eps / (1 - eps), then all weights are
/// renormalized to sum 1. Returns `None` when eps >= 1/2.
pub fn reweight(weights: &[f64], correct: &[bool]) -> Option<Reweight> {
    let total: f64 = weights.iter().sum();
    let error: f64 = weights
        .iter()
        .zip(correct)
        .filter(|(_, &ok)| !ok)
        .map(|(w, _)| w)
        .sum::<f64>()
        / total;
    if error >= 0.5 {
        return None;
    }
    let eps = error.max(MIN_ERROR);
    let beta = eps / (1.0 - eps);
    let mut next: Vec<f64> = weights
        .iter()
        .zip(correct)
        .map(|(&w, &ok)| if ok { w * beta } else { w })
        .collect();
    let sum: f64 = next.iter().sum();
    next.iter_mut().for_each(|w| *w /= sum);
    Some(Reweight {
        error,
        beta,
        alpha: (1.0 / beta).ln(),
        weights: next,
    })
}

/// AdaBoost.M1 with reweighting.
///
/// Stops early when a round's weighted error reaches 1/2 (that tree is
/// dropped) or hits zero (that tree is kept with its error clamped to
/// [`MIN_ERROR`]). If the very first round already fails, its tree is kept
/// alone so the ensemble is never empty.
pub fn train_adaboost_m1(d: &Dataset, cfg: &BoostConfig, base: &TreeConfig) -> Result<BoostedEnsemble> {
    train_adaboost_m1_traced(d, cfg, base).map(|(e, _)| e)
}

pub fn train_adaboost_m1_traced(
    d: &Dataset,
    cfg: &BoostConfig,
    base: &TreeConfig,
) -> Result<(BoostedEnsemble, BoostTrace)> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.n_rounds == 0 {
        return Err(Error::InvalidArgument("n_rounds must be at least 1".into()));
    }
    if d.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::InvalidArgument("boosting needs at least two classes".into()));
    }
    let n = d.len();
    let mut weights = vec![1.0 / n as f64; n];
    let mut stages = Vec::new();
    let mut rounds = Vec::new();

    for round in 0..cfg.n_rounds {
        let tree_cfg = TreeConfig {
            seed: mix_seed(cfg.seed, round as u64),
            ..base.clone()
        };
        let tree = train_tree(d, &weights, &tree_cfg)?;
        let correct: Vec<bool> = d
            .records()
            .iter()
            .map(|r| argmax(tree.leaf_distribution(&r.values)) == r.label)
            .collect();
        match reweight(&weights, &correct) {
            Some(update) => {
                let perfect = update.error == 0.0;
                stages.push((tree, update.alpha));
                rounds.push(RoundStats {
                    error: update.error,
                    beta: update.beta,
                    alpha: update.alpha,
                    weights: update.weights.clone(),
                    retained: true,
                    fallback: false,
                });
                weights = update.weights;
                if perfect {
                    break;
                }
            }
            None => {
                let error = 1.0 - weighted_fraction(&weights, &correct);
                let fallback = stages.is_empty();
                if fallback {
                    stages.push((tree, 1.0));
                }
                rounds.push(RoundStats {
                    error,
                    beta: f64::NAN,
                    alpha: if fallback { 1.0 } else { 0.0 },
                    weights: weights.clone(),
                    retained: fallback,
                    fallback,
                });
                break;
            }
        }
    }
    Ok((BoostedEnsemble::from_stages(stages)?, BoostTrace { rounds }))
}

fn weighted_fraction(weights: &[f64], correct: &[bool]) -> f64 {
    let total: f64 = weights.iter().sum();
    weights
        .iter()
        .zip(correct)
        .filter(|(_, &ok)| ok)
        .map(|(w, _)| w)
        .sum::<f64>()
        / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureSchema;
    use crate::tree::Node;

    fn leaf(dist: &[f64]) -> DecisionTree {
        DecisionTree::from_nodes(
            1,
            dist.len(),
            vec![Node::Leaf {
                distribution: dist.to_vec(),
            }],
        )
        .unwrap()
    }

    fn toy() -> Dataset {
        let schema = FeatureSchema::new(["a", "b", "c"]).unwrap();
        let rows = (0..90).map(|i| {
            let c = i % 3;
            (
                vec![(c * 10 + i % 7) as f64, (i % 5) as f64, ((i * 31) % 17) as f64],
                format!("C{c}"),
            )
        });
        Dataset::from_labeled_rows(schema, rows).unwrap()
    }

    #[test]
    fn default_subset_size_for_eight_features_is_four() {
        assert_eq!(default_feature_sample_size(8), 4);
        assert_eq!(default_feature_sample_size(34), 6);
        assert_eq!(default_feature_sample_size(1), 1);
    }

    #[test]
    fn hundred_trees_by_default() {
        let f = train_forest(&toy(), &ForestConfig::default()).unwrap();
        assert_eq!(f.trees().len(), 100);
    }

    #[test]
    fn forest_averages_and_breaks_ties_low() {
        let f = Forest::from_trees(vec![leaf(&[1.0, 0.0]), leaf(&[0.0, 1.0])]).unwrap();
        assert_eq!(f.predict_proba(&[3.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(f.predict(&[3.0]).unwrap(), 0);
        let f = Forest::from_trees(vec![leaf(&[1.0, 0.0]); 3]).unwrap();
        assert_eq!(f.predict_proba(&[0.0]).unwrap(), vec![1.0, 0.0]);
        assert!(f.predict(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn degenerate_forest_equals_base_tree() {
        let d = toy();
        let cfg = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            feature_sample_size: Some(3),
            ..ForestConfig::default()
        };
        let f = train_forest(&d, &cfg).unwrap();
        let t = train_tree(&d, &vec![1.0; d.len()], &TreeConfig::unpruned()).unwrap();
        assert_eq!(f.trees()[0].nodes(), t.nodes());
    }

    #[test]
    fn forest_parallel_matches_serial() {
        let d = toy();
        let mut cfg = ForestConfig {
            n_trees: 16,
            ..ForestConfig::default()
        };
        let a = train_forest(&d, &cfg).unwrap();
        cfg.parallel = false;
        let b = train_forest(&d, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn worked_reweight_example() {
        let up = reweight(&[0.25; 4], &[false, true, true, true]).unwrap();
        assert_eq!(up.error, 0.25);
        assert!((up.beta - 1.0 / 3.0).abs() < 1e-15);
        let want = [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        for (g, w) in up.weights.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
        assert!((up.alpha - 3f64.ln()).abs() < 1e-12);
        assert!(reweight(&[0.25; 4], &[false, false, true, true]).is_none());
    }

    #[test]
    fn perfect_first_round_stops() {
        let schema = FeatureSchema::new(["x"]).unwrap();
        let rows = (0..10).map(|i| (vec![i as f64], if i < 5 { "A" } else { "B" }));
        let d = Dataset::from_labeled_rows(schema, rows).unwrap();
        let (e, trace) = train_adaboost_m1_traced(&d, &BoostConfig::default(), &TreeConfig::default()).unwrap();
        assert_eq!(e.stages().len(), 1);
        assert_eq!(trace.rounds.len(), 1);
        assert_eq!(trace.rounds[0].error, 0.0);
        assert!(e.stages()[0].1.is_finite() && e.stages()[0].1 > 0.0);
    }

    #[test]
    fn adaboost_vote_normalizes() {
        let a = 3f64.ln();
        let e = BoostedEnsemble::from_stages(vec![(leaf(&[1.0, 0.0]), a), (leaf(&[0.0, 1.0]), a)]).unwrap();
        assert_eq!(e.predict_proba(&[0.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(e.predict(&[0.0]).unwrap(), 0);
        let single = BoostedEnsemble::from_stages(vec![(leaf(&[0.2, 0.8]), 0.7)]).unwrap();
        assert_eq!(single.predict_proba(&[0.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn boosting_keeps_weights_normalized() {
        let d = toy();
        let (e, trace) = train_adaboost_m1_traced(&d, &BoostConfig::default(), &TreeConfig::default()).unwrap();
        assert!(!e.stages().is_empty());
        for r in trace.rounds.iter().filter(|r| r.retained && !r.fallback) {
            assert!(r.error < 0.5);
            assert!(r.alpha > 0.0);
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_class_rejected() {
        let schema = FeatureSchema::new(["x"]).unwrap();
        let d = Dataset::from_labeled_rows(schema, [(vec![1.0], "A"), (vec![2.0], "A")]).unwrap();
        assert!(train_adaboost_m1(&d, &BoostConfig::default(), &TreeConfig::default()).is_err());
    }
}
