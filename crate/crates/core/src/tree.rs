//! C4.5-style decision trees over numeric features.
//!
//! Splits are binary (`value <= threshold` goes left) and chosen by gain
//! ratio over the midpoints between consecutive distinct values. Record
//! weights thread through every entropy computation, so boosting can
//! reweight instead of resample. Pruning is pessimistic subtree
//! replacement using an upper confidence bound on each leaf's error rate.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::util::argmax;

/// Information gains at or below this are treated as zero.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    /// Minimum weight on each side of a split, in record-equivalents.
    pub min_leaf_weight: f64,
    pub pruning: bool,
    pub prune_confidence: f64,
    /// When set, each node only considers this many randomly chosen features.
    pub feature_sample_size: Option<usize>,
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            min_leaf_weight: 2.0,
            pruning: true,
            prune_confidence: 0.25,
            feature_sample_size: None,
            seed: 0,
        }
    }
}

impl TreeConfig {
    /// Fully grown tree: no pruning, one record per leaf allowed.
    pub fn unpruned() -> Self {
        TreeConfig {
            min_leaf_weight: 1.0,
            pruning: false,
            ..TreeConfig::default()
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if !(self.min_leaf_weight >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "min_leaf_weight {} must be >= 1",
                self.min_leaf_weight
            )));
        }
        if !(self.prune_confidence > 0.0 && self.prune_confidence < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "prune_confidence {} must lie in (0, 1)",
                self.prune_confidence
            )));
        }
        if let Some(k) = self.feature_sample_size {
            if k == 0 || k > n_features {
                return Err(Error::InvalidArgument(format!(
                    "feature_sample_size {k} must lie in 1..={n_features}"
                )));
            }
        }
        Ok(())
    }
}

/// Arena node. Children always sit after their parent (preorder layout).
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        distribution: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    n_features: usize,
    n_classes: usize,
    nodes: Vec<Node>,
}

impl DecisionTree {
    /// Rebuilds a tree from its preorder node list, checking the layout.
    pub fn from_nodes(n_features: usize, n_classes: usize, nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::ModelFormat("tree has no nodes".into()));
        }
        for (i, node) in nodes.iter().enumerate() {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= n_features
                        || !threshold.is_finite()
                        || *left <= i
                        || *right <= i
                        || *left >= nodes.len()
                        || *right >= nodes.len()
                    {
                        return Err(Error::ModelFormat(format!("malformed split node {i}")));
                    }
                }
                Node::Leaf { distribution } => {
                    if distribution.len() != n_classes
                        || distribution.iter().any(|p| !p.is_finite() || *p < 0.0)
                    {
                        return Err(Error::ModelFormat(format!("malformed leaf node {i}")));
                    }
                }
            }
        }
        Ok(DecisionTree {
            n_features,
            n_classes,
            nodes,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub(crate) fn leaf_distribution(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { distribution } => return distribution,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub(crate) fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::Length {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Class distribution of the leaf `x` lands in.
    pub fn predict_proba(&self, x: &[f64]) -> Result<&[f64]> {
        self.check_len(x)?;
        Ok(self.leaf_distribution(x))
    }

    /// Most probable class; the lowest class index wins ties.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(self.predict_proba(x)?))
    }
}

fn entropy(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| {
            let p = w / total;
            -p * p.log2()
        })
        .sum()
}

/// Gain ratio of splitting `parent` class weights into `left` and `right`.
/// Zero when either side is empty or the gain is not positive.
pub(crate) fn split_gain_ratio(parent: &[f64], left: &[f64], right: &[f64]) -> f64 {
    let wl: f64 = left.iter().sum();
    let wr: f64 = right.iter().sum();
    let w = wl + wr;
    if wl <= 0.0 || wr <= 0.0 {
        return 0.0;
    }
    let (pl, pr) = (wl / w, wr / w);
    let gain = entropy(parent) - pl * entropy(left) - pr * entropy(right);
    if gain <= MIN_GAIN {
        return 0.0;
    }
    let split_info = -pl * pl.log2() - pr * pr.log2();
    gain / split_info
}

/// Gain ratio of the binary split `x[feature] <= threshold` over the
/// weighted records of `d`.
pub fn gain_ratio(d: &Dataset, weights: &[f64], feature: usize, threshold: f64) -> Result<f64> {
    if weights.len() != d.len() {
        return Err(Error::Length {
            expected: d.len(),
            got: weights.len(),
        });
    }
    if feature >= d.n_features() {
        return Err(Error::InvalidArgument(format!("feature index {feature} out of range")));
    }
    let k = d.n_classes();
    let mut left = vec![0.0; k];
    let mut right = vec![0.0; k];
    for (r, &w) in d.records().iter().zip(weights) {
        if r.values[feature] <= threshold {
            left[r.label] += w;
        } else {
            right[r.label] += w;
        }
    }
    let parent: Vec<f64> = left.iter().zip(&right).map(|(a, b)| a + b).collect();
    Ok(split_gain_ratio(&parent, &left, &right))
}

/// Upper confidence bound on a leaf's error rate (Wilson score interval),
/// scaled to an expected error weight.
fn pessimistic_errors(weight: f64, errors: f64, z: f64) -> f64 {
    if weight <= 0.0 {
        return 0.0;
    }
    let f = errors / weight;
    let z2 = z * z;
    let upper = (f + z2 / (2.0 * weight)
        + z * (f / weight - f * f / weight + z2 / (4.0 * weight * weight)).max(0.0).sqrt())
        / (1.0 + z2 / weight);
    weight * upper
}

enum Grown {
    Leaf {
        class_weights: Vec<f64>,
    },
    Split {
        class_weights: Vec<f64>,
        feature: usize,
        threshold: f64,
        left: Box<Grown>,
        right: Box<Grown>,
    },
}

impl Grown {
    fn class_weights(&self) -> &[f64] {
        match self {
            Grown::Leaf { class_weights } | Grown::Split { class_weights, .. } => class_weights,
        }
    }

    fn leaf_errors(&self) -> (f64, f64) {
        let cw = self.class_weights();
        let total: f64 = cw.iter().sum();
        let best = cw[argmax(cw)];
        (total, total - best)
    }

    /// Replaces subtrees whose pessimistic error as a leaf does not exceed
    /// the summed pessimistic error of their leaves. Returns the estimate
    /// for what remains.
    fn prune(&mut self, z: f64) -> f64 {
        let (total, err) = self.leaf_errors();
        let as_leaf = pessimistic_errors(total, err, z);
        let subtree = match self {
            Grown::Leaf { .. } => return as_leaf,
            Grown::Split { left, right, .. } => left.prune(z) + right.prune(z),
        };
        if as_leaf <= subtree + 1e-9 {
            let class_weights = self.class_weights().to_vec();
            *self = Grown::Leaf { class_weights };
            as_leaf
        } else {
            subtree
        }
    }

    fn flatten(self, out: &mut Vec<Node>) -> usize {
        let at = out.len();
        match self {
            Grown::Leaf { class_weights } => {
                let total: f64 = class_weights.iter().sum();
                let distribution = class_weights.iter().map(|w| w / total).collect();
                out.push(Node::Leaf { distribution });
            }
            Grown::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                out.push(Node::Leaf {
                    distribution: Vec::new(),
                });
                let l = left.flatten(out);
                let r = right.flatten(out);
                out[at] = Node::Split {
                    feature,
                    threshold,
                    left: l,
                    right: r,
                };
            }
        }
        at
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    ratio: f64,
}

struct Grower<'a> {
    values: Vec<&'a [f64]>,
    labels: Vec<usize>,
    weights: Vec<f64>,
    n_features: usize,
    n_classes: usize,
    cfg: &'a TreeConfig,
    rng: ChaCha8Rng,
}

impl Grower<'_> {
    fn class_weights(&self, items: &[usize]) -> Vec<f64> {
        let mut cw = vec![0.0; self.n_classes];
        for &i in items {
            cw[self.labels[i]] += self.weights[i];
        }
        cw
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        match self.cfg.feature_sample_size {
            Some(k) if k < self.n_features => {
                let mut f = index::sample(&mut self.rng, self.n_features, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..self.n_features).collect(),
        }
    }

    /// Highest gain ratio; ties go to the lower feature, then the lower
    /// threshold. If no split has positive gain (XOR-like nodes), the most
    /// balanced admissible split is returned so impure nodes keep growing.
    fn best_split(&mut self, items: &[usize], parent: &[f64]) -> Option<Candidate> {
        let min_side = self.cfg.min_leaf_weight;
        let mut best: Option<Candidate> = None;
        let mut fallback: Option<Candidate> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(items.len());
        for feature in self.candidate_features() {
            sorted.clear();
            sorted.extend(items.iter().map(|&i| (self.values[i][feature], i)));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            if sorted[0].0 == sorted[sorted.len() - 1].0 {
                continue;
            }
            let mut left = vec![0.0; self.n_classes];
            let mut right = parent.to_vec();
            let mut wl = 0.0;
            let total: f64 = parent.iter().sum();
            for pos in 0..sorted.len() - 1 {
                let (v, i) = sorted[pos];
                let w = self.weights[i];
                let c = self.labels[i];
                left[c] += w;
                right[c] -= w;
                wl += w;
                let next = sorted[pos + 1].0;
                if next == v {
                    continue;
                }
                if wl < min_side || total - wl < min_side {
                    continue;
                }
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                let ratio = split_gain_ratio(parent, &left, &right);
                if ratio <= 0.0 {
                    // Keep the most balanced zero-gain split in reserve.
                    let p = wl / total;
                    let balance = -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
                    if fallback.as_ref().is_none_or(|b| balance > b.ratio) {
                        fallback = Some(Candidate {
                            feature,
                            threshold,
                            ratio: balance,
                        });
                    }
                    continue;
                }
                if best.as_ref().is_none_or(|b| ratio > b.ratio) {
                    best = Some(Candidate {
                        feature,
                        threshold,
                        ratio,
                    });
                }
            }
        }
        best.or(fallback)
    }

    fn grow(&mut self, items: Vec<usize>) -> Grown {
        let class_weights = self.class_weights(&items);
        let total: f64 = class_weights.iter().sum();
        let nonzero = class_weights.iter().filter(|&&w| w > 0.0).count();
        if nonzero <= 1 || total < 2.0 * self.cfg.min_leaf_weight {
            return Grown::Leaf { class_weights };
        }
        let Some(split) = self.best_split(&items, &class_weights) else {
            return Grown::Leaf { class_weights };
        };
        let (l, r): (Vec<usize>, Vec<usize>) = items
            .into_iter()
            .partition(|&i| self.values[i][split.feature] <= split.threshold);
        let left = Box::new(self.grow(l));
        let right = Box::new(self.grow(r));
        Grown::Split {
            class_weights,
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        }
    }
}

/// Grows (and by default prunes) a tree on the weighted records of `d`.
///
/// Weights are rescaled internally to sum to the record count, so
/// `min_leaf_weight` is measured in record-equivalents and multiplying
/// every weight by a constant does not change the tree. Records with zero
/// weight take no part in training.
pub fn train_tree(d: &Dataset, weights: &[f64], cfg: &TreeConfig) -> Result<DecisionTree> {
    cfg.validate(d.n_features())?;
    if weights.len() != d.len() {
        return Err(Error::Length {
            expected: d.len(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroWeight);
    }
    let scale = d.len() as f64 / total;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut scaled = Vec::new();
    for (r, &w) in d.records().iter().zip(weights) {
        if w > 0.0 {
            values.push(r.values.as_slice());
            labels.push(r.label);
            scaled.push(w * scale);
        }
    }
    let n = values.len();
    let mut grower = Grower {
        values,
        labels,
        weights: scaled,
        n_features: d.n_features(),
        n_classes: d.n_classes(),
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    let mut root = grower.grow((0..n).collect());
    if cfg.pruning {
        let z = Normal::standard().inverse_cdf(1.0 - cfg.prune_confidence);
        root.prune(z);
    }
    let mut nodes = Vec::new();
    root.flatten(&mut nodes);
    Ok(DecisionTree {
        n_features: d.n_features(),
        n_classes: d.n_classes(),
        nodes,
    })
}
