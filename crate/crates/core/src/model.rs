//! Trained-model container and its binary file format.
//!
//! Layout: the 8-byte magic `MIBIDS\x00M`, a little-endian `u32` format
//! version, then sections. Each section is a 4-byte ASCII tag, a `u64`
//! payload length and the payload. Integers are little-endian, reals are
//! IEEE-754 binary64, strings are a `u32` byte length plus UTF-8. Readers
//! skip sections they do not recognise.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::dataset::{apply_normalizer, fit_normalizer, Dataset, FeatureSchema, Normalizer};
use crate::ensemble::{train_adaboost_m1, train_forest, BoostConfig, BoostedEnsemble, Forest, ForestConfig};
use crate::error::{Error, Result};
use crate::mlp::{train_mlp, Mlp, MlpConfig};
use crate::tree::{train_tree, DecisionTree, Node, TreeConfig};
use crate::util::argmax;

pub const MAGIC: [u8; 8] = *b"MIBIDS\x00M";
pub const FORMAT_VERSION: u32 = 1;

const SEC_META: [u8; 4] = *b"META";
const SEC_NORM: [u8; 4] = *b"NORM";
const SEC_CONF: [u8; 4] = *b"CONF";
const SEC_DATA: [u8; 4] = *b"DATA";
const SEC_SPLT: [u8; 4] = *b"SPLT";
const SEC_BODY: [u8; 4] = *b"BODY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Tree,
    Forest,
    AdaBoost,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Tree, ModelKind::Forest, ModelKind::AdaBoost, ModelKind::Mlp];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Tree => "tree",
            ModelKind::Forest => "forest",
            ModelKind::AdaBoost => "adaboost",
            ModelKind::Mlp => "mlp",
        }
    }

    fn code(self) -> u8 {
        match self {
            ModelKind::Tree => 1,
            ModelKind::Forest => 2,
            ModelKind::AdaBoost => 3,
            ModelKind::Mlp => 4,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.code() == c)
            .ok_or_else(|| Error::ModelFormat(format!("unknown model kind code {c}")))
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tree" | "j48" | "c45" => Ok(ModelKind::Tree),
            "forest" | "rf" | "random-forest" => Ok(ModelKind::Forest),
            "adaboost" | "adaboostm1" | "boost" => Ok(ModelKind::AdaBoost),
            "mlp" | "ann" => Ok(ModelKind::Mlp),
            _ => Err(Error::InvalidArgument(format!(
                "unknown model kind {s:?} (expected tree, forest, adaboost or mlp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Tree(DecisionTree),
    Forest(Forest),
    AdaBoost(BoostedEnsemble),
    Mlp(Mlp),
}

impl Classifier {
    pub fn kind(&self) -> ModelKind {
        match self {
            Classifier::Tree(_) => ModelKind::Tree,
            Classifier::Forest(_) => ModelKind::Forest,
            Classifier::AdaBoost(_) => ModelKind::AdaBoost,
            Classifier::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Classifier::Tree(t) => t.n_features(),
            Classifier::Forest(f) => f.n_features(),
            Classifier::AdaBoost(b) => b.n_features(),
            Classifier::Mlp(m) => m.n_inputs(),
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Classifier::Tree(t) => t.n_classes(),
            Classifier::Forest(f) => f.n_classes(),
            Classifier::AdaBoost(b) => b.n_classes(),
            Classifier::Mlp(m) => m.n_outputs(),
        }
    }

    /// Class scores for one (already normalized) feature vector.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Classifier::Tree(t) => t.predict_proba(x).map(<[f64]>::to_vec),
            Classifier::Forest(f) => f.predict_proba(x),
            Classifier::AdaBoost(b) => b.predict_proba(x),
            Classifier::Mlp(m) => m.forward(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        self.scores(x).map(|s| argmax(&s))
    }
}

/// How the training data was split; `evaluate --heldout` replays it.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitInfo {
    pub seed: u64,
    pub train_fraction: f64,
    pub stratified: bool,
    /// Feature group (or selection) the model was trained on.
    pub group: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub classifier: Classifier,
    pub schema: FeatureSchema,
    pub classes: Vec<String>,
    pub normalizer: Option<Normalizer>,
    /// Training hyperparameters as (key, value) text pairs.
    pub config: Vec<(String, String)>,
    /// SHA-256 of the full dataset the split was drawn from.
    pub fingerprint: [u8; 32],
    pub split: Option<SplitInfo>,
}

impl TrainedModel {
    pub fn new(
        classifier: Classifier,
        schema: FeatureSchema,
        classes: Vec<String>,
        normalizer: Option<Normalizer>,
    ) -> Result<Self> {
        let m = TrainedModel {
            classifier,
            schema,
            classes,
            normalizer,
            config: Vec::new(),
            fingerprint: [0; 32],
            split: None,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if self.classifier.n_features() != self.schema.len() {
            return Err(Error::ModelFormat(format!(
                "classifier expects {} features, schema has {}",
                self.classifier.n_features(),
                self.schema.len()
            )));
        }
        if self.classifier.n_classes() != self.classes.len() {
            return Err(Error::ModelFormat(format!(
                "classifier has {} classes, catalog has {}",
                self.classifier.n_classes(),
                self.classes.len()
            )));
        }
        if let Some(n) = &self.normalizer {
            if n.schema() != &self.schema {
                return Err(Error::ModelFormat("normalizer schema differs from model schema".into()));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        self.classifier.kind()
    }

    pub fn config_value(&self, key: &str) -> Option<&str> {
        self.config.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Predicts the class index of a row laid out in the model schema.
    pub fn predict_row(&self, row: &[f64]) -> Result<usize> {
        match &self.normalizer {
            Some(n) => self.classifier.predict(&n.apply_row(row)?),
            None => self.classifier.predict(row),
        }
    }

    /// Predicts rows whose columns follow `schema`; columns are matched to
    /// the model schema by name and extras are ignored.
    pub fn predict_rows(&self, schema: &FeatureSchema, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        let idx = self.schema.projection_from(schema)?;
        let mut buf = vec![0.0; idx.len()];
        rows.iter()
            .map(|r| {
                if r.len() != schema.len() {
                    return Err(Error::Length {
                        expected: schema.len(),
                        got: r.len(),
                    });
                }
                for (slot, &j) in buf.iter_mut().zip(&idx) {
                    *slot = r[j];
                }
                self.predict_row(&buf)
            })
            .collect()
    }

    /// Predicted class indices (into `self.classes`) for every record.
    pub fn predict_dataset(&self, d: &Dataset) -> Result<Vec<usize>> {
        let rows: Vec<Vec<f64>> = d.records().iter().map(|r| r.values.clone()).collect();
        self.predict_rows(d.schema(), &rows)
    }

    pub fn fingerprint_hex(&self) -> String {
        hex(&self.fingerprint)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());

        let mut w = Enc::default();
        w.u8(self.kind().code());
        w.strings(self.schema.names());
        w.strings(&self.classes);
        section(&mut out, SEC_META, w.0);

        if let Some(n) = &self.normalizer {
            let mut w = Enc::default();
            w.f64s(n.min());
            w.f64s(n.max());
            section(&mut out, SEC_NORM, w.0);
        }

        let mut w = Enc::default();
        w.u32(self.config.len() as u32);
        for (k, v) in &self.config {
            w.str(k);
            w.str(v);
        }
        section(&mut out, SEC_CONF, w.0);

        section(&mut out, SEC_DATA, self.fingerprint.to_vec());

        if let Some(s) = &self.split {
            let mut w = Enc::default();
            w.u64(s.seed);
            w.f64(s.train_fraction);
            w.u8(u8::from(s.stratified));
            w.str(&s.group);
            section(&mut out, SEC_SPLT, w.0);
        }

        let mut w = Enc::default();
        match &self.classifier {
            Classifier::Tree(t) => w.tree(t),
            Classifier::Forest(f) => {
                w.u64(f.trees().len() as u64);
                for t in f.trees() {
                    w.tree(t);
                }
            }
            Classifier::AdaBoost(b) => {
                w.u64(b.stages().len() as u64);
                for (t, alpha) in b.stages() {
                    w.f64(*alpha);
                    w.tree(t);
                }
            }
            Classifier::Mlp(m) => {
                w.u32(m.n_inputs() as u32);
                w.u32(m.n_hidden() as u32);
                w.u32(m.n_outputs() as u32);
                w.f64s(&m.w_hidden);
                w.f64s(&m.b_hidden);
                w.f64s(&m.w_output);
                w.f64s(&m.b_output);
            }
        }
        section(&mut out, SEC_BODY, w.0);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Dec::new(bytes, "header");
        if r.take(8)? != MAGIC {
            return Err(Error::ModelFormat("not a model file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "format version {version} is not supported (expected {FORMAT_VERSION})"
            )));
        }

        let mut meta = None;
        let mut norm = None;
        let mut config = Vec::new();
        let mut fingerprint = [0u8; 32];
        let mut split = None;
        let mut body = None;
        while !r.is_empty() {
            let tag: [u8; 4] = r.take(4)?.try_into().unwrap();
            let len = r.u64()?;
            let len = usize::try_from(len).map_err(|_| Error::ModelFormat("section too large".into()))?;
            let payload = r.take(len)?;
            match tag {
                SEC_META => meta = Some(payload),
                SEC_NORM => norm = Some(payload),
                SEC_CONF => {
                    let mut s = Dec::new(payload, "CONF");
                    let n = s.u32()?;
                    for _ in 0..n {
                        config.push((s.str()?, s.str()?));
                    }
                    s.finish()?;
                }
                SEC_DATA => {
                    fingerprint = payload
                        .try_into()
                        .map_err(|_| Error::ModelFormat("DATA section must be 32 bytes".into()))?;
                }
                SEC_SPLT => {
                    let mut s = Dec::new(payload, "SPLT");
                    split = Some(SplitInfo {
                        seed: s.u64()?,
                        train_fraction: s.f64()?,
                        stratified: s.u8()? != 0,
                        group: s.str()?,
                    });
                    s.finish()?;
                }
                SEC_BODY => body = Some(payload),
                _ => {}
            }
        }

        let mut m = Dec::new(meta.ok_or_else(|| Error::ModelFormat("missing META section".into()))?, "META");
        let kind = ModelKind::from_code(m.u8()?)?;
        let schema = FeatureSchema::new(m.strings()?)?;
        let classes = m.strings()?;
        m.finish()?;

        let normalizer = match norm {
            Some(p) => {
                let mut n = Dec::new(p, "NORM");
                let min = n.f64s()?;
                let max = n.f64s()?;
                n.finish()?;
                Some(Normalizer::from_bounds(schema.clone(), min, max)?)
            }
            None => None,
        };

        let mut b = Dec::new(body.ok_or_else(|| Error::ModelFormat("missing BODY section".into()))?, "BODY");
        let classifier = match kind {
            ModelKind::Tree => Classifier::Tree(b.tree()?),
            ModelKind::Forest => {
                let n = b.count()?;
                let trees = (0..n).map(|_| b.tree()).collect::<Result<Vec<_>>>()?;
                Classifier::Forest(Forest::from_trees(trees)?)
            }
            ModelKind::AdaBoost => {
                let n = b.count()?;
                let stages = (0..n)
                    .map(|_| {
                        let alpha = b.f64()?;
                        Ok((b.tree()?, alpha))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Classifier::AdaBoost(BoostedEnsemble::from_stages(stages)?)
            }
            ModelKind::Mlp => {
                let (i, h, o) = (b.u32()? as usize, b.u32()? as usize, b.u32()? as usize);
                let (wh, bh, wo, bo) = (b.f64s()?, b.f64s()?, b.f64s()?, b.f64s()?);
                Classifier::Mlp(Mlp::from_parts(i, h, o, wh, bh, wo, bo)?)
            }
        };
        b.finish()?;

        let model = TrainedModel {
            classifier,
            schema,
            classes,
            normalizer,
            config,
            fingerprint,
            split,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Hyperparameters for every learner; [`fit`] reads the ones its kind needs.
#[derive(Debug, Clone, Default)]
pub struct TrainParams {
    pub tree: TreeConfig,
    pub forest: ForestConfig,
    pub boost: BoostConfig,
    pub mlp: MlpConfig,
    /// Min-max scale inputs to [-1, 1]. `None` scales for the perceptron only.
    pub normalize: Option<bool>,
}

impl TrainParams {
    /// Points every learner's seed at `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.tree.seed = seed;
        self.forest.seed = seed;
        self.boost.seed = seed;
        self.mlp.seed = seed;
        self
    }
}

fn tree_echo(cfg: &TreeConfig, prefix: &str) -> Vec<(String, String)> {
    vec![
        (format!("{prefix}min_leaf_weight"), cfg.min_leaf_weight.to_string()),
        (format!("{prefix}pruning"), cfg.pruning.to_string()),
        (format!("{prefix}prune_confidence"), cfg.prune_confidence.to_string()),
    ]
}

/// Trains a model of `kind` on `train` and records its configuration.
/// Fingerprint and split metadata are left for the caller.
pub fn fit(kind: ModelKind, train: &Dataset, p: &TrainParams) -> Result<TrainedModel> {
    let normalizer = if p.normalize.unwrap_or(kind == ModelKind::Mlp) {
        Some(fit_normalizer(train)?)
    } else {
        None
    };
    let scaled;
    let data = match &normalizer {
        Some(n) => {
            scaled = apply_normalizer(n, train)?;
            &scaled
        }
        None => train,
    };
    let (m, k) = (train.n_features(), train.n_classes());
    let kv = |k: &str, v: String| (k.to_string(), v);
    let (classifier, config) = match kind {
        ModelKind::Tree => {
            let t = train_tree(data, &vec![1.0; data.len()], &p.tree)?;
            let mut c = tree_echo(&p.tree, "");
            c.push(kv("seed", p.tree.seed.to_string()));
            (Classifier::Tree(t), c)
        }
        ModelKind::Forest => {
            let f = train_forest(data, &p.forest)?;
            let c = vec![
                kv("n_trees", p.forest.n_trees.to_string()),
                kv("feature_sample_size", p.forest.resolved_feature_sample_size(m).to_string()),
                kv("bootstrap", p.forest.bootstrap.to_string()),
                kv("min_leaf_weight", p.forest.min_leaf_weight.to_string()),
                kv("seed", p.forest.seed.to_string()),
            ];
            (Classifier::Forest(f), c)
        }
        ModelKind::AdaBoost => {
            let b = train_adaboost_m1(data, &p.boost, &p.tree)?;
            let mut c = vec![
                kv("n_rounds", p.boost.n_rounds.to_string()),
                kv("stages", b.stages().len().to_string()),
                kv("seed", p.boost.seed.to_string()),
            ];
            c.extend(tree_echo(&p.tree, "base."));
            (Classifier::AdaBoost(b), c)
        }
        ModelKind::Mlp => {
            let net = train_mlp(data, &p.mlp)?;
            let c = vec![
                kv("learning_rate", p.mlp.learning_rate.to_string()),
                kv("momentum", p.mlp.momentum.to_string()),
                kv("epochs", p.mlp.epochs.to_string()),
                kv("hidden_units", p.mlp.resolved_hidden_units(m, k).to_string()),
                kv("seed", p.mlp.seed.to_string()),
            ];
            (Classifier::Mlp(net), c)
        }
    };
    let mut model = TrainedModel::new(classifier, train.schema().clone(), train.classes().to_vec(), normalizer)?;
    model.config = config;
    Ok(model)
}

/// SHA-256 over schema, class catalog and every record, in order.
pub fn dataset_fingerprint(d: &Dataset) -> [u8; 32] {
    let mut h = Sha256::new();
    let mut w = Enc::default();
    w.strings(d.schema().names());
    w.strings(d.classes());
    w.u64(d.len() as u64);
    h.update(&w.0);
    for r in d.records() {
        for v in &r.values {
            h.update(v.to_le_bytes());
        }
        h.update((r.label as u64).to_le_bytes());
    }
    h.finalize().into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn section(out: &mut Vec<u8>, tag: [u8; 4], payload: Vec<u8>) {
    out.extend_from_slice(&tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
}

#[derive(Default)]
struct Enc(Vec<u8>);

impl Enc {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for x in v {
            self.f64(*x);
        }
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }

    fn strings(&mut self, v: &[String]) {
        self.u32(v.len() as u32);
        for s in v {
            self.str(s);
        }
    }

    fn tree(&mut self, t: &DecisionTree) {
        self.u32(t.n_features() as u32);
        self.u32(t.n_classes() as u32);
        self.u64(t.nodes().len() as u64);
        for node in t.nodes() {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    self.u8(0);
                    self.u32(*feature as u32);
                    self.f64(*threshold);
                    self.u64(*left as u64);
                    self.u64(*right as u64);
                }
                Node::Leaf { distribution } => {
                    self.u8(1);
                    for p in distribution {
                        self.f64(*p);
                    }
                }
            }
        }
    }
}

struct Dec<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Dec<'a> {
    fn new(buf: &'a [u8], what: &'static str) -> Self {
        Dec { buf, pos: 0, what }
    }

    fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::ModelFormat(format!(
                "{} truncated at byte {} (needed {n} more)",
                self.what, self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn finish(&self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::ModelFormat(format!("{} has {} trailing bytes", self.what, self.buf.len() - self.pos)))
        }
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A length prefix, checked against the bytes left so corrupt files
    /// cannot request huge allocations.
    fn count(&mut self) -> Result<usize> {
        let n = self.u64()?;
        if n > (self.buf.len() - self.pos) as u64 {
            return Err(Error::ModelFormat(format!("{}: implausible count {n}", self.what)));
        }
        Ok(n as usize)
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.count()?;
        (0..n).map(|_| self.f64()).collect()
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::ModelFormat(format!("{}: invalid UTF-8", self.what)))
    }

    fn strings(&mut self) -> Result<Vec<String>> {
        let n = self.u32()? as usize;
        if n > self.buf.len() - self.pos {
            return Err(Error::ModelFormat(format!("{}: implausible count {n}", self.what)));
        }
        (0..n).map(|_| self.str()).collect()
    }

    fn tree(&mut self) -> Result<DecisionTree> {
        let n_features = self.u32()? as usize;
        let n_classes = self.u32()? as usize;
        let n = self.count()?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            nodes.push(match self.u8()? {
                0 => Node::Split {
                    feature: self.u32()? as usize,
                    threshold: self.f64()?,
                    left: self.u64()? as usize,
                    right: self.u64()? as usize,
                },
                1 => Node::Leaf {
                    distribution: (0..n_classes).map(|_| self.f64()).collect::<Result<_>>()?,
                },
                t => return Err(Error::ModelFormat(format!("{}: unknown node tag {t}", self.what))),
            });
        }
        DecisionTree::from_nodes(n_features, n_classes, nodes)
    }
}
