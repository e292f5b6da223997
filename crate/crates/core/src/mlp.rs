//! One-hidden-layer sigmoid perceptron trained by per-record
//! backpropagation with momentum on squared error.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::util::argmax;

/// Initial weights are drawn uniformly from [-INIT_RANGE, INIT_RANGE].
pub const INIT_RANGE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// `None` means ceil((M + K) / 2).
    pub hidden_units: Option<usize>,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            learning_rate: 0.3,
            momentum: 0.2,
            epochs: 500,
            hidden_units: None,
            seed: 42,
        }
    }
}

pub fn default_hidden_units(n_features: usize, n_classes: usize) -> usize {
    (n_features + n_classes).div_ceil(2).max(1)
}

impl MlpConfig {
    pub fn resolved_hidden_units(&self, n_features: usize, n_classes: usize) -> usize {
        self.hidden_units
            .unwrap_or_else(|| default_hidden_units(n_features, n_classes))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum {} must lie in [0, 1)",
                self.momentum
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.hidden_units == Some(0) {
            return Err(Error::InvalidArgument("hidden_units must be at least 1".into()));
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Weights are row-major: `w_hidden[j * n_inputs + i]` connects input `i`
/// to hidden unit `j`, `w_output[k * n_hidden + j]` hidden `j` to output `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    n_inputs: usize,
    n_hidden: usize,
    n_outputs: usize,
    pub w_hidden: Vec<f64>,
    pub b_hidden: Vec<f64>,
    pub w_output: Vec<f64>,
    pub b_output: Vec<f64>,
}

/// Same shapes as [`Mlp`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w_hidden: Vec<f64>,
    pub b_hidden: Vec<f64>,
    pub w_output: Vec<f64>,
    pub b_output: Vec<f64>,
}

impl Gradient {
    fn zeros_like(m: &Mlp) -> Self {
        Gradient {
            w_hidden: vec![0.0; m.w_hidden.len()],
            b_hidden: vec![0.0; m.b_hidden.len()],
            w_output: vec![0.0; m.w_output.len()],
            b_output: vec![0.0; m.b_output.len()],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.w_hidden
            .iter()
            .chain(&self.b_hidden)
            .chain(&self.w_output)
            .chain(&self.b_output)
    }
}

impl Mlp {
    pub fn zeros(n_inputs: usize, n_hidden: usize, n_outputs: usize) -> Self {
        Mlp {
            n_inputs,
            n_hidden,
            n_outputs,
            w_hidden: vec![0.0; n_hidden * n_inputs],
            b_hidden: vec![0.0; n_hidden],
            w_output: vec![0.0; n_outputs * n_hidden],
            b_output: vec![0.0; n_outputs],
        }
    }

    pub fn random(n_inputs: usize, n_hidden: usize, n_outputs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Mlp::zeros(n_inputs, n_hidden, n_outputs);
        for p in m.params_mut() {
            *p = rng.random_range(-INIT_RANGE..=INIT_RANGE);
        }
        m
    }

    /// Rebuilds a network from flat parameter arrays, checking their lengths.
    pub fn from_parts(
        n_inputs: usize,
        n_hidden: usize,
        n_outputs: usize,
        w_hidden: Vec<f64>,
        b_hidden: Vec<f64>,
        w_output: Vec<f64>,
        b_output: Vec<f64>,
    ) -> Result<Self> {
        if w_hidden.len() != n_hidden * n_inputs
            || b_hidden.len() != n_hidden
            || w_output.len() != n_outputs * n_hidden
            || b_output.len() != n_outputs
        {
            return Err(Error::ModelFormat("perceptron parameter shapes disagree".into()));
        }
        let m = Mlp {
            n_inputs,
            n_hidden,
            n_outputs,
            w_hidden,
            b_hidden,
            w_output,
            b_output,
        };
        if m.params().any(|p| !p.is_finite()) {
            return Err(Error::ModelFormat("non-finite perceptron weight".into()));
        }
        Ok(m)
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.w_hidden
            .iter()
            .chain(&self.b_hidden)
            .chain(&self.w_output)
            .chain(&self.b_output)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w_hidden
            .iter_mut()
            .chain(self.b_hidden.iter_mut())
            .chain(self.w_output.iter_mut())
            .chain(self.b_output.iter_mut())
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_inputs {
            return Err(Error::Length {
                expected: self.n_inputs,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_hidden)
            .map(|j| {
                let row = &self.w_hidden[j * self.n_inputs..(j + 1) * self.n_inputs];
                let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b_hidden[j];
                sigmoid(z)
            })
            .collect()
    }

    fn output(&self, h: &[f64]) -> Vec<f64> {
        (0..self.n_outputs)
            .map(|k| {
                let row = &self.w_output[k * self.n_hidden..(k + 1) * self.n_hidden];
                let z: f64 = row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + self.b_output[k];
                sigmoid(z)
            })
            .collect()
    }

    /// Output activations, one per class, each in (0, 1).
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        Ok(self.output(&self.hidden(x)))
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    /// Exact gradient of 0.5 * ||forward(x) - target||^2, plus that loss.
    pub fn gradient_with_loss(&self, x: &[f64], target: &[f64]) -> Result<(Gradient, f64)> {
        self.check_len(x)?;
        if target.len() != self.n_outputs {
            return Err(Error::Length {
                expected: self.n_outputs,
                got: target.len(),
            });
        }
        let h = self.hidden(x);
        let o = self.output(&h);
        let mut g = Gradient::zeros_like(self);
        let mut loss = 0.0;
        let delta_out: Vec<f64> = o
            .iter()
            .zip(target)
            .map(|(&ok, &tk)| {
                loss += 0.5 * (ok - tk) * (ok - tk);
                (ok - tk) * ok * (1.0 - ok)
            })
            .collect();
        for k in 0..self.n_outputs {
            g.b_output[k] = delta_out[k];
            for j in 0..self.n_hidden {
                g.w_output[k * self.n_hidden + j] = delta_out[k] * h[j];
            }
        }
        for j in 0..self.n_hidden {
            let back: f64 = (0..self.n_outputs)
                .map(|k| self.w_output[k * self.n_hidden + j] * delta_out[k])
                .sum();
            let delta = back * h[j] * (1.0 - h[j]);
            g.b_hidden[j] = delta;
            for i in 0..self.n_inputs {
                g.w_hidden[j * self.n_inputs + i] = delta * x[i];
            }
        }
        Ok((g, loss))
    }

    pub fn gradient(&self, x: &[f64], target: &[f64]) -> Result<Gradient> {
        self.gradient_with_loss(x, target).map(|(g, _)| g)
    }
}

/// Trains on `d`, which should already be scaled to [-1, 1]. Runs exactly
/// `cfg.epochs` passes; each pass visits the records once in a freshly
/// shuffled order and applies `dw = -lr * grad + momentum * dw_prev`
/// after every record.
pub fn train_mlp(d: &Dataset, cfg: &MlpConfig) -> Result<Mlp> {
    cfg.validate()?;
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if d.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::InvalidArgument("perceptron training needs at least two classes".into()));
    }
    let (m, k) = (d.n_features(), d.n_classes());
    let hidden = cfg.resolved_hidden_units(m, k);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = Mlp::random(m, hidden, k, rng.random());
    let mut velocity = Gradient::zeros_like(&net);
    let targets: Vec<Vec<f64>> = (0..k)
        .map(|c| (0..k).map(|j| if j == c { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut order: Vec<usize> = (0..d.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let r = &d.records()[i];
            let (g, loss) = net.gradient_with_loss(&r.values, &targets[r.label])?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, record: i });
            }
            let mut finite = true;
            for ((p, v), gi) in net.params_mut().zip(velocity_mut(&mut velocity)).zip(g.iter()) {
                *v = -cfg.learning_rate * gi + cfg.momentum * *v;
                *p += *v;
                finite &= p.is_finite();
            }
            if !finite {
                return Err(Error::Diverged { epoch, record: i });
            }
        }
    }
    Ok(net)
}

fn velocity_mut(v: &mut Gradient) -> impl Iterator<Item = &mut f64> {
    v.w_hidden
        .iter_mut()
        .chain(v.b_hidden.iter_mut())
        .chain(v.w_output.iter_mut())
        .chain(v.b_output.iter_mut())
}
