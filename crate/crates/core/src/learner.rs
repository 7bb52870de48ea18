//! Small differentiable classifier: an optional tanh hidden layer followed by
//! a softmax head, trained with Adam on cross-entropy.
//!
//! Parameters live in one flat vector laid out as
//! `[w1 (hidden x d), b1 (hidden), w2 (C x pen), b2 (C)]`, where `pen` is the
//! penultimate width (`hidden`, or `d` for the linear model). Row-major
//! throughout.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::ClassLabel;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    /// Width of the tanh hidden layer; 0 gives a linear softmax model.
    pub hidden_width: usize,
    pub learning_rate: f64,
    /// Training stops at the first epoch whose full-train accuracy reaches this.
    pub train_accuracy_target: f64,
    pub max_epochs: usize,
    pub minibatch_size: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            hidden_width: 32,
            learning_rate: 1.5e-4,
            train_accuracy_target: 0.98,
            max_epochs: 500,
            minibatch_size: 32,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        let t = self.train_accuracy_target;
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::config(format!(
                "train_accuracy_target must be in (0, 1], got {t}"
            )));
        }
        if self.minibatch_size == 0 {
            return Err(Error::config("minibatch_size must be positive"));
        }
        Ok(())
    }
}

/// Class posterior. Entries in `[0, 1]` summing to 1 within `1e-9`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::usage(format!(
                "probability vector needs at least 2 entries, got {}",
                values.len()
            )));
        }
        if values.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::usage(format!("probability entry outside [0, 1]: {values:?}")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::usage(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(ProbabilityVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Flattened `(p - e_argmax) ⊗ h`, class-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEmbedding(pub Vec<f64>);

impl GradientEmbedding {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    feature_dim: usize,
    hidden_width: usize,
    num_classes: usize,
    params: Vec<f64>,
}

struct Forward {
    hidden: Vec<f64>,
    probs: Vec<f64>,
}

impl Model {
    /// Fresh parameters: weights `N(0, 1) / sqrt(fan_in)`, biases zero.
    pub fn init(cfg: &LearnerConfig, feature_dim: usize, num_classes: usize, seed: u64) -> Self {
        assert!(feature_dim > 0 && num_classes > 0, "model dimensions must be positive");
        let mut model = Model::zeros(feature_dim, cfg.hidden_width, num_classes);
        let mut rng = seed::rng(seed);
        let pen = model.penultimate_dim();
        let (w1, w2) = (model.w1_range(), model.w2_range());
        let s1 = 1.0 / (feature_dim as f64).sqrt();
        for w in &mut model.params[w1] {
            *w = s1 * rng.sample::<f64, _>(StandardNormal);
        }
        let s2 = 1.0 / (pen as f64).sqrt();
        for w in &mut model.params[w2] {
            *w = s2 * rng.sample::<f64, _>(StandardNormal);
        }
        model
    }

    /// All parameters zero.
    pub fn zeros(feature_dim: usize, hidden_width: usize, num_classes: usize) -> Self {
        let mut m = Model {
            feature_dim,
            hidden_width,
            num_classes,
            params: Vec::new(),
        };
        m.params = vec![0.0; m.param_count()];
        m
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn penultimate_dim(&self) -> usize {
        if self.hidden_width == 0 {
            self.feature_dim
        } else {
            self.hidden_width
        }
    }

    pub fn param_count(&self) -> usize {
        let h = self.hidden_width;
        h * self.feature_dim + h + self.num_classes * self.penultimate_dim() + self.num_classes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn w1_range(&self) -> std::ops::Range<usize> {
        0..self.hidden_width * self.feature_dim
    }

    fn b1_range(&self) -> std::ops::Range<usize> {
        let s = self.w1_range().end;
        s..s + self.hidden_width
    }

    fn w2_range(&self) -> std::ops::Range<usize> {
        let s = self.b1_range().end;
        s..s + self.num_classes * self.penultimate_dim()
    }

    fn b2_range(&self) -> std::ops::Range<usize> {
        let s = self.w2_range().end;
        s..s + self.num_classes
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_dim {
            return Err(Error::usage(format!(
                "expected {} features, got {}",
                self.feature_dim,
                x.len()
            )));
        }
        Ok(())
    }

    fn hidden_of(&self, x: &[f64]) -> Vec<f64> {
        if self.hidden_width == 0 {
            return x.to_vec();
        }
        let w1 = &self.params[self.w1_range()];
        let b1 = &self.params[self.b1_range()];
        w1.chunks_exact(self.feature_dim)
            .zip(b1)
            .map(|(row, b)| (dot(row, x) + b).tanh())
            .collect()
    }

    fn forward(&self, x: &[f64]) -> Forward {
        let hidden = self.hidden_of(x);
        let w2 = &self.params[self.w2_range()];
        let b2 = &self.params[self.b2_range()];
        let logits: Vec<f64> = w2
            .chunks_exact(self.penultimate_dim())
            .zip(b2)
            .map(|(row, b)| dot(row, &hidden) + b)
            .collect();
        Forward {
            hidden,
            probs: softmax(&logits),
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<ProbabilityVector> {
        self.check_dim(x)?;
        Ok(ProbabilityVector(self.forward(x).probs))
    }

    /// Penultimate activation `h`: the hidden layer, or `x` itself when linear.
    pub fn penultimate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.hidden_of(x))
    }

    /// Gradient of the cross-entropy at the model's own hard prediction with
    /// respect to the output weights.
    pub fn gradient_embedding(&self, x: &[f64]) -> Result<GradientEmbedding> {
        self.check_dim(x)?;
        let Forward { hidden, mut probs } = self.forward(x);
        let y_hat = argmax(&probs);
        probs[y_hat] -= 1.0;
        let mut g = Vec::with_capacity(probs.len() * hidden.len());
        for r in &probs {
            g.extend(hidden.iter().map(|h| r * h));
        }
        Ok(GradientEmbedding(g))
    }

    fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.forward(x).probs)
    }

    /// Mean cross-entropy over the batch and its gradient in the flat
    /// parameter layout.
    pub fn loss_and_gradient(&self, xs: &[&[f64]], ys: &[ClassLabel]) -> Result<(f64, Vec<f64>)> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::usage("loss needs a non-empty batch with one label per row"));
        }
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            self.check_dim(x)?;
            if y.0 >= self.num_classes {
                return Err(Error::usage(format!("label {y} outside model classes")));
            }
            loss += self.accumulate(x, y.0, &mut grad);
        }
        let n = xs.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((loss / n, grad))
    }

    fn accumulate(&self, x: &[f64], y: usize, grad: &mut [f64]) -> f64 {
        let Forward { hidden, probs } = self.forward(x);
        let loss = -probs[y].max(f64::MIN_POSITIVE).ln();
        let pen = self.penultimate_dim();
        let mut dlogits = probs;
        dlogits[y] -= 1.0;

        let w2r = self.w2_range();
        let b2r = self.b2_range();
        for (c, &dl) in dlogits.iter().enumerate() {
            let row = &mut grad[w2r.start + c * pen..w2r.start + (c + 1) * pen];
            for (g, h) in row.iter_mut().zip(&hidden) {
                *g += dl * h;
            }
            grad[b2r.start + c] += dl;
        }

        if self.hidden_width > 0 {
            let w2 = &self.params[w2r.clone()];
            let w1r = self.w1_range();
            let b1r = self.b1_range();
            for (j, h) in hidden.iter().enumerate() {
                let dh: f64 = dlogits
                    .iter()
                    .enumerate()
                    .map(|(c, dl)| w2[c * pen + j] * dl)
                    .sum();
                let dpre = dh * (1.0 - h * h);
                let row = &mut grad[w1r.start + j * self.feature_dim..w1r.start + (j + 1) * self.feature_dim];
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += dpre * xi;
                }
                grad[b1r.start + j] += dpre;
            }
        }
        loss
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Rows and labels the learner trains on.
#[derive(Debug, Clone, Default)]
pub struct TrainingData<'a> {
    pub features: Vec<&'a [f64]>,
    pub labels: Vec<ClassLabel>,
}

impl<'a> TrainingData<'a> {
    pub fn push(&mut self, features: &'a [f64], label: ClassLabel) {
        self.features.push(features);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainReport {
    pub epochs_used: usize,
    /// False when `max_epochs` ran out before the accuracy target was met.
    pub reached_target: bool,
}

struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(lr: f64, n: usize) -> Self {
        Adam {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

/// Trains `model` in place until full-train accuracy reaches the target or
/// `max_epochs` is spent. Minibatch order is drawn from `seed`.
pub fn train_round(
    model: &mut Model,
    data: &TrainingData<'_>,
    cfg: &LearnerConfig,
    seed: u64,
) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::usage("cannot train on an empty labeled set"));
    }
    if data.features.len() != data.labels.len() {
        return Err(Error::usage("features and labels differ in length"));
    }
    cfg.validate()?;

    let mut rng = seed::rng(seed);
    let mut adam = Adam::new(cfg.learning_rate, model.params.len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut xs = Vec::with_capacity(cfg.minibatch_size);
    let mut ys = Vec::with_capacity(cfg.minibatch_size);

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            xs.clear();
            ys.clear();
            xs.extend(chunk.iter().map(|&i| data.features[i]));
            ys.extend(chunk.iter().map(|&i| data.labels[i]));
            let (_, grad) = model.loss_and_gradient(&xs, &ys)?;
            adam.step(&mut model.params, &grad);
        }
        let acc = evaluate(model, data.features.iter().copied().zip(data.labels.iter().copied()))?;
        if acc >= cfg.train_accuracy_target {
            return Ok(TrainReport {
                epochs_used: epoch,
                reached_target: true,
            });
        }
    }
    log::warn!(
        "training stopped at max_epochs={} before reaching accuracy {}",
        cfg.max_epochs,
        cfg.train_accuracy_target
    );
    Ok(TrainReport {
        epochs_used: cfg.max_epochs,
        reached_target: false,
    })
}

/// Fraction of rows whose argmax posterior equals the label.
pub fn evaluate<'a, I>(model: &Model, data: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a [f64], ClassLabel)>,
{
    let mut n = 0usize;
    let mut correct = 0usize;
    for (x, y) in data {
        model.check_dim(x)?;
        n += 1;
        if model.predict(x) == y.0 {
            correct += 1;
        }
    }
    if n == 0 {
        return Err(Error::usage("cannot evaluate on an empty set"));
    }
    Ok(correct as f64 / n as f64)
}
