//! Class-probability estimators pi(x) in [0,1] over one-hot sequence
//! features, trained by log-loss with full-batch Adam. Three architectures:
//! plain logistic regression, one hidden tanh layer, and an additive
//! per-position form whose log-probability factorizes across positions.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::opt::AdamState;
use crate::rng::Stream;
use crate::seq::{BinaryDataset, Sequence};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CpeArch {
    /// Logistic regression on one-hot features.
    Linear,
    /// One hidden tanh layer of the given width.
    Hidden { width: usize },
    /// log pi(x) = sum_m log sigmoid(w[m, x_m]); the induced posterior under
    /// a uniform prior factorizes per position.
    Additive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Probabilities are clamped to [clamp, 1 - clamp] before logs.
    pub clamp: f64,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            iterations: 500,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clamp: 1e-6,
            init_scale: 0.1,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParam("learning rate must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParam("iterations must be at least 1"));
        }
        if !(self.clamp > 0.0 && self.clamp < 0.5) {
            return Err(Error::InvalidParam("clamp must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CpeModel {
    arch: CpeArch,
    seq_len: usize,
    vocab: usize,
    clamp: f64,
    weights: Vec<f64>,
}

fn weight_len(arch: CpeArch, seq_len: usize, vocab: usize) -> usize {
    let d = seq_len * vocab;
    match arch {
        CpeArch::Linear => d + 1,
        CpeArch::Hidden { width } => width * d + width + width + 1,
        CpeArch::Additive => d,
    }
}

impl CpeModel {
    /// All-zero weights; linear and hidden models then predict exactly 0.5.
    pub fn zeroed(arch: CpeArch, seq_len: usize, vocab: usize) -> Self {
        CpeModel {
            arch,
            seq_len,
            vocab,
            clamp: 1e-6,
            weights: vec![0.0; weight_len(arch, seq_len, vocab)],
        }
    }

    pub fn with_weights(
        arch: CpeArch,
        seq_len: usize,
        vocab: usize,
        clamp: f64,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let expected = weight_len(arch, seq_len, vocab);
        if weights.len() != expected {
            return Err(Error::ShapeMismatch { expected, got: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("weight"));
        }
        Ok(CpeModel { arch, seq_len, vocab, clamp, weights })
    }

    pub fn arch(&self) -> CpeArch {
        self.arch
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn check(&self, x: &Sequence) -> Result<()> {
        if x.len() != self.seq_len {
            return Err(Error::LengthMismatch { expected: self.seq_len, got: x.len() });
        }
        for &t in x.tokens() {
            if t as usize >= self.vocab {
                return Err(Error::TokenOutOfRange { token: t as usize, vocab: self.vocab });
            }
        }
        Ok(())
    }

    /// Raw log pi(x) before clamping. For linear/hidden this is
    /// log sigmoid(logit); for additive it is the per-position sum.
    fn raw_log_prob(&self, x: &Sequence) -> f64 {
        match self.arch {
            CpeArch::Linear | CpeArch::Hidden { .. } => math::log_sigmoid(self.logit(x)),
            CpeArch::Additive => {
                let mut lp = 0.0;
                for (m, &t) in x.tokens().iter().enumerate() {
                    lp += math::log_sigmoid(self.weights[m * self.vocab + t as usize]);
                }
                lp
            }
        }
    }

    fn logit(&self, x: &Sequence) -> f64 {
        let d = self.seq_len * self.vocab;
        match self.arch {
            CpeArch::Linear => {
                let mut z = self.weights[d];
                for (m, &t) in x.tokens().iter().enumerate() {
                    z += self.weights[m * self.vocab + t as usize];
                }
                z
            }
            CpeArch::Hidden { width } => {
                let (w1, rest) = self.weights.split_at(width * d);
                let (b1, rest) = rest.split_at(width);
                let (w2, b2) = rest.split_at(width);
                let mut z = b2[0];
                for h in 0..width {
                    // One-hot input: the matrix product reduces to a gather.
                    let mut a = b1[h];
                    for (m, &t) in x.tokens().iter().enumerate() {
                        a += w1[h * d + m * self.vocab + t as usize];
                    }
                    z += w2[h] * math::tanh(a);
                }
                z
            }
            CpeArch::Additive => unreachable!("additive models have no single logit"),
        }
    }

    /// pi(x), clamped to [clamp, 1 - clamp].
    pub fn predict_prob(&self, x: &Sequence) -> Result<f64> {
        self.check(x)?;
        let p = match self.arch {
            CpeArch::Additive => math::exp(self.raw_log_prob(x)),
            _ => math::sigmoid(self.logit(x)),
        };
        Ok(p.clamp(self.clamp, 1.0 - self.clamp))
    }

    /// log pi(x) after clamping; always finite.
    pub fn predict_logprob(&self, x: &Sequence) -> Result<f64> {
        self.check(x)?;
        let lo = math::ln(self.clamp);
        let hi = math::ln_1p(-self.clamp);
        Ok(self.raw_log_prob(x).clamp(lo, hi))
    }

    /// Mean log-loss over a dataset, gradient written into `grad`.
    fn loss_and_grad(&self, data: &BinaryDataset, grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let n = data.len() as f64;
        let d = self.seq_len * self.vocab;
        let mut loss = 0.0;
        for (x, z) in data.entries() {
            let z = if *z { 1.0 } else { 0.0 };
            match self.arch {
                CpeArch::Linear => {
                    let logit = self.logit(x);
                    let p = math::sigmoid(logit);
                    loss -= z * math::log_sigmoid(logit) + (1.0 - z) * math::log_sigmoid(-logit);
                    let err = (p - z) / n;
                    for (m, &t) in x.tokens().iter().enumerate() {
                        grad[m * self.vocab + t as usize] += err;
                    }
                    grad[d] += err;
                }
                CpeArch::Hidden { width } => {
                    let (w1, rest) = self.weights.split_at(width * d);
                    let (b1, rest) = rest.split_at(width);
                    let (w2, b2) = rest.split_at(width);
                    let mut acts = vec![0.0; width];
                    let mut logit = b2[0];
                    for h in 0..width {
                        let mut a = b1[h];
                        for (m, &t) in x.tokens().iter().enumerate() {
                            a += w1[h * d + m * self.vocab + t as usize];
                        }
                        let act = math::tanh(a);
                        acts[h] = act;
                        logit += w2[h] * act;
                    }
                    let p = math::sigmoid(logit);
                    loss -= z * math::log_sigmoid(logit) + (1.0 - z) * math::log_sigmoid(-logit);
                    let err = (p - z) / n;
                    let (g1, grest) = grad.split_at_mut(width * d);
                    let (gb1, grest) = grest.split_at_mut(width);
                    let (g2, gb2) = grest.split_at_mut(width);
                    gb2[0] += err;
                    for h in 0..width {
                        g2[h] += err * acts[h];
                        let back = err * w2[h] * (1.0 - acts[h] * acts[h]);
                        gb1[h] += back;
                        for (m, &t) in x.tokens().iter().enumerate() {
                            g1[h * d + m * self.vocab + t as usize] += back;
                        }
                    }
                }
                CpeArch::Additive => {
                    let lp = self.raw_log_prob(x);
                    let p = math::exp(lp).min(1.0 - self.clamp);
                    loss -= z * lp + (1.0 - z) * math::ln_1p(-p);
                    // d log pi / d w[m, x_m] = sigmoid(-w), chained through
                    // dL/d log pi = (p - z) / (1 - p).
                    let scale = ((p - z) / (1.0 - p)) / n;
                    for (m, &t) in x.tokens().iter().enumerate() {
                        let w = self.weights[m * self.vocab + t as usize];
                        grad[m * self.vocab + t as usize] += scale * math::sigmoid(-w);
                    }
                }
            }
        }
        loss / n
    }
}

impl CpeModel {
    /// Snapshot in the same text scheme as the search distributions:
    /// `family,M,V[,clamp]` then one decimal weight per line.
    pub fn to_snapshot(&self) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        let family = match self.arch {
            CpeArch::Linear => String::from("cpe-linear"),
            CpeArch::Hidden { width } => format!("cpe-hidden:{width}"),
            CpeArch::Additive => String::from("cpe-additive"),
        };
        let _ = writeln!(out, "{family},{},{},{:?}", self.seq_len, self.vocab, self.clamp);
        for w in &self.weights {
            let _ = writeln!(out, "{w:?}");
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<CpeModel> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::InvalidParam("empty snapshot"))?;
        let mut fields = header.split(',');
        let family = fields.next().unwrap_or("");
        let arch = match family.split_once(':') {
            Some(("cpe-hidden", w)) => CpeArch::Hidden {
                width: w.parse().map_err(|_| Error::InvalidParam("bad hidden width"))?,
            },
            None if family == "cpe-linear" => CpeArch::Linear,
            None if family == "cpe-additive" => CpeArch::Additive,
            _ => return Err(Error::InvalidParam("unknown snapshot family")),
        };
        let seq_len: usize = fields
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or(Error::InvalidParam("bad snapshot header"))?;
        let vocab: usize = fields
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or(Error::InvalidParam("bad snapshot header"))?;
        let clamp: f64 = match fields.next() {
            Some(v) => v.parse().map_err(|_| Error::InvalidParam("bad snapshot clamp"))?,
            None => 1e-6,
        };
        let mut weights = Vec::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            weights.push(
                line.parse::<f64>().map_err(|_| Error::NonFinite("snapshot weight"))?,
            );
        }
        CpeModel::with_weights(arch, seq_len, vocab, clamp, weights)
    }
}

#[derive(Clone, Debug)]
pub struct CpeFit {
    pub model: CpeModel,
    /// Set when the training labels are all positive or all negative; the
    /// model then just learns the clamped base rate. Early rounds routinely
    /// hit this, so it is a flag rather than an error.
    pub single_class: bool,
    pub final_loss: f64,
    pub loss_trace: Vec<f64>,
}

/// Minimize mean log-loss from a random initialization. Deterministic for a
/// fixed dataset, config, and rng state.
pub fn fit_logloss(
    data: &BinaryDataset,
    arch: CpeArch,
    config: &TrainConfig,
    rng: &mut Stream,
) -> Result<CpeFit> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    config.validate()?;
    let seq_len = data.entries()[0].0.len();
    let vocab = 1 + data
        .entries()
        .iter()
        .flat_map(|(x, _)| x.tokens().iter().copied())
        .max()
        .unwrap_or(0) as usize;
    fit_logloss_sized(data, arch, seq_len, vocab.max(2), config, rng)
}

/// As [`fit_logloss`] with an explicit feature shape, for callers whose
/// vocabulary is larger than what the data happens to contain.
pub fn fit_logloss_sized(
    data: &BinaryDataset,
    arch: CpeArch,
    seq_len: usize,
    vocab: usize,
    config: &TrainConfig,
    rng: &mut Stream,
) -> Result<CpeFit> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    config.validate()?;
    for (x, _) in data.entries() {
        if x.len() != seq_len {
            return Err(Error::LengthMismatch { expected: seq_len, got: x.len() });
        }
        for &t in x.tokens() {
            if t as usize >= vocab {
                return Err(Error::TokenOutOfRange { token: t as usize, vocab });
            }
        }
    }
    let positives = data.positives();
    let single_class = positives == 0 || positives == data.len();

    let dim = weight_len(arch, seq_len, vocab);
    let weights: Vec<f64> = (0..dim).map(|_| config.init_scale * rng.normal()).collect();
    let mut model = CpeModel { arch, seq_len, vocab, clamp: config.clamp, weights };

    let mut adam =
        AdamState::with_moments(dim, config.beta1, config.beta2, config.epsilon);
    let mut grad = vec![0.0; dim];
    let mut loss_trace = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        let loss = model.loss_and_grad(data, &mut grad);
        loss_trace.push(loss);
        adam.apply(&mut model.weights, &grad, config.learning_rate);
    }
    let final_loss = model.loss_and_grad(data, &mut grad);
    Ok(CpeFit { model, single_class, final_loss, loss_trace })
}
