//! Black-box variational inference: Monte-Carlo ELBO estimation, the
//! score-function (REINFORCE) gradient with an exponentially smoothed
//! baseline, a generalized weighted-gradient estimator covering the baseline
//! strategy family, and an Adam ascent driver.

use alloc::vec;
use alloc::vec::Vec;

use crate::cpe::CpeModel;
use crate::error::{Error, Result};
use crate::genmodel::SearchDist;
use crate::gp::GpModel;
use crate::rng::Stream;
use crate::seq::{SeqSpace, Sequence};

pub use crate::opt::AdamState;

/// Scores that can stand in for log p(y > tau | x): a trained classifier, a
/// GP probability-of-improvement, or a precomputed table over an enumerable
/// domain.
pub enum ScoreBackend<'a> {
    Cpe(&'a CpeModel),
    GpPi { model: &'a GpModel, tau: f64 },
    Table(&'a ScoreTable),
}

impl ScoreBackend<'_> {
    /// log score(x); finite for all valid x (backends clamp internally).
    pub fn log_score(&self, x: &Sequence) -> Result<f64> {
        match self {
            ScoreBackend::Cpe(model) => model.predict_logprob(x),
            ScoreBackend::GpPi { model, tau } => {
                Ok(model.log_pi_with(x, *tau, true)?.max(LOG_SCORE_FLOOR))
            }
            ScoreBackend::Table(t) => t.log_score(x),
        }
    }

    /// score(x) itself, in (0, 1]; the weight the non-VSD strategies use.
    pub fn score(&self, x: &Sequence) -> Result<f64> {
        match self {
            ScoreBackend::Cpe(model) => model.predict_prob(x),
            ScoreBackend::GpPi { model, tau } => model.pi_acquisition(x, *tau),
            ScoreBackend::Table(t) => Ok(crate::math::exp(t.log_score(x)?)),
        }
    }
}

/// Floor applied to GP log-scores so the VI weights stay finite.
pub const LOG_SCORE_FLOOR: f64 = -700.0;

/// Precomputed log-scores over a full enumeration.
#[derive(Clone, Debug)]
pub struct ScoreTable {
    space: SeqSpace,
    log_scores: Vec<f64>,
}

impl ScoreTable {
    pub fn new(space: SeqSpace, log_scores: Vec<f64>) -> Result<Self> {
        let n = space.count().ok_or(Error::DomainTooLarge { size: u64::MAX, max: 1 << 20 })?;
        if log_scores.len() as u64 != n {
            return Err(Error::ShapeMismatch { expected: n as usize, got: log_scores.len() });
        }
        if log_scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("log score"));
        }
        Ok(ScoreTable { space, log_scores })
    }

    /// Tabulate any backend over an enumerable domain.
    pub fn tabulate(space: SeqSpace, backend: &ScoreBackend<'_>) -> Result<Self> {
        let n = space.count().ok_or(Error::DomainTooLarge { size: u64::MAX, max: 1 << 20 })?;
        if n > (1 << 20) {
            return Err(Error::DomainTooLarge { size: n, max: 1 << 20 });
        }
        let mut log_scores = Vec::with_capacity(n as usize);
        for x in space.iter() {
            log_scores.push(backend.log_score(&x)?.max(LOG_SCORE_FLOOR));
        }
        ScoreTable::new(space, log_scores)
    }

    pub fn space(&self) -> SeqSpace {
        self.space
    }

    pub fn log_score(&self, x: &Sequence) -> Result<f64> {
        Ok(self.log_scores[self.space.index_of(x)?])
    }
}

/// Exponentially smoothed average of the Monte-Carlo weights, used as the
/// control-variate baseline. The estimator stays unbiased because the value
/// is always taken before observing the current batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineState {
    ema: f64,
    decay: f64,
    initialized: bool,
}

impl BaselineState {
    pub fn new(decay: f64) -> Self {
        BaselineState { ema: 0.0, decay, initialized: false }
    }

    /// Disabled baseline: always zero.
    pub fn off() -> Self {
        BaselineState { ema: 0.0, decay: 1.0, initialized: false }
    }

    pub fn value(&self) -> f64 {
        if self.initialized {
            self.ema
        } else {
            0.0
        }
    }

    pub fn observe(&mut self, batch_mean: f64) {
        if self.decay >= 1.0 {
            return;
        }
        if self.initialized {
            self.ema = self.decay * self.ema + (1.0 - self.decay) * batch_mean;
        } else {
            self.ema = batch_mean;
            self.initialized = true;
        }
    }
}

#[derive(Clone, Debug)]
pub struct ElboEstimate {
    pub value: f64,
    pub samples: usize,
    /// Per-sample weights, kept for diagnostics (standard errors etc.).
    pub weights: Vec<f64>,
}

impl ElboEstimate {
    pub fn standard_error(&self) -> f64 {
        if self.samples < 2 {
            return f64::INFINITY;
        }
        let n = self.samples as f64;
        let mean = self.value_of_weights();
        let var =
            self.weights.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / (n - 1.0);
        crate::math::sqrt(var / n)
    }

    fn value_of_weights(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.samples as f64
    }
}

/// How the KL(q || prior) term enters the objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KlMode {
    /// Fold log q - log p into the Monte-Carlo weight (always valid).
    MonteCarlo,
    /// Use the closed form; only available for matched factorized families.
    ClosedForm,
}

/// Monte-Carlo ELBO: mean over S draws of
/// log score(x) - log q(x) + log p(x), or mean log score minus the closed
/// form KL when requested.
pub fn estimate_elbo(
    q: &SearchDist,
    backend: &ScoreBackend<'_>,
    prior: &SearchDist,
    samples: usize,
    rng: &mut Stream,
    kl_mode: KlMode,
) -> Result<ElboEstimate> {
    if samples == 0 {
        return Err(Error::InvalidParam("samples must be at least 1"));
    }
    let closed_kl = match kl_mode {
        KlMode::MonteCarlo => None,
        KlMode::ClosedForm => Some(
            q.kl_exact(prior)?
                .ok_or(Error::InvalidParam("closed-form KL needs matched families"))?,
        ),
    };
    let mut weights = Vec::with_capacity(samples);
    for x in q.sample(rng, samples) {
        let ls = backend.log_score(&x)?;
        let w = match closed_kl {
            None => ls - q.log_prob(&x)? + prior.log_prob(&x)?,
            Some(_) => ls,
        };
        weights.push(w);
    }
    let mut value = weights.iter().sum::<f64>() / samples as f64;
    if let Some(kl) = closed_kl {
        value -= kl;
    }
    Ok(ElboEstimate { value, samples, weights })
}

/// Score-function gradient of the ELBO:
/// (1/S) sum_s (w_s - b) d/dphi log q(x_s | phi), with
/// w_s = log score - log q + log p and b the smoothed baseline. The baseline
/// is read before and updated after the batch.
pub fn elbo_grad(
    q: &SearchDist,
    backend: &ScoreBackend<'_>,
    prior: &SearchDist,
    samples: usize,
    baseline: &mut BaselineState,
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    if samples < 2 {
        return Err(Error::InvalidParam("gradient estimation needs at least 2 samples"));
    }
    let b = baseline.value();
    let mut grad = vec![0.0; q.param_len()];
    let mut score_grad = vec![0.0; q.param_len()];
    let mut w_sum = 0.0;
    for x in q.sample(rng, samples) {
        let w = backend.log_score(&x)? - q.log_prob(&x)? + prior.log_prob(&x)?;
        w_sum += w;
        q.score_grad_into(&x, &mut score_grad)?;
        let c = w - b;
        for (g, s) in grad.iter_mut().zip(&score_grad) {
            *g += c * s;
        }
    }
    let inv = 1.0 / samples as f64;
    for g in grad.iter_mut() {
        *g *= inv;
    }
    baseline.observe(w_sum * inv);
    Ok(grad)
}

/// Where the generalized estimator draws its samples.
pub enum SampleSource<'a> {
    /// Re-sample from the live distribution every call (REINFORCE style).
    Current,
    /// Use a frozen batch, typically drawn from last round's optimum.
    FixedBatch(&'a [Sequence]),
}

/// Generalized weighted score gradient
/// E_{q(x|phi')}[w(x) d/dphi log q(x|phi)]: the one estimator the strategy
/// family shares, differing only in the weight and the sample source.
pub fn general_weighted_grad(
    q: &SearchDist,
    weight: &mut dyn FnMut(&Sequence) -> Result<f64>,
    source: SampleSource<'_>,
    samples: usize,
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; q.param_len()];
    let mut score_grad = vec![0.0; q.param_len()];
    let accumulate = |x: &Sequence,
                          grad: &mut Vec<f64>,
                          score_grad: &mut Vec<f64>,
                          weight: &mut dyn FnMut(&Sequence) -> Result<f64>|
     -> Result<()> {
        let w = weight(x)?;
        if !w.is_finite() {
            return Err(Error::NonFinite("sample weight"));
        }
        q.score_grad_into(x, score_grad)?;
        for (g, s) in grad.iter_mut().zip(score_grad.iter()) {
            *g += w * s;
        }
        Ok(())
    };
    let n = match source {
        SampleSource::Current => {
            if samples == 0 {
                return Err(Error::InvalidParam("samples must be at least 1"));
            }
            for x in q.sample(rng, samples) {
                accumulate(&x, &mut grad, &mut score_grad, weight)?;
            }
            samples
        }
        SampleSource::FixedBatch(batch) => {
            if batch.is_empty() {
                return Err(Error::EmptyBatch);
            }
            for x in batch {
                accumulate(x, &mut grad, &mut score_grad, weight)?;
            }
            batch.len()
        }
    };
    let inv = 1.0 / n as f64;
    for g in grad.iter_mut() {
        *g *= inv;
    }
    Ok(grad)
}

/// One optimizer step's gradient and diagnostics.
pub struct OptimizeStep {
    /// Ascent gradient of the objective.
    pub grad: Vec<f64>,
    pub elbo: f64,
    pub baseline: f64,
}

/// Per-iteration optimization trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub elbo: f64,
    pub grad_norm: f64,
    pub baseline: f64,
}

/// Run `iterations` Adam ascent steps, driven by a gradient closure, mutating
/// the distribution in place. Aborts on a non-finite gradient.
pub fn optimize<F>(
    q: &mut SearchDist,
    mut grad_fn: F,
    adam: &mut AdamState,
    learning_rate: f64,
    iterations: usize,
) -> Result<Vec<TraceRow>>
where
    F: FnMut(&SearchDist, usize) -> Result<OptimizeStep>,
{
    if iterations == 0 {
        return Err(Error::InvalidParam("iterations must be at least 1"));
    }
    let mut trace = Vec::with_capacity(iterations);
    let mut descent = vec![0.0; q.param_len()];
    for iter in 0..iterations {
        let step = grad_fn(q, iter)?;
        let mut norm2 = 0.0;
        for (d, &g) in descent.iter_mut().zip(&step.grad) {
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient { iteration: iter });
            }
            norm2 += g * g;
            *d = -g;
        }
        adam.apply(q.params_mut(), &descent, learning_rate);
        trace.push(TraceRow {
            iter,
            elbo: step.elbo,
            grad_norm: crate::math::sqrt(norm2),
            baseline: step.baseline,
        });
    }
    Ok(trace)
}

/// Settings for a full VSD inner optimization.
#[derive(Clone, Debug, PartialEq)]
pub struct ViConfig {
    pub samples_per_step: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub baseline_decay: f64,
    /// Prefer the closed-form KL term whenever both q and the prior are
    /// mean-field; otherwise the KL folds into the Monte-Carlo weight.
    pub closed_form_kl: bool,
}

impl Default for ViConfig {
    fn default() -> Self {
        ViConfig {
            samples_per_step: 1024,
            iterations: 3000,
            learning_rate: 0.01,
            baseline_decay: 0.7,
            closed_form_kl: true,
        }
    }
}

/// Gradient of the closed-form KL(q || p) with respect to q's logits, for
/// matched mean-field pairs.
fn mean_field_kl_grad(q: &SearchDist, prior: &SearchDist) -> Option<Vec<f64>> {
    let (SearchDist::MeanField(qp), SearchDist::MeanField(pp)) = (q, prior) else {
        return None;
    };
    let v = q.vocab_size();
    let mut grad = vec![0.0; q.param_len()];
    let mut lq = vec![0.0; v];
    let mut lp = vec![0.0; v];
    let mut probs = vec![0.0; v];
    for m in 0..q.seq_len() {
        crate::math::log_softmax_into(qp.logits_at(m), &mut lq);
        crate::math::log_softmax_into(pp.logits_at(m), &mut lp);
        crate::math::softmax_into(qp.logits_at(m), &mut probs);
        let mut kl_m = 0.0;
        for a in 0..v {
            kl_m += probs[a] * (lq[a] - lp[a]);
        }
        for a in 0..v {
            grad[m * v + a] = probs[a] * ((lq[a] - lp[a]) - kl_m);
        }
    }
    Some(grad)
}

/// Maximize the ELBO for a score backend: the inner loop of a VSD round.
/// Warm-starts from the passed-in q and mutates it in place.
pub fn maximize_elbo(
    q: &mut SearchDist,
    backend: &ScoreBackend<'_>,
    prior: &SearchDist,
    config: &ViConfig,
    rng: &mut Stream,
) -> Result<Vec<TraceRow>> {
    let closed = config.closed_form_kl
        && matches!((&*q, prior), (SearchDist::MeanField(_), SearchDist::MeanField(_)));
    let mut baseline = BaselineState::new(config.baseline_decay);
    let mut adam = AdamState::new(q.param_len());
    let samples = config.samples_per_step;
    let lr = config.learning_rate;
    let iterations = config.iterations;
    if closed {
        optimize(
            q,
            |q, _| {
                let b = baseline.value();
                let mut grad = vec![0.0; q.param_len()];
                let mut score_grad = vec![0.0; q.param_len()];
                let mut ls_sum = 0.0;
                for x in q.sample(rng, samples) {
                    let ls = backend.log_score(&x)?;
                    ls_sum += ls;
                    q.score_grad_into(&x, &mut score_grad)?;
                    for (g, s) in grad.iter_mut().zip(&score_grad) {
                        *g += (ls - b) * s;
                    }
                }
                let inv = 1.0 / samples as f64;
                for g in grad.iter_mut() {
                    *g *= inv;
                }
                baseline.observe(ls_sum * inv);
                let kl = q.kl_exact(prior)?.expect("matched families");
                let kl_grad = mean_field_kl_grad(q, prior).expect("matched families");
                for (g, k) in grad.iter_mut().zip(&kl_grad) {
                    *g -= k;
                }
                Ok(OptimizeStep { grad, elbo: ls_sum * inv - kl, baseline: b })
            },
            &mut adam,
            lr,
            iterations,
        )
    } else {
        optimize(
            q,
            |q, _| {
                let b = baseline.value();
                let mut grad = vec![0.0; q.param_len()];
                let mut score_grad = vec![0.0; q.param_len()];
                let mut w_sum = 0.0;
                for x in q.sample(rng, samples) {
                    let w = backend.log_score(&x)? - q.log_prob(&x)? + prior.log_prob(&x)?;
                    w_sum += w;
                    q.score_grad_into(&x, &mut score_grad)?;
                    for (g, s) in grad.iter_mut().zip(&score_grad) {
                        *g += (w - b) * s;
                    }
                }
                let inv = 1.0 / samples as f64;
                for g in grad.iter_mut() {
                    *g *= inv;
                }
                baseline.observe(w_sum * inv);
                Ok(OptimizeStep { grad, elbo: w_sum * inv, baseline: b })
            },
            &mut adam,
            lr,
            iterations,
        )
    }
}
