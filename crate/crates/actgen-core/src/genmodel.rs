//! Variational families over sequence space: a mean-field product of
//! per-position categoricals and a first-order autoregressive chain. Both
//! expose sampling, exact log-probability, and the score gradient
//! d/dphi log q(x|phi) that the black-box VI engine consumes. The same types
//! double as priors when fit by maximum likelihood on a corpus.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::rng::Stream;
use crate::seq::{Sequence, Token};

/// Laplace smoothing added to every count in maximum-likelihood fits.
pub const ML_SMOOTHING: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    MeanField,
    FirstOrderAr,
}

/// Independent per-position categorical logits, shape M x V.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanFieldParams {
    len: usize,
    vocab: usize,
    logits: Vec<f64>,
}

impl MeanFieldParams {
    pub fn new(len: usize, vocab: usize, logits: Vec<f64>) -> Result<Self> {
        if logits.len() != len * vocab {
            return Err(Error::ShapeMismatch { expected: len * vocab, got: logits.len() });
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("logit"));
        }
        Ok(MeanFieldParams { len, vocab, logits })
    }

    pub fn uniform(len: usize, vocab: usize) -> Self {
        MeanFieldParams { len, vocab, logits: vec![0.0; len * vocab] }
    }

    pub fn logits_at(&self, position: usize) -> &[f64] {
        &self.logits[position * self.vocab..(position + 1) * self.vocab]
    }

    /// Normalized probabilities for one position.
    pub fn probs_at(&self, position: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.vocab];
        math::softmax_into(self.logits_at(position), &mut out);
        out
    }
}

/// First-order autoregressive chain: an initial categorical plus one
/// transition table per position, conditioning each token on its predecessor.
/// Flat layout: V initial logits, then (M-1) * V * V transition logits indexed
/// by (position-1, previous token, next token).
#[derive(Clone, Debug, PartialEq)]
pub struct ArParams {
    len: usize,
    vocab: usize,
    theta: Vec<f64>,
}

impl ArParams {
    pub fn new(len: usize, vocab: usize, theta: Vec<f64>) -> Result<Self> {
        let expected = vocab + (len - 1) * vocab * vocab;
        if theta.len() != expected {
            return Err(Error::ShapeMismatch { expected, got: theta.len() });
        }
        if theta.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("logit"));
        }
        Ok(ArParams { len, vocab, theta })
    }

    pub fn uniform(len: usize, vocab: usize) -> Self {
        ArParams { len, vocab, theta: vec![0.0; vocab + (len - 1) * vocab * vocab] }
    }

    pub fn initial_logits(&self) -> &[f64] {
        &self.theta[..self.vocab]
    }

    /// Transition logits for the token at `position` given `prev` at
    /// `position - 1`. Requires `position >= 1`.
    pub fn transition_logits(&self, position: usize, prev: Token) -> &[f64] {
        let base = self.vocab
            + (position - 1) * self.vocab * self.vocab
            + prev as usize * self.vocab;
        &self.theta[base..base + self.vocab]
    }

    fn transition_offset(&self, position: usize, prev: Token) -> usize {
        self.vocab + (position - 1) * self.vocab * self.vocab + prev as usize * self.vocab
    }
}

/// A search distribution q(x|phi): the object VI optimizes and campaigns
/// sample candidate batches from.
#[derive(Clone, Debug, PartialEq)]
pub enum SearchDist {
    MeanField(MeanFieldParams),
    Ar(ArParams),
}

impl SearchDist {
    pub fn uniform(family: Family, len: usize, vocab: usize) -> Self {
        match family {
            Family::MeanField => SearchDist::MeanField(MeanFieldParams::uniform(len, vocab)),
            Family::FirstOrderAr => SearchDist::Ar(ArParams::uniform(len, vocab)),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            SearchDist::MeanField(_) => Family::MeanField,
            SearchDist::Ar(_) => Family::FirstOrderAr,
        }
    }

    pub fn seq_len(&self) -> usize {
        match self {
            SearchDist::MeanField(p) => p.len,
            SearchDist::Ar(p) => p.len,
        }
    }

    pub fn vocab_size(&self) -> usize {
        match self {
            SearchDist::MeanField(p) => p.vocab,
            SearchDist::Ar(p) => p.vocab,
        }
    }

    /// Flat parameter vector; the layout is what `score_grad` mirrors.
    pub fn params(&self) -> &[f64] {
        match self {
            SearchDist::MeanField(p) => &p.logits,
            SearchDist::Ar(p) => &p.theta,
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            SearchDist::MeanField(p) => &mut p.logits,
            SearchDist::Ar(p) => &mut p.theta,
        }
    }

    pub fn param_len(&self) -> usize {
        self.params().len()
    }

    fn check_compatible(&self, x: &Sequence) -> Result<()> {
        if x.len() != self.seq_len() {
            return Err(Error::LengthMismatch { expected: self.seq_len(), got: x.len() });
        }
        let v = self.vocab_size();
        for &t in x.tokens() {
            if t as usize >= v {
                return Err(Error::TokenOutOfRange { token: t as usize, vocab: v });
            }
        }
        Ok(())
    }

    /// Draw `count` i.i.d. sequences.
    pub fn sample(&self, rng: &mut Stream, count: usize) -> Vec<Sequence> {
        match self {
            SearchDist::MeanField(p) => {
                // Softmax tables are shared across the batch.
                let tables: Vec<Vec<f64>> = (0..p.len).map(|m| p.probs_at(m)).collect();
                (0..count)
                    .map(|_| {
                        let tokens = tables
                            .iter()
                            .map(|t| rng.categorical(t) as Token)
                            .collect();
                        Sequence::new(tokens)
                    })
                    .collect()
            }
            SearchDist::Ar(p) => {
                let mut init = vec![0.0; p.vocab];
                math::softmax_into(p.initial_logits(), &mut init);
                let mut trans = vec![0.0; p.vocab];
                (0..count)
                    .map(|_| {
                        let mut tokens = Vec::with_capacity(p.len);
                        let mut prev = rng.categorical(&init) as Token;
                        tokens.push(prev);
                        for m in 1..p.len {
                            math::softmax_into(p.transition_logits(m, prev), &mut trans);
                            prev = rng.categorical(&trans) as Token;
                            tokens.push(prev);
                        }
                        Sequence::new(tokens)
                    })
                    .collect()
            }
        }
    }

    /// Exact log q(x|phi) of a normalized product of categoricals.
    pub fn log_prob(&self, x: &Sequence) -> Result<f64> {
        self.check_compatible(x)?;
        let v = self.vocab_size();
        let mut scratch = vec![0.0; v];
        let mut lp = 0.0;
        match self {
            SearchDist::MeanField(p) => {
                for m in 0..p.len {
                    math::log_softmax_into(p.logits_at(m), &mut scratch);
                    lp += scratch[x.token(m) as usize];
                }
            }
            SearchDist::Ar(p) => {
                math::log_softmax_into(p.initial_logits(), &mut scratch);
                lp += scratch[x.token(0) as usize];
                for m in 1..p.len {
                    math::log_softmax_into(p.transition_logits(m, x.token(m - 1)), &mut scratch);
                    lp += scratch[x.token(m) as usize];
                }
            }
        }
        Ok(lp)
    }

    /// Score gradient d/dphi log q(x|phi) written into `out` (zeroed first).
    /// For every touched categorical block the gradient is
    /// onehot(token) - softmax(logits).
    pub fn score_grad_into(&self, x: &Sequence, out: &mut [f64]) -> Result<()> {
        self.check_compatible(x)?;
        if out.len() != self.param_len() {
            return Err(Error::ShapeMismatch { expected: self.param_len(), got: out.len() });
        }
        out.fill(0.0);
        let v = self.vocab_size();
        match self {
            SearchDist::MeanField(p) => {
                for m in 0..p.len {
                    let block = &mut out[m * v..(m + 1) * v];
                    math::softmax_into(p.logits_at(m), block);
                    for b in block.iter_mut() {
                        *b = -*b;
                    }
                    block[x.token(m) as usize] += 1.0;
                }
            }
            SearchDist::Ar(p) => {
                {
                    let block = &mut out[..v];
                    math::softmax_into(p.initial_logits(), block);
                    for b in block.iter_mut() {
                        *b = -*b;
                    }
                    block[x.token(0) as usize] += 1.0;
                }
                for m in 1..p.len {
                    let off = p.transition_offset(m, x.token(m - 1));
                    let logits = p.transition_logits(m, x.token(m - 1)).to_vec();
                    let block = &mut out[off..off + v];
                    math::softmax_into(&logits, block);
                    for b in block.iter_mut() {
                        *b = -*b;
                    }
                    block[x.token(m) as usize] += 1.0;
                }
            }
        }
        Ok(())
    }

    pub fn score_grad(&self, x: &Sequence) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.param_len()];
        self.score_grad_into(x, &mut out)?;
        Ok(out)
    }

    /// Closed-form KL(q || p) when both distributions are from the same
    /// factorized family; `Ok(None)` for mixed pairs, which need Monte Carlo.
    pub fn kl_exact(&self, p: &SearchDist) -> Result<Option<f64>> {
        match (self, p) {
            (SearchDist::MeanField(q), SearchDist::MeanField(p)) => {
                kl_mean_field(q, p).map(Some)
            }
            (SearchDist::Ar(q), SearchDist::Ar(p)) => kl_autoregressive(q, p).map(Some),
            _ => Ok(None),
        }
    }

    /// Monte-Carlo KL(q || p) from S samples of q.
    pub fn kl_monte_carlo(&self, p: &SearchDist, samples: usize, rng: &mut Stream) -> Result<f64> {
        if samples == 0 {
            return Err(Error::InvalidParam("samples must be at least 1"));
        }
        let mut acc = 0.0;
        for x in self.sample(rng, samples) {
            acc += self.log_prob(&x)? - p.log_prob(&x)?;
        }
        Ok(acc / samples as f64)
    }
}

fn check_same_shape(
    q_len: usize,
    q_vocab: usize,
    p_len: usize,
    p_vocab: usize,
) -> Result<()> {
    if q_len != p_len {
        return Err(Error::ShapeMismatch { expected: q_len, got: p_len });
    }
    if q_vocab != p_vocab {
        return Err(Error::ShapeMismatch { expected: q_vocab, got: p_vocab });
    }
    Ok(())
}

fn categorical_kl(q_logits: &[f64], p_logits: &[f64]) -> f64 {
    let v = q_logits.len();
    let mut q = vec![0.0; v];
    let mut lq = vec![0.0; v];
    let mut lp = vec![0.0; v];
    math::softmax_into(q_logits, &mut q);
    math::log_softmax_into(q_logits, &mut lq);
    math::log_softmax_into(p_logits, &mut lp);
    let mut kl = 0.0;
    for a in 0..v {
        kl += q[a] * (lq[a] - lp[a]);
    }
    kl.max(0.0)
}

/// Sum of per-position categorical KLs.
pub fn kl_mean_field(q: &MeanFieldParams, p: &MeanFieldParams) -> Result<f64> {
    check_same_shape(q.len, q.vocab, p.len, p.vocab)?;
    let mut kl = 0.0;
    for m in 0..q.len {
        kl += categorical_kl(q.logits_at(m), p.logits_at(m));
    }
    Ok(kl)
}

/// Exact KL between two first-order chains via forward marginals:
/// KL(initial) plus, at each position, the transition KLs weighted by the
/// chain marginal of the previous token under q.
pub fn kl_autoregressive(q: &ArParams, p: &ArParams) -> Result<f64> {
    check_same_shape(q.len, q.vocab, p.len, p.vocab)?;
    let v = q.vocab;
    let mut kl = categorical_kl(q.initial_logits(), p.initial_logits());
    let mut marginal = vec![0.0; v];
    math::softmax_into(q.initial_logits(), &mut marginal);
    let mut trans_row = vec![0.0; v];
    for m in 1..q.len {
        let mut next_marginal = vec![0.0; v];
        for prev in 0..v {
            if marginal[prev] == 0.0 {
                continue;
            }
            let q_row = q.transition_logits(m, prev as Token);
            let p_row = p.transition_logits(m, prev as Token);
            kl += marginal[prev] * categorical_kl(q_row, p_row);
            math::softmax_into(q_row, &mut trans_row);
            for next in 0..v {
                next_marginal[next] += marginal[prev] * trans_row[next];
            }
        }
        marginal = next_marginal;
    }
    Ok(kl)
}

impl SearchDist {
    /// Reproducibility snapshot: a `family,M,V` header line followed by one
    /// decimal parameter per line, round-trippable exactly.
    pub fn to_snapshot(&self) -> String {
        use core::fmt::Write;
        let family = match self {
            SearchDist::MeanField(_) => "mean-field",
            SearchDist::Ar(_) => "autoregressive",
        };
        let mut out = String::new();
        let _ = writeln!(out, "{family},{},{}", self.seq_len(), self.vocab_size());
        for p in self.params() {
            let _ = writeln!(out, "{p:?}");
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<SearchDist> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::InvalidParam("empty snapshot"))?;
        let mut fields = header.split(',');
        let family = fields.next().unwrap_or("");
        let len: usize = fields
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or(Error::InvalidParam("bad snapshot header"))?;
        let vocab: usize = fields
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or(Error::InvalidParam("bad snapshot header"))?;
        let mut params = Vec::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 =
                line.parse().map_err(|_| Error::NonFinite("snapshot parameter"))?;
            params.push(v);
        }
        match family {
            "mean-field" => Ok(SearchDist::MeanField(MeanFieldParams::new(len, vocab, params)?)),
            "autoregressive" => Ok(SearchDist::Ar(ArParams::new(len, vocab, params)?)),
            _ => Err(Error::InvalidParam("unknown snapshot family")),
        }
    }
}

/// Maximum-likelihood fit with Laplace-smoothed counts; the smoothing keeps
/// every logit finite even for tokens absent from the corpus.
pub fn fit_ml(sequences: &[Sequence], family: Family, vocab_size: usize) -> Result<SearchDist> {
    if sequences.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let len = sequences[0].len();
    for x in sequences {
        if x.len() != len {
            return Err(Error::LengthMismatch { expected: len, got: x.len() });
        }
        for &t in x.tokens() {
            if t as usize >= vocab_size {
                return Err(Error::TokenOutOfRange { token: t as usize, vocab: vocab_size });
            }
        }
    }
    match family {
        Family::MeanField => {
            let mut counts = vec![ML_SMOOTHING; len * vocab_size];
            for x in sequences {
                for (m, &t) in x.tokens().iter().enumerate() {
                    counts[m * vocab_size + t as usize] += 1.0;
                }
            }
            let total = sequences.len() as f64 + ML_SMOOTHING * vocab_size as f64;
            let logits = counts.iter().map(|&c| math::ln(c / total)).collect();
            Ok(SearchDist::MeanField(MeanFieldParams::new(len, vocab_size, logits)?))
        }
        Family::FirstOrderAr => {
            let v = vocab_size;
            let mut theta = vec![0.0; v + (len - 1) * v * v];
            let mut init_counts = vec![ML_SMOOTHING; v];
            for x in sequences {
                init_counts[x.token(0) as usize] += 1.0;
            }
            let init_total = sequences.len() as f64 + ML_SMOOTHING * v as f64;
            for a in 0..v {
                theta[a] = math::ln(init_counts[a] / init_total);
            }
            for m in 1..len {
                for prev in 0..v {
                    let mut counts = vec![ML_SMOOTHING; v];
                    for x in sequences {
                        if x.token(m - 1) as usize == prev {
                            counts[x.token(m) as usize] += 1.0;
                        }
                    }
                    let total: f64 = counts.iter().sum();
                    let base = v + (m - 1) * v * v + prev * v;
                    for a in 0..v {
                        theta[base + a] = math::ln(counts[a] / total);
                    }
                }
            }
            Ok(SearchDist::Ar(ArParams::new(len, vocab_size, theta)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::SeqSpace;

    fn seq(tokens: &[Token]) -> Sequence {
        Sequence::new(tokens.to_vec())
    }

    #[test]
    fn near_delta_mean_field_samples_are_constant() {
        let mut logits = vec![0.0; 3 * 4];
        for m in 0..3 {
            logits[m * 4 + 2] = 20.0;
        }
        let q = SearchDist::MeanField(MeanFieldParams::new(3, 4, logits).unwrap());
        let mut rng = Stream::new(1);
        for x in q.sample(&mut rng, 200) {
            assert_eq!(x.tokens(), &[2, 2, 2]);
        }
    }

    #[test]
    fn uniform_sampling_frequencies() {
        let q = SearchDist::uniform(Family::MeanField, 2, 2);
        let space = SeqSpace::new(2, 2).unwrap();
        let mut rng = Stream::new(2);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for x in q.sample(&mut rng, n) {
            counts[space.index_of(&x).unwrap()] += 1;
        }
        for &c in &counts {
            let freq = c as f64 / n as f64;
            assert!((freq - 0.25).abs() < 0.01, "freq={freq}");
        }
    }

    #[test]
    fn deterministic_ar_chain() {
        let v = 3;
        let len = 4;
        let mut theta = vec![0.0; v + (len - 1) * v * v];
        theta[1] = 30.0; // start at token 1
        // transition 1 -> 2 -> 0 -> 1
        let chain = [(1usize, 2usize), (2, 0), (0, 1)];
        for (m, &(prev, next)) in chain.iter().enumerate() {
            theta[v + m * v * v + prev * v + next] = 30.0;
        }
        let q = SearchDist::Ar(ArParams::new(len, v, theta).unwrap());
        let mut rng = Stream::new(3);
        for x in q.sample(&mut rng, 50) {
            assert_eq!(x.tokens(), &[1, 2, 0, 1]);
        }
    }

    #[test]
    fn uniform_log_prob() {
        let q = SearchDist::uniform(Family::MeanField, 8, 4);
        let x = seq(&[0, 1, 2, 3, 0, 1, 2, 3]);
        let expected = -8.0 * math::ln(4.0);
        assert!((q.log_prob(&x).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn log_prob_normalizes_over_enumeration() {
        let mut rng = Stream::new(4);
        let logits: Vec<f64> = (0..3 * 2).map(|_| rng.normal()).collect();
        let q = SearchDist::MeanField(MeanFieldParams::new(3, 2, logits).unwrap());
        let space = SeqSpace::new(2, 3).unwrap();
        let total: f64 = space.iter().map(|x| math::exp(q.log_prob(&x).unwrap())).sum();
        assert!((total - 1.0).abs() < 1e-10);

        let theta: Vec<f64> = (0..2 + 2 * 4).map(|_| rng.normal()).collect();
        let q = SearchDist::Ar(ArParams::new(3, 2, theta).unwrap());
        let total: f64 = space.iter().map(|x| math::exp(q.log_prob(&x).unwrap())).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn score_grad_uniform_block() {
        let q = SearchDist::uniform(Family::MeanField, 2, 2);
        let g = q.score_grad(&seq(&[0, 0])).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-12 && (g[1] + 0.5).abs() < 1e-12);
        assert!((g[2] - 0.5).abs() < 1e-12 && (g[3] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn score_identity_by_enumeration() {
        let mut rng = Stream::new(5);
        let logits: Vec<f64> = (0..3 * 2).map(|_| rng.normal()).collect();
        let q = SearchDist::MeanField(MeanFieldParams::new(3, 2, logits).unwrap());
        let space = SeqSpace::new(2, 3).unwrap();
        let mut acc = vec![0.0; q.param_len()];
        for x in space.iter() {
            let w = math::exp(q.log_prob(&x).unwrap());
            for (a, g) in acc.iter_mut().zip(q.score_grad(&x).unwrap()) {
                *a += w * g;
            }
        }
        for a in acc {
            assert!(a.abs() < 1e-12);
        }
    }

    #[test]
    fn score_grad_matches_finite_differences() {
        let mut rng = Stream::new(6);
        for family in [Family::MeanField, Family::FirstOrderAr] {
            let mut q = SearchDist::uniform(family, 3, 2);
            for p in q.params_mut() {
                *p = 0.5 * rng.normal();
            }
            let x = seq(&[1, 0, 1]);
            let analytic = q.score_grad(&x).unwrap();
            let h = 1e-5;
            for i in 0..q.param_len() {
                let orig = q.params()[i];
                q.params_mut()[i] = orig + h;
                let hi = q.log_prob(&x).unwrap();
                q.params_mut()[i] = orig - h;
                let lo = q.log_prob(&x).unwrap();
                q.params_mut()[i] = orig;
                let fd = (hi - lo) / (2.0 * h);
                assert!((fd - analytic[i]).abs() < 1e-6, "param {i}: fd={fd} an={}", analytic[i]);
            }
        }
    }

    #[test]
    fn kl_identical_is_zero() {
        let q = SearchDist::uniform(Family::MeanField, 4, 3);
        assert_eq!(q.kl_exact(&q).unwrap(), Some(0.0));
    }

    #[test]
    fn kl_matches_enumeration() {
        let mut rng = Stream::new(7);
        let q_logits: Vec<f64> = vec![0.0; 3 * 2];
        let mut p_logits = vec![0.0; 3 * 2];
        for (m, l) in p_logits.iter_mut().enumerate() {
            *l = if m % 2 == 0 { 8.0 } else { -8.0 };
        }
        let q = SearchDist::MeanField(MeanFieldParams::new(3, 2, q_logits).unwrap());
        let p = SearchDist::MeanField(MeanFieldParams::new(3, 2, p_logits).unwrap());
        let closed = q.kl_exact(&p).unwrap().unwrap();
        let space = SeqSpace::new(2, 3).unwrap();
        let brute: f64 = space
            .iter()
            .map(|x| {
                let lq = q.log_prob(&x).unwrap();
                math::exp(lq) * (lq - p.log_prob(&x).unwrap())
            })
            .sum();
        assert!(closed > 1.0);
        assert!((closed - brute).abs() < 1e-9);

        // Autoregressive closed form against enumeration too.
        let tq: Vec<f64> = (0..2 + 2 * 4).map(|_| rng.normal()).collect();
        let tp: Vec<f64> = (0..2 + 2 * 4).map(|_| rng.normal()).collect();
        let q = SearchDist::Ar(ArParams::new(3, 2, tq).unwrap());
        let p = SearchDist::Ar(ArParams::new(3, 2, tp).unwrap());
        let closed = q.kl_exact(&p).unwrap().unwrap();
        let brute: f64 = space
            .iter()
            .map(|x| {
                let lq = q.log_prob(&x).unwrap();
                math::exp(lq) * (lq - p.log_prob(&x).unwrap())
            })
            .sum();
        assert!((closed - brute).abs() < 1e-9);
    }

    #[test]
    fn kl_nonnegative_random_pairs() {
        let mut rng = Stream::new(8);
        for _ in 0..1000 {
            let a: Vec<f64> = (0..2 * 3).map(|_| 2.0 * rng.normal()).collect();
            let b: Vec<f64> = (0..2 * 3).map(|_| 2.0 * rng.normal()).collect();
            let q = SearchDist::MeanField(MeanFieldParams::new(2, 3, a).unwrap());
            let p = SearchDist::MeanField(MeanFieldParams::new(2, 3, b).unwrap());
            assert!(q.kl_exact(&p).unwrap().unwrap() >= 0.0);
        }
    }

    #[test]
    fn fit_ml_recovers_constant_corpus() {
        let corpus: Vec<Sequence> = (0..100).map(|_| seq(&[1, 3, 1])).collect();
        let fit = fit_ml(&corpus, Family::MeanField, 4).unwrap();
        if let SearchDist::MeanField(p) = &fit {
            for m in 0..3 {
                let probs = p.probs_at(m);
                let tok = [1usize, 3, 1][m];
                assert!(probs[tok] >= 0.99, "pos {m}: {probs:?}");
            }
        } else {
            panic!("wrong family");
        }
    }

    #[test]
    fn fit_ml_uniform_corpus_recovers_uniform() {
        let space = SeqSpace::new(2, 3).unwrap();
        let corpus: Vec<Sequence> = space.iter().collect();
        let fit = fit_ml(&corpus, Family::MeanField, 2).unwrap();
        if let SearchDist::MeanField(p) = &fit {
            for m in 0..3 {
                let probs = p.probs_at(m);
                assert!((probs[0] - 0.5).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fit_ml_bigram_counts() {
        // Corpus transitions at position 1: 0->1 twice, 1->0 once.
        let corpus = vec![seq(&[0, 1]), seq(&[0, 1]), seq(&[1, 0])];
        let fit = fit_ml(&corpus, Family::FirstOrderAr, 2).unwrap();
        if let SearchDist::Ar(p) = &fit {
            let row = p.transition_logits(1, 0);
            // counts (0.1, 2.1) over total 2.2
            let expect = math::ln(2.1 / 2.2);
            assert!((row[1] - expect).abs() < 1e-12);
            let row = p.transition_logits(1, 1);
            let expect = math::ln(1.1 / 1.2);
            assert!((row[0] - expect).abs() < 1e-12);
        } else {
            panic!("wrong family");
        }
    }

    #[test]
    fn monte_carlo_kl_tracks_enumeration_for_mixed_families() {
        let mut rng = Stream::new(16);
        let theta: Vec<f64> = (0..2 + 2 * 4).map(|_| 0.6 * rng.normal()).collect();
        let q = SearchDist::Ar(ArParams::new(3, 2, theta).unwrap());
        let logits: Vec<f64> = (0..6).map(|_| 0.6 * rng.normal()).collect();
        let p = SearchDist::MeanField(MeanFieldParams::new(3, 2, logits).unwrap());
        assert_eq!(q.kl_exact(&p).unwrap(), None);
        let space = SeqSpace::new(2, 3).unwrap();
        let exact: f64 = space
            .iter()
            .map(|x| {
                let lq = q.log_prob(&x).unwrap();
                math::exp(lq) * (lq - p.log_prob(&x).unwrap())
            })
            .sum();
        let mc = q.kl_monte_carlo(&p, 200_000, &mut rng).unwrap();
        assert!((mc - exact).abs() < 0.02, "mc={mc} exact={exact}");
    }

    #[test]
    fn fit_ml_rejects_empty() {
        assert_eq!(fit_ml(&[], Family::MeanField, 2), Err(Error::EmptyDataset));
    }

    #[test]
    fn snapshot_round_trips_exactly() {
        let mut rng = Stream::new(9);
        for family in [Family::MeanField, Family::FirstOrderAr] {
            let mut q = SearchDist::uniform(family, 3, 4);
            for p in q.params_mut() {
                *p = rng.normal();
            }
            let text = q.to_snapshot();
            let back = SearchDist::from_snapshot(&text).unwrap();
            assert_eq!(q, back);
            assert!(text.starts_with("mean-field,3,4") || text.starts_with("autoregressive,3,4"));
        }
    }

    #[test]
    fn log_prob_shape_mismatch() {
        let q = SearchDist::uniform(Family::MeanField, 3, 2);
        assert!(q.log_prob(&seq(&[0, 1])).is_err());
        assert!(q.log_prob(&seq(&[0, 1, 5])).is_err());
    }
}
