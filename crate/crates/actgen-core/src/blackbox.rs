//! Black-box fitness functions and the noisy measurement channel: tabulated
//! landscapes over enumerable domains, a closed-form quantized-motif
//! benchmark for larger spaces, a synthetic landscape generator, and the
//! brute-force oracle posterior used for verification.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::genmodel::SearchDist;
use crate::math;
use crate::rng::Stream;
use crate::seq::{SeqSpace, Sequence, Token};

/// Largest domain the dense tabulated/oracle code will enumerate.
pub const MAX_ENUMERABLE: u64 = 1 << 20;

/// Additive Gaussian measurement noise; zero deviation makes evaluation a
/// pure lookup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoisyChannel {
    pub noise_std: f64,
}

impl NoisyChannel {
    pub fn new(noise_std: f64) -> Result<Self> {
        if !(noise_std >= 0.0) || !noise_std.is_finite() {
            return Err(Error::InvalidParam("noise std must be nonnegative"));
        }
        Ok(NoisyChannel { noise_std })
    }

    pub fn noiseless() -> Self {
        NoisyChannel { noise_std: 0.0 }
    }
}

/// A fitness function y = f(x) over a fixed sequence space.
pub trait FitnessFn {
    fn seq_len(&self) -> usize;
    fn vocab_size(&self) -> usize;
    fn eval(&self, x: &Sequence) -> Result<f64>;

    fn space(&self) -> SeqSpace {
        SeqSpace::new(self.vocab_size(), self.seq_len()).expect("valid function space")
    }
}

/// y_i = f(x_i) + eps_i with eps i.i.d. Gaussian(0, noise_std^2).
pub fn evaluate(
    f: &dyn FitnessFn,
    channel: &NoisyChannel,
    batch: &[Sequence],
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut out = Vec::with_capacity(batch.len());
    for x in batch {
        let mut y = f.eval(x)?;
        if channel.noise_std > 0.0 {
            y += channel.noise_std * rng.normal();
        }
        out.push(y);
    }
    Ok(out)
}

/// Dense fitness table over a complete enumerable domain. Rows missing from
/// the source take a configurable fill value.
#[derive(Clone, Debug)]
pub struct TabulatedLandscape {
    space: SeqSpace,
    values: Vec<f64>,
    fill_value: f64,
    missing: usize,
}

impl TabulatedLandscape {
    /// Build from explicit rows; every unlisted sequence gets `fill_value`.
    /// Duplicate sequences are an error.
    pub fn from_rows(
        space: SeqSpace,
        rows: impl IntoIterator<Item = (Sequence, f64)>,
        fill_value: f64,
    ) -> Result<Self> {
        let n = Self::checked_size(space)?;
        let mut values = vec![fill_value; n];
        let mut defined = vec![false; n];
        let mut provided = 0usize;
        for (x, y) in rows {
            if !y.is_finite() {
                return Err(Error::NonFinite("fitness value"));
            }
            let ix = space.index_of(&x)?;
            if defined[ix] {
                return Err(Error::DuplicateKey(debug_tokens(&x)));
            }
            defined[ix] = true;
            values[ix] = y;
            provided += 1;
        }
        Ok(TabulatedLandscape { space, values, fill_value, missing: n - provided })
    }

    /// Build from a complete dense value vector in lexicographic order.
    pub fn from_values(space: SeqSpace, values: Vec<f64>) -> Result<Self> {
        let n = Self::checked_size(space)?;
        if values.len() != n {
            return Err(Error::ShapeMismatch { expected: n, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("fitness value"));
        }
        Ok(TabulatedLandscape { space, values, fill_value: f64::NAN, missing: 0 })
    }

    fn checked_size(space: SeqSpace) -> Result<usize> {
        let n = space
            .count()
            .ok_or(Error::DomainTooLarge { size: u64::MAX, max: MAX_ENUMERABLE })?;
        if n > MAX_ENUMERABLE {
            return Err(Error::DomainTooLarge { size: n, max: MAX_ENUMERABLE });
        }
        Ok(n as usize)
    }

    pub fn fill_value(&self) -> f64 {
        self.fill_value
    }

    /// Number of entries that fell back to the fill value.
    pub fn missing_count(&self) -> usize {
        self.missing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_fitness(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Size of the super level set {x : f(x) > tau} by exhaustive scan.
    pub fn super_level_count(&self, tau: f64) -> usize {
        self.values.iter().filter(|&&v| v > tau).count()
    }

    /// Empirical quantile of the full table.
    pub fn fitness_quantile(&self, gamma: f64) -> Result<f64> {
        crate::seq::empirical_quantile(&self.values, gamma)
    }
}

fn debug_tokens(x: &Sequence) -> alloc::string::String {
    use core::fmt::Write;
    let mut s = alloc::string::String::new();
    for (i, t) in x.tokens().iter().enumerate() {
        if i > 0 {
            let _ = write!(s, ",");
        }
        let _ = write!(s, "{t}");
    }
    s
}

impl FitnessFn for TabulatedLandscape {
    fn seq_len(&self) -> usize {
        self.space.len()
    }

    fn vocab_size(&self) -> usize {
        self.space.vocab_size()
    }

    fn eval(&self, x: &Sequence) -> Result<f64> {
        Ok(self.values[self.space.index_of(x)?])
    }
}

/// One motif: a token pattern scored at a set of allowed offsets (all valid
/// offsets when unspecified).
#[derive(Clone, Debug, PartialEq)]
pub struct Motif {
    pub pattern: Vec<Token>,
    pub offsets: Option<Vec<usize>>,
}

/// Closed-form quantized-motif benchmark: the product over motifs of
/// floor(q * best matched fraction) / q, which is 1 exactly when every motif
/// is fully present and 0 when nothing matches.
#[derive(Clone, Debug, PartialEq)]
pub struct EhrlichStyleFn {
    seq_len: usize,
    vocab_size: usize,
    motifs: Vec<Motif>,
    quantization: u32,
}

impl EhrlichStyleFn {
    pub fn new(
        seq_len: usize,
        vocab_size: usize,
        motifs: Vec<Motif>,
        quantization: u32,
    ) -> Result<Self> {
        if motifs.is_empty() {
            return Err(Error::InvalidParam("at least one motif required"));
        }
        if quantization == 0 {
            return Err(Error::InvalidParam("quantization must be at least 1"));
        }
        for motif in &motifs {
            if motif.pattern.is_empty() {
                return Err(Error::InvalidParam("empty motif pattern"));
            }
            if motif.pattern.len() > seq_len {
                return Err(Error::MotifTooLong { motif: motif.pattern.len(), seq: seq_len });
            }
            for &t in &motif.pattern {
                if t as usize >= vocab_size {
                    return Err(Error::TokenOutOfRange { token: t as usize, vocab: vocab_size });
                }
            }
            if let Some(offsets) = &motif.offsets {
                if offsets.is_empty() {
                    return Err(Error::InvalidParam("empty offset list"));
                }
                for &o in offsets {
                    if o + motif.pattern.len() > seq_len {
                        return Err(Error::InvalidParam("motif offset out of range"));
                    }
                }
            }
        }
        Ok(EhrlichStyleFn { seq_len, vocab_size, motifs, quantization })
    }

    pub fn score(&self, x: &Sequence) -> Result<f64> {
        if x.len() != self.seq_len {
            return Err(Error::LengthMismatch { expected: self.seq_len, got: x.len() });
        }
        let q = self.quantization as f64;
        let mut total = 1.0;
        for motif in &self.motifs {
            let l = motif.pattern.len();
            let count_at = |off: usize| -> usize {
                motif
                    .pattern
                    .iter()
                    .enumerate()
                    .filter(|&(i, &p)| x.token(off + i) == p)
                    .count()
            };
            let best = match &motif.offsets {
                Some(offsets) => offsets.iter().map(|&o| count_at(o)).max().unwrap_or(0),
                None => (0..=self.seq_len - l).map(count_at).max().unwrap_or(0),
            };
            let frac = best as f64 / l as f64;
            total *= math::floor(q * frac) / q;
        }
        Ok(total)
    }
}

impl FitnessFn for EhrlichStyleFn {
    fn seq_len(&self) -> usize {
        self.seq_len
    }

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn eval(&self, x: &Sequence) -> Result<f64> {
        self.score(x)
    }
}

/// Specification for a reproducible synthetic complete landscape: additive
/// per-position effects plus optional random pairwise epistatic terms, then
/// min-max scaled to [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub vocab_size: usize,
    pub seq_len: usize,
    pub seed: u64,
    pub epistatic_pairs: usize,
}

pub fn synthetic_landscape(spec: &SyntheticSpec) -> Result<TabulatedLandscape> {
    let space = SeqSpace::new(spec.vocab_size, spec.seq_len)?;
    let n = TabulatedLandscape::checked_size(space)?;
    let mut rng = Stream::new(spec.seed).derive(b"synthetic-landscape");
    let m = spec.seq_len;
    let v = spec.vocab_size;
    let additive: Vec<f64> = (0..m * v).map(|_| rng.normal()).collect();
    struct Pair {
        pos_a: usize,
        pos_b: usize,
        tok_a: Token,
        tok_b: Token,
        weight: f64,
    }
    let pairs: Vec<Pair> = (0..spec.epistatic_pairs)
        .map(|_| {
            let pos_a = rng.below(m);
            let mut pos_b = rng.below(m);
            while m > 1 && pos_b == pos_a {
                pos_b = rng.below(m);
            }
            Pair {
                pos_a,
                pos_b,
                tok_a: rng.below(v) as Token,
                tok_b: rng.below(v) as Token,
                weight: 2.0 * rng.normal(),
            }
        })
        .collect();
    let mut values = Vec::with_capacity(n);
    let scale = 1.0 / math::sqrt(m as f64);
    for x in space.iter() {
        let mut y = 0.0;
        for (pos, &t) in x.tokens().iter().enumerate() {
            y += additive[pos * v + t as usize];
        }
        y *= scale;
        for p in &pairs {
            if x.token(p.pos_a) == p.tok_a && x.token(p.pos_b) == p.tok_b {
                y += p.weight * scale;
            }
        }
        values.push(y);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    for y in values.iter_mut() {
        *y = (*y - lo) / span;
    }
    TabulatedLandscape::from_values(space, values)
}

/// Enumerated p(x | y > tau, f): the target distribution an idealized agent
/// with full knowledge of f would sample from.
#[derive(Clone, Debug)]
pub struct OraclePosterior {
    space: SeqSpace,
    probs: Vec<f64>,
}

impl OraclePosterior {
    pub fn space(&self) -> SeqSpace {
        self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, x: &Sequence) -> Result<f64> {
        Ok(self.probs[self.space.index_of(x)?])
    }

    pub fn sample(&self, rng: &mut Stream) -> Sequence {
        self.space.seq_at(rng.categorical(&self.probs))
    }
}

/// Compute the oracle posterior by explicit summation:
/// p(x | y > tau, f) is proportional to p(x) * Phi((f(x) - tau) / noise_std),
/// falling back to the hard indicator 1[f(x) > tau] when the channel is
/// noiseless. The prior defaults to uniform.
pub fn oracle_posterior(
    f: &dyn FitnessFn,
    channel: &NoisyChannel,
    tau: f64,
    prior: Option<&SearchDist>,
) -> Result<OraclePosterior> {
    let space = f.space();
    let n = space
        .count()
        .ok_or(Error::DomainTooLarge { size: u64::MAX, max: MAX_ENUMERABLE })?;
    if n > MAX_ENUMERABLE {
        return Err(Error::DomainTooLarge { size: n, max: MAX_ENUMERABLE });
    }
    let mut probs = Vec::with_capacity(n as usize);
    let mut total = 0.0;
    for x in space.iter() {
        let fx = f.eval(&x)?;
        let likelihood = if channel.noise_std > 0.0 {
            math::norm_cdf((fx - tau) / channel.noise_std)
        } else if fx > tau {
            1.0
        } else {
            0.0
        };
        let px = match prior {
            Some(p) => math::exp(p.log_prob(&x)?),
            None => 1.0,
        };
        let w = px * likelihood;
        total += w;
        probs.push(w);
    }
    if !(total > 0.0) {
        return Err(Error::ZeroNormalizer);
    }
    for p in probs.iter_mut() {
        *p /= total;
    }
    Ok(OraclePosterior { space, probs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmodel::Family;

    fn seq(tokens: &[Token]) -> Sequence {
        Sequence::new(tokens.to_vec())
    }

    #[test]
    fn noiseless_evaluation_is_pure_lookup() {
        let space = SeqSpace::new(2, 3).unwrap();
        let values: Vec<f64> = (0..8).map(|i| i as f64 * 0.5).collect();
        let t = TabulatedLandscape::from_values(space, values).unwrap();
        let batch: Vec<Sequence> = space.iter().collect();
        let mut rng = Stream::new(50);
        let ys = evaluate(&t, &NoisyChannel::noiseless(), &batch, &mut rng).unwrap();
        for (i, y) in ys.iter().enumerate() {
            assert_eq!(*y, i as f64 * 0.5);
        }
        // Rerun must agree bit for bit.
        let ys2 = evaluate(&t, &NoisyChannel::noiseless(), &batch, &mut Stream::new(99)).unwrap();
        assert_eq!(ys, ys2);
    }

    #[test]
    fn noisy_constant_function_mean() {
        struct Const;
        impl FitnessFn for Const {
            fn seq_len(&self) -> usize {
                2
            }
            fn vocab_size(&self) -> usize {
                2
            }
            fn eval(&self, _: &Sequence) -> Result<f64> {
                Ok(3.0)
            }
        }
        let channel = NoisyChannel::new(0.5).unwrap();
        let mut rng = Stream::new(51);
        let batch = vec![seq(&[0, 0]); 100_000];
        let ys = evaluate(&Const, &channel, &batch, &mut rng).unwrap();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        // 3-sigma CLT band: 3 * 0.5 / sqrt(1e5) = 0.0047.
        assert!((mean - 3.0).abs() < 0.005, "mean={mean}");
    }

    #[test]
    fn from_rows_counts_missing_and_rejects_duplicates() {
        let space = SeqSpace::new(2, 3).unwrap();
        let rows: Vec<(Sequence, f64)> =
            space.iter().take(5).map(|x| (x, 1.0)).collect();
        let t = TabulatedLandscape::from_rows(space, rows.clone(), -1.0).unwrap();
        assert_eq!(t.missing_count(), 3);
        assert_eq!(t.eval(&space.seq_at(7)).unwrap(), -1.0);

        let mut dup = rows;
        dup.push((space.seq_at(0), 2.0));
        let err = TabulatedLandscape::from_rows(space, dup, -1.0).unwrap_err();
        assert!(matches!(err, Error::DuplicateKey(_)));
    }

    #[test]
    fn complete_table_has_no_fill() {
        let space = SeqSpace::new(2, 4).unwrap();
        let rows: Vec<(Sequence, f64)> =
            space.iter().enumerate().map(|(i, x)| (x, i as f64)).collect();
        let t = TabulatedLandscape::from_rows(space, rows, -1.0).unwrap();
        assert_eq!(t.missing_count(), 0);
    }

    #[test]
    fn complete_four_to_the_eighth_table() {
        // A full 4^8 = 65,536-row table loads with zero filled entries.
        let space = SeqSpace::new(4, 8).unwrap();
        let rows: Vec<(Sequence, f64)> = space
            .iter()
            .enumerate()
            .map(|(i, x)| (x, (i % 97) as f64 / 97.0))
            .collect();
        let t = TabulatedLandscape::from_rows(space, rows, -1.0).unwrap();
        assert_eq!(t.missing_count(), 0);
        assert_eq!(t.values().len(), 65_536);
    }

    #[test]
    fn wrong_length_rejected() {
        let space = SeqSpace::new(2, 3).unwrap();
        let err =
            TabulatedLandscape::from_rows(space, vec![(seq(&[0, 1]), 1.0)], 0.0).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { .. }));
    }

    #[test]
    fn ehrlich_perfect_and_zero_matches() {
        let f = EhrlichStyleFn::new(
            8,
            4,
            vec![
                Motif { pattern: vec![0, 1, 2, 3], offsets: None },
                Motif { pattern: vec![3, 3], offsets: None },
            ],
            4,
        )
        .unwrap();
        assert_eq!(f.score(&seq(&[0, 1, 2, 3, 3, 0, 0, 0])).unwrap(), 1.0);
        // No token anywhere matches either motif position-wise.
        assert_eq!(f.score(&seq(&[1, 0, 1, 0, 1, 0, 1, 0])).unwrap(), 0.0);
    }

    #[test]
    fn ehrlich_partial_match_quantizes() {
        let f = EhrlichStyleFn::new(
            6,
            4,
            vec![Motif { pattern: vec![2, 2, 2, 2], offsets: Some(vec![0]) }],
            4,
        )
        .unwrap();
        // Exactly two of four motif positions match at the only offset.
        let s = f.score(&seq(&[2, 2, 0, 0, 0, 0])).unwrap();
        assert_eq!(s, 0.5);
    }

    #[test]
    fn ehrlich_rejects_long_motif() {
        let err = EhrlichStyleFn::new(
            3,
            2,
            vec![Motif { pattern: vec![0, 1, 0, 1], offsets: None }],
            4,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MotifTooLong { motif: 4, seq: 3 }));
    }

    #[test]
    fn ehrlich_vocab_relabel_covariance() {
        // Swapping two tokens in both motifs and sequences leaves scores
        // unchanged.
        let f = EhrlichStyleFn::new(
            5,
            3,
            vec![Motif { pattern: vec![0, 1, 2], offsets: None }],
            4,
        )
        .unwrap();
        let relabel = |t: Token| -> Token {
            match t {
                0 => 2,
                2 => 0,
                other => other,
            }
        };
        let g = EhrlichStyleFn::new(
            5,
            3,
            vec![Motif { pattern: vec![2, 1, 0], offsets: None }],
            4,
        )
        .unwrap();
        let space = SeqSpace::new(3, 5).unwrap();
        let mut rng = Stream::new(52);
        for _ in 0..200 {
            let x = space.seq_at(rng.below(243));
            let mapped =
                Sequence::new(x.tokens().iter().map(|&t| relabel(t)).collect());
            assert_eq!(f.score(&x).unwrap(), g.score(&mapped).unwrap());
        }
    }

    #[test]
    fn oracle_constant_function_is_prior() {
        let space = SeqSpace::new(2, 3).unwrap();
        let t = TabulatedLandscape::from_values(space, vec![1.0; 8]).unwrap();
        let channel = NoisyChannel::new(0.5).unwrap();
        let oracle = oracle_posterior(&t, &channel, 0.3, None).unwrap();
        for &p in oracle.probs() {
            assert!((p - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_noiseless_is_uniform_on_super_level_set() {
        let space = SeqSpace::new(2, 3).unwrap();
        let values: Vec<f64> = (0..8).map(|i| if i < 3 { 2.0 } else { 0.0 }).collect();
        let t = TabulatedLandscape::from_values(space, values).unwrap();
        let oracle = oracle_posterior(&t, &NoisyChannel::noiseless(), 1.0, None).unwrap();
        for (i, &p) in oracle.probs().iter().enumerate() {
            let expect = if i < 3 { 1.0 / 3.0 } else { 0.0 };
            assert!((p - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_normalizes_and_is_proportional() {
        let space = SeqSpace::new(2, 3).unwrap();
        let mut rng = Stream::new(53);
        let values: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
        let t = TabulatedLandscape::from_values(space, values.clone()).unwrap();
        let channel = NoisyChannel::new(0.7).unwrap();
        let tau = 0.2;
        let oracle = oracle_posterior(&t, &channel, tau, None).unwrap();
        let total: f64 = oracle.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
        // Spot-check proportionality against direct likelihood ratios.
        let l0 = math::norm_cdf((values[0] - tau) / 0.7);
        let l5 = math::norm_cdf((values[5] - tau) / 0.7);
        let ratio = oracle.probs()[0] / oracle.probs()[5];
        assert!((ratio - l0 / l5).abs() < 1e-9);
    }

    #[test]
    fn oracle_zero_normalizer_errors() {
        let space = SeqSpace::new(2, 2).unwrap();
        let t = TabulatedLandscape::from_values(space, vec![0.0; 4]).unwrap();
        let err = oracle_posterior(&t, &NoisyChannel::noiseless(), 1.0, None).unwrap_err();
        assert_eq!(err, Error::ZeroNormalizer);
    }

    #[test]
    fn oracle_respects_prior() {
        let space = SeqSpace::new(2, 2).unwrap();
        let t = TabulatedLandscape::from_values(space, vec![1.0; 4]).unwrap();
        let mut prior = SearchDist::uniform(Family::MeanField, 2, 2);
        prior.params_mut()[0] = 3.0;
        let oracle =
            oracle_posterior(&t, &NoisyChannel::new(0.4).unwrap(), 0.0, Some(&prior)).unwrap();
        for (i, x) in space.iter().enumerate() {
            let expect = math::exp(prior.log_prob(&x).unwrap());
            assert!((oracle.probs()[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_mass_concentrates_above_threshold() {
        let space = SeqSpace::new(2, 4).unwrap();
        let values: Vec<f64> =
            (0..16).map(|i| if i % 4 == 0 { 1.0 } else { 0.0 }).collect();
        let t = TabulatedLandscape::from_values(space, values.clone()).unwrap();
        // Noise well under the margin between levels and tau.
        let channel = NoisyChannel::new(0.04).unwrap();
        let oracle = oracle_posterior(&t, &channel, 0.5, None).unwrap();
        let mass_high: f64 = oracle
            .probs()
            .iter()
            .zip(&values)
            .filter(|&(_, &v)| v > 0.5)
            .map(|(&p, _)| p)
            .sum();
        assert!(mass_high > 0.5);
    }

    #[test]
    fn synthetic_landscape_is_deterministic_and_scaled() {
        let spec = SyntheticSpec { vocab_size: 3, seq_len: 4, seed: 7, epistatic_pairs: 5 };
        let a = synthetic_landscape(&spec).unwrap();
        let b = synthetic_landscape(&spec).unwrap();
        assert_eq!(a.values(), b.values());
        assert!((a.max_fitness() - 1.0).abs() < 1e-12);
        let min = a.values().iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(min, 0.0);
    }
}
