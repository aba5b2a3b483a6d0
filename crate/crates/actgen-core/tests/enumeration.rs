//! Cross-module checks on fully enumerable domains: sampling consistency,
//! ELBO bound behavior, and the variational-family normalization contract
//! at the largest tractable sizes.

use actgen_core::genmodel::{fit_ml, ArParams, Family, MeanFieldParams, SearchDist};
use actgen_core::math;
use actgen_core::rng::Stream;
use actgen_core::seq::SeqSpace;
use actgen_core::vi::{estimate_elbo, KlMode, ScoreBackend, ScoreTable};

#[test]
fn normalization_holds_at_enumeration_ceiling() {
    // M * ln|V| <= 16 nats: 8 binary positions and 3 positions over 5 tokens.
    let mut rng = Stream::new(80);
    for (vocab, len) in [(2usize, 8usize), (5, 3), (4, 4)] {
        let logits: Vec<f64> = (0..len * vocab).map(|_| rng.normal()).collect();
        let q = SearchDist::MeanField(MeanFieldParams::new(len, vocab, logits).unwrap());
        let space = SeqSpace::new(vocab, len).unwrap();
        let total: f64 = space.iter().map(|x| math::exp(q.log_prob(&x).unwrap())).sum();
        assert!((total - 1.0).abs() < 1e-10, "mean-field V={vocab} M={len}");

        let dim = vocab + (len - 1) * vocab * vocab;
        let theta: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let q = SearchDist::Ar(ArParams::new(len, vocab, theta).unwrap());
        let total: f64 = space.iter().map(|x| math::exp(q.log_prob(&x).unwrap())).sum();
        assert!((total - 1.0).abs() < 1e-10, "autoregressive V={vocab} M={len}");
    }
}

#[test]
fn sampling_frequencies_track_log_prob() {
    // Empirical frequencies converge at the Monte-Carlo rate; check every
    // point sits inside a three-sigma binomial band.
    let mut rng = Stream::new(81);
    let logits: Vec<f64> = (0..3 * 2).map(|_| 0.7 * rng.normal()).collect();
    let q = SearchDist::MeanField(MeanFieldParams::new(3, 2, logits).unwrap());
    let space = SeqSpace::new(2, 3).unwrap();
    let s = 200_000usize;
    let mut counts = [0usize; 8];
    for x in q.sample(&mut rng, s) {
        counts[space.index_of(&x).unwrap()] += 1;
    }
    for (i, x) in space.iter().enumerate() {
        let p = math::exp(q.log_prob(&x).unwrap());
        let freq = counts[i] as f64 / s as f64;
        let sigma = (p * (1.0 - p) / s as f64).sqrt();
        assert!(
            (freq - p).abs() <= 3.0 * sigma,
            "point {i}: freq={freq} p={p} sigma={sigma}"
        );
    }
}

#[test]
fn autoregressive_fit_then_sample_round_trip() {
    // Fit a chain on samples of a known chain and compare transition rows.
    let vocab = 3;
    let len = 4;
    let mut rng = Stream::new(82);
    let dim = vocab + (len - 1) * vocab * vocab;
    let theta: Vec<f64> = (0..dim).map(|_| 0.8 * rng.normal()).collect();
    let truth = SearchDist::Ar(ArParams::new(len, vocab, theta).unwrap());
    let corpus = truth.sample(&mut rng, 60_000);
    let fit = fit_ml(&corpus, Family::FirstOrderAr, vocab).unwrap();
    let kl = truth.kl_exact(&fit).unwrap().unwrap();
    assert!(kl < 5e-3, "kl={kl}");
}

#[test]
fn elbo_bound_property_over_random_fixtures() {
    // With prior = q the ELBO is E_q[log score], which can never exceed the
    // maximum log score over the domain.
    let space = SeqSpace::new(2, 3).unwrap();
    let mut rng = Stream::new(83);
    for _ in 0..100 {
        let logits: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        let q = SearchDist::MeanField(MeanFieldParams::new(3, 2, logits).unwrap());
        let scores: Vec<f64> = (0..8).map(|_| -2.0 * rng.uniform() - 0.1).collect();
        let table = ScoreTable::new(space, scores.clone()).unwrap();
        let max_score = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exact: f64 = space
            .iter()
            .enumerate()
            .map(|(i, x)| math::exp(q.log_prob(&x).unwrap()) * scores[i])
            .sum();
        assert!(exact <= max_score + 1e-12);
        // The Monte-Carlo estimate agrees with the exact value within its
        // own error bars.
        let est = estimate_elbo(
            &q,
            &ScoreBackend::Table(&table),
            &q.clone(),
            4096,
            &mut rng,
            KlMode::MonteCarlo,
        )
        .unwrap();
        assert!((est.value - exact).abs() < 4.0 * est.standard_error() + 1e-6);
    }
}
