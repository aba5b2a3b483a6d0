//! Property tests over the core domain operations.

use actgen_core::genmodel::{MeanFieldParams, SearchDist};
use actgen_core::metrics::levenshtein;
use actgen_core::seq::{empirical_quantile, relabel, LabeledDataset, Sequence};
use proptest::prelude::*;

fn seq_strategy(len: usize, vocab: u16) -> impl Strategy<Value = Sequence> {
    prop::collection::vec(0..vocab, len).prop_map(Sequence::new)
}

proptest! {
    #[test]
    fn relabel_positive_count_matches_scan(
        fitness in prop::collection::vec(-10.0f64..10.0, 1..64),
        tau in -10.0f64..10.0,
    ) {
        let entries: Vec<(Sequence, f64)> =
            fitness.iter().map(|&y| (Sequence::new(vec![0, 1]), y)).collect();
        let ds = LabeledDataset::new(entries).unwrap();
        let bin = relabel(&ds, tau).unwrap();
        let scan = fitness.iter().filter(|&&y| y > tau).count();
        prop_assert_eq!(bin.positives(), scan);
    }

    #[test]
    fn quantile_monotone_in_gamma(
        mut values in prop::collection::vec(-100.0f64..100.0, 1..50),
        a in 0.01f64..0.99,
        b in 0.01f64..0.99,
    ) {
        values.iter_mut().for_each(|v| *v = (*v * 100.0).round() / 100.0);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let qa = empirical_quantile(&values, lo).unwrap();
        let qb = empirical_quantile(&values, hi).unwrap();
        prop_assert!(qa <= qb + 1e-12);
    }

    #[test]
    fn quantile_within_data_range(
        values in prop::collection::vec(-100.0f64..100.0, 1..50),
        gamma in 0.01f64..0.99,
    ) {
        let q = empirical_quantile(&values, gamma).unwrap();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(q >= min - 1e-12 && q <= max + 1e-12);
    }

    #[test]
    fn kl_nonnegative_and_zero_on_self(
        q_logits in prop::collection::vec(-4.0f64..4.0, 6),
        p_logits in prop::collection::vec(-4.0f64..4.0, 6),
    ) {
        let q = SearchDist::MeanField(MeanFieldParams::new(2, 3, q_logits).unwrap());
        let p = SearchDist::MeanField(MeanFieldParams::new(2, 3, p_logits).unwrap());
        prop_assert!(q.kl_exact(&p).unwrap().unwrap() >= 0.0);
        prop_assert!(q.kl_exact(&q).unwrap().unwrap() < 1e-12);
    }

    #[test]
    fn levenshtein_metric_axioms(
        a in seq_strategy(6, 3),
        b in seq_strategy(6, 3),
        c in seq_strategy(6, 3),
    ) {
        let dab = levenshtein(a.tokens(), b.tokens());
        let dba = levenshtein(b.tokens(), a.tokens());
        prop_assert_eq!(dab, dba);
        prop_assert_eq!(levenshtein(a.tokens(), a.tokens()), 0);
        let dac = levenshtein(a.tokens(), c.tokens());
        let dbc = levenshtein(b.tokens(), c.tokens());
        prop_assert!(dac <= dab + dbc);
    }
}
