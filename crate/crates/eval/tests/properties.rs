use lpssl_core::graph::{random_link_split, Edge, SplitFractions};
use lpssl_core::Graph;
use lpssl_eval::{
    average_precision, evaluate_split, friedman_test, hits_at_k, oracle, roc_auc, ScoreSet,
};
use proptest::prelude::*;

/// Scores on a coarse grid so ties are frequent.
fn scores(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u8..20).prop_map(|v| v as f64 / 20.0), 1..=max)
}

fn score_set() -> impl Strategy<Value = ScoreSet> {
    (scores(100), scores(100)).prop_map(|(p, n)| ScoreSet::new(p, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn metrics_match_brute_force(s in score_set(), k_raw in 1usize..=100) {
        let k = 1 + (k_raw - 1) % s.y_neg.len();
        prop_assert!((hits_at_k(&s, k).unwrap() - oracle::hits_at_k(&s, k)).abs() <= 1e-12);
        prop_assert!((roc_auc(&s).unwrap() - oracle::roc_auc(&s)).abs() <= 1e-12);
        prop_assert!((average_precision(&s).unwrap() - oracle::average_precision(&s)).abs() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn metrics_invariant_under_monotone_maps(s in score_set(), k_raw in 1usize..=100) {
        let k = 1 + (k_raw - 1) % s.y_neg.len();
        let f = |v: &f64| (3.0 * v).exp() - 7.0;
        let t = ScoreSet::new(s.y_pos.iter().map(f).collect(), s.y_neg.iter().map(f).collect());
        prop_assert_eq!(hits_at_k(&s, k).unwrap(), hits_at_k(&t, k).unwrap());
        prop_assert_eq!(roc_auc(&s).unwrap(), roc_auc(&t).unwrap());
        prop_assert!((average_precision(&s).unwrap() - average_precision(&t).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn friedman_uses_ranks_only(
        m in prop::collection::vec(prop::collection::vec(0u8..10, 4), 3..12),
    ) {
        let a: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        // A different increasing map per run.
        let b: Vec<Vec<f64>> = a
            .iter()
            .enumerate()
            .map(|(i, r)| r.iter().map(|v| (v + i as f64).powi(3) + i as f64).collect())
            .collect();
        let fa = friedman_test(&a).unwrap();
        let fb = friedman_test(&b).unwrap();
        prop_assert_eq!(fa.mean_ranks, fb.mean_ranks);
        prop_assert!((fa.chi_sq - fb.chi_sq).abs() < 1e-12);
    }

    #[test]
    fn metric_ranges(s in score_set()) {
        let auc = roc_auc(&s).unwrap();
        let ap = average_precision(&s).unwrap();
        prop_assert!((0.0..=1.0).contains(&auc));
        prop_assert!(ap > 0.0 && ap <= 1.0);
    }
}

#[test]
fn random_scorer_auc_is_chance() {
    let n = 200;
    let g = Graph::new(n, (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i + 5) % n)])).unwrap();
    let split = random_link_split(&g, SplitFractions::default(), 4).unwrap();
    let trials = 200;
    let mut total = 0.0;
    for seed in 0..trials {
        let scorer = move |pairs: &[Edge]| {
            pairs
                .iter()
                .map(|&(u, v)| {
                    let h = lpssl_core::seed::derive_indexed(seed, "score", (u * n + v) as u64);
                    (h >> 11) as f64 / (1u64 << 53) as f64
                })
                .collect::<Vec<_>>()
        };
        total += evaluate_split(&scorer, &split, 50, seed).unwrap().auc;
    }
    let mean = total / trials as f64;
    // AUC of m x m random scores has variance (2m + 1) / (12 m^2).
    let m = split.test_pos.len() as f64;
    let sigma = ((2.0 * m + 1.0) / (12.0 * m * m) / trials as f64).sqrt();
    assert!((mean - 0.5).abs() <= 3.0 * sigma, "mean auc {mean}, sigma {sigma}");
}
