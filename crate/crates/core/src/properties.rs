//! Randomised invariants across modules.

use chrono::NaiveDate;
use proptest::prelude::*;

use crate::aggregator::{aggregate, classify, compare, run_series, ModelConfig, StateScale};
use crate::counterfactual::{no_vaccination_series, CounterfactualSpec};
use crate::dcm::{
    build_interval_scale, build_weights, check_consistency, fill_pairwise_table, Anchor, Anchors,
    CardJudgements, LevelSequence, SwingRanking,
};
use crate::epicriteria::{
    compute_performances, correlations, incidence, lethality, CriteriaMatrix, PerformanceVector,
    RawSeries, MIN_SERIES_LEN,
};
use crate::sensitivity::{envelope_from_matrix, PerturbationSpec};
use crate::valuemodel::default_functions;

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 3, 1).unwrap()
}

fn raw_counts(len: usize) -> impl Strategy<Value = Vec<(u64, u64, u64, u64)>> {
    prop::collection::vec((0u64..5000, 0u64..60, 0u64..4000, 0u64..400), len)
}

fn performance() -> impl Strategy<Value = [f64; 5]> {
    (0.0..16000.0, 0.0..1.3, 0.0..8.0, 0.0..6000.0, 0.0..900.0)
        .prop_map(|(a, b, c, d, e)| [a, b, c, d, e])
}

fn matrix(rows: &[[f64; 5]]) -> CriteriaMatrix {
    CriteriaMatrix::from_rows(
        rows.iter()
            .enumerate()
            .map(|(i, x)| PerformanceVector::new(start() + chrono::Days::new(i as u64), *x))
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn appending_days_keeps_earlier_rows(
        counts in raw_counts(MIN_SERIES_LEN + 10),
        extra in raw_counts(15),
    ) {
        let short = RawSeries::from_counts(start(), &counts).unwrap();
        let long_counts: Vec<_> = counts.iter().chain(&extra).copied().collect();
        let long = RawSeries::from_counts(start(), &long_counts).unwrap();
        let a = compute_performances(&short).unwrap();
        let b = compute_performances(&long).unwrap();
        prop_assert_eq!(a.rows(), &b.rows()[..a.len()]);
    }

    #[test]
    fn incidence_rises_with_any_window_day(
        counts in raw_counts(10),
        day in 3usize..10,
        bump in 1u64..100,
    ) {
        let raw = RawSeries::from_counts(start(), &counts).unwrap();
        let mut bumped = counts.clone();
        bumped[day].0 += bump;
        let raw2 = RawSeries::from_counts(start(), &bumped).unwrap();
        prop_assert!(incidence(&raw2, 9).unwrap() > incidence(&raw, 9).unwrap());
    }

    #[test]
    fn lethality_is_zero_iff_no_deaths(counts in raw_counts(MIN_SERIES_LEN)) {
        let raw = RawSeries::from_counts(start(), &counts).unwrap();
        let l = lethality(&raw, MIN_SERIES_LEN - 1).unwrap();
        prop_assert!(l.value >= 0.0);
        let window = &counts[MIN_SERIES_LEN - 14..];
        let cases = &counts[MIN_SERIES_LEN - 28..MIN_SERIES_LEN - 14];
        let counted_deaths: u64 = window
            .iter()
            .zip(cases)
            .filter(|(_, c)| c.0 > 0)
            .map(|(d, _)| d.1)
            .sum();
        prop_assert_eq!(l.value == 0.0, counted_deaths == 0);
    }

    #[test]
    fn correlation_table_is_symmetric(rows in prop::collection::vec(performance(), 3..20)) {
        let t = correlations(&matrix(&rows)).unwrap();
        for i in 0..5 {
            prop_assert_eq!(t.get(i, i), Some(1.0));
            for j in 0..5 {
                prop_assert_eq!(t.get(i, j), t.get(j, i));
                if let Some(r) = t.get(i, j) {
                    prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
                }
            }
        }
    }

    #[test]
    fn interval_scale_is_affine_covariant(
        gaps in prop::collection::vec(0u32..15, 2..8),
        a in -50.0..50.0f64,
        b in 0.1..10.0f64,
    ) {
        let n = gaps.len() + 1;
        let levels: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let anchors = |lo: f64, hi: f64| Anchors {
            lo: Anchor { index: 0, value: lo },
            hi: Anchor { index: n - 1, value: hi },
        };
        let cards = CardJudgements::new(gaps);
        let base = build_interval_scale(&LevelSequence::new(levels.clone(), anchors(0.0, 100.0)).unwrap(), &cards).unwrap();
        let moved = build_interval_scale(&LevelSequence::new(levels, anchors(a, a + b * 100.0)).unwrap(), &cards).unwrap();
        for (u, v) in base.values.iter().zip(&moved.values) {
            prop_assert!((a + b * u - v).abs() < 1e-9);
        }
        prop_assert!(base.values.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(check_consistency(&fill_pairwise_table(&cards)).is_consistent());
    }

    #[test]
    fn swing_weights_follow_tiers(
        split in prop::sample::subsequence(vec![1usize, 2, 3, 4], 0..=4),
        gaps in prop::collection::vec(0u32..6, 4),
        z in 1.01..9.0f64,
    ) {
        let mut tiers = Vec::new();
        let mut prev = 0;
        for &cut in split.iter().chain(std::iter::once(&5)) {
            tiers.push((prev..cut).collect::<Vec<usize>>());
            prev = cut;
        }
        let ranking = SwingRanking { tier_gaps: gaps[..tiers.len() - 1].to_vec(), tiers: tiers.clone(), z };
        let w = build_weights(&ranking).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&x| x > 0.0));
        for pair in tiers.windows(2) {
            prop_assert!(w[pair[0][0]] > w[pair[1][0]]);
        }
        if tiers.len() > 1 {
            prop_assert!((w[tiers[0][0]] / w[tiers[tiers.len() - 1][0]] - z).abs() < 1e-9);
        }
    }

    #[test]
    fn value_functions_are_bounded_and_monotone(x in 0.0..20000.0f64, dx in 0.0..500.0f64) {
        for f in default_functions() {
            let (a, b) = (f.evaluate(x).unwrap(), f.evaluate(x + dx).unwrap());
            prop_assert!((0.0..=180.0).contains(&a));
            prop_assert!(b >= a);
        }
    }

    #[test]
    fn aggregate_is_monotone_and_bounded(x in performance(), j in 0usize..5, up in 0.0..2000.0f64) {
        let cfg = ModelConfig::default();
        let date = start();
        let p = aggregate(&PerformanceVector::new(date, x), &cfg);
        let mut y = x;
        y[j] += up;
        let q = aggregate(&PerformanceVector::new(date, y), &cfg);
        prop_assert!(q.overall >= p.overall);

        let values = cfg.criterion_values(&PerformanceVector::new(date, x));
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(0.0, f64::max);
        prop_assert!(p.overall >= lo - 1e-9 && p.overall <= hi + 1e-9);
        prop_assert!((p.contributions.iter().sum::<f64>() - p.overall).abs() < 1e-9);
    }

    #[test]
    fn classify_without_hysteresis_ignores_history(v in 0.0..200.0f64, prev in 0usize..7) {
        let scale = StateScale::default();
        let label = &scale.cutoffs[prev].label;
        prop_assert_eq!(classify(v, &scale, Some(label)), classify(v, &scale, None));
    }

    #[test]
    fn compare_is_transitive(a in performance(), b in performance(), c in performance()) {
        use std::cmp::Ordering::*;
        let cfg = ModelConfig::default();
        let p: Vec<_> = [a, b, c].iter().map(|x| aggregate(&PerformanceVector::new(start(), *x), &cfg)).collect();
        let ab = compare(&p[0], &p[1]).unwrap();
        let bc = compare(&p[1], &p[2]).unwrap();
        let ac = compare(&p[0], &p[2]).unwrap();
        if ab != Less && bc != Less {
            prop_assert!(ac != Less);
        }
        if ab != Greater && bc != Greater {
            prop_assert!(ac != Greater);
        }
    }

    #[test]
    fn envelope_sandwich_and_spread_growth(
        rows in prop::collection::vec(performance(), 1..15),
        d in 0.0..0.4f64,
    ) {
        let m = matrix(&rows);
        let cfg = ModelConfig::default();
        let spec = |delta: f64| PerturbationSpec { perf_delta: delta, value_delta: delta, weight_delta: delta, ..Default::default() };
        let wide = envelope_from_matrix(&m, &cfg, &spec(d)).unwrap();
        let narrow = envelope_from_matrix(&m, &cfg, &spec(d / 2.0)).unwrap();
        for (w, n) in wide.days.iter().zip(&narrow.days) {
            prop_assert!(w.v_minus <= w.v_nominal + 1e-9 && w.v_nominal <= w.v_plus + 1e-9);
            prop_assert!(w.spread() >= n.spread() - 1e-9);
        }
    }

    #[test]
    fn counterfactual_keeps_prefix_and_spread_criteria(
        rows in prop::collection::vec(performance(), 3..30),
        pivot_frac in 0.0..1.0f64,
    ) {
        let m = matrix(&rows);
        let pivot = 1 + ((rows.len() - 2) as f64 * pivot_frac) as usize;
        prop_assume!(m.rows()[..pivot].iter().any(|r| r.incidence > 0.0));
        let cfg = ModelConfig::default();
        let actual = run_series(&m, &cfg);
        let cf = no_vaccination_series(&m, &cfg, &CounterfactualSpec { pivot_day: pivot }).unwrap();
        for (t, (a, c)) in actual.points.iter().zip(&cf.points).enumerate() {
            if t <= pivot {
                prop_assert_eq!(a.overall, c.overall);
            }
            prop_assert_eq!(a.contributions[0].to_bits(), c.contributions[0].to_bits());
            prop_assert_eq!(a.contributions[1].to_bits(), c.contributions[1].to_bits());
        }
    }
}
