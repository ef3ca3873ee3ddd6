//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use paci_core::aggregator::{reference_profiles_check, run_series, ModelConfig};
use paci_core::counterfactual::{no_vaccination_series, CounterfactualSpec};
use paci_core::dcm::{
    build_interval_scale, build_weights, fill_pairwise_table, Anchor, Anchors, CardJudgements,
    LevelSequence, SwingRanking,
};
use paci_core::epicriteria::{compute_performances, CriteriaMatrix, PerformanceVector, RawSeries};
use paci_core::sensitivity::{
    envelope_from_matrix, optimize_over_weights, MonteCarlo, PerturbationSpec, SamplingMode, Sense,
    WeightPolyhedron,
};
use paci_core::valuemodel::{
    default_functions, relative_l2_distance, CappedCurve, QuadraticApproximation, INCIDENCE_CARDS,
    INCIDENCE_LEVELS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

const PUBLISHED_DAYS: [(i32, u32, u32, [f64; 5]); 5] = [
    (2020, 3, 20, [194.0, 1.301, 4.160, 128.0, 41.0]),
    (2020, 7, 31, [197.0, 0.978, 1.140, 340.0, 41.0]),
    (2020, 12, 24, [3574.0, 0.987, 2.180, 2348.0, 505.0]),
    (2021, 1, 24, [12341.0, 1.039, 3.460, 5375.0, 742.0]),
    (2021, 7, 10, [3658.0, 1.042, 0.382, 488.0, 144.0]),
];

/// Published criterion values and overall value for each published day.
const PUBLISHED_VALUES: [([f64; 5], f64); 5] = [
    ([3.441, 180.00, 115.571, 1.0240, 4.300], 49.68),
    ([3.503, 60.900, 31.6990, 2.7200, 4.300], 17.04),
    ([180.0, 76.702, 60.5640, 89.056, 180.0], 124.832),
    ([180.0, 180.00, 96.1120, 180.00, 180.0], 163.810),
    ([180.0, 180.00, 10.6240, 3.9040, 52.80], 88.77),
];

fn published_matrix() -> CriteriaMatrix {
    CriteriaMatrix::from_rows(
        PUBLISHED_DAYS
            .iter()
            .map(|&(y, m, d, x)| PerformanceVector::new(date(y, m, d), x))
            .collect(),
    )
    .unwrap()
}

fn published_reproduction() -> Outcome {
    let start = Instant::now();
    let cfg = ModelConfig::default();
    let series = run_series(&published_matrix(), &cfg);
    let elapsed = start.elapsed();
    let w = cfg.weights.as_array();
    let mut worst_overall: f64 = 0.0;
    let mut failures = Vec::new();
    for (k, (point, (values, overall))) in series.points.iter().zip(PUBLISHED_VALUES).enumerate() {
        let dev = (point.overall - overall).abs();
        worst_overall = worst_overall.max(dev);
        if dev > 0.05 {
            failures.push(format!("row {k} overall {:.4} vs {overall}", point.overall));
        }
        for j in 0..5 {
            let computed = point.contributions[j] / w[j];
            let tol = if j == 2 { 0.2 } else { 0.05 };
            if (computed - values[j]).abs() > tol {
                failures.push(format!(
                    "row {k} v{} {:.4} vs {}",
                    j + 1,
                    computed,
                    values[j]
                ));
            }
        }
    }
    if elapsed >= Duration::from_secs(1) {
        failures.push(format!("runtime {elapsed:?}"));
    }
    outcome(
        failures.is_empty(),
        format!(
            "max overall deviation {worst_overall:.4}; {}",
            if failures.is_empty() {
                "all criterion values in tolerance".to_string()
            } else {
                failures.join(", ")
            }
        ),
    )
}

fn incidence_judgements() -> (LevelSequence, CardJudgements) {
    let seq = LevelSequence::new(
        INCIDENCE_LEVELS.to_vec(),
        Anchors {
            lo: Anchor {
                index: 0,
                value: 0.0,
            },
            hi: Anchor {
                index: 5,
                value: 100.0,
            },
        },
    )
    .unwrap();
    (seq, CardJudgements::new(INCIDENCE_CARDS.to_vec()))
}

fn dcm_golden() -> Outcome {
    let (seq, cards) = incidence_judgements();
    let scale = build_interval_scale(&seq, &cards).unwrap();
    let expected = [0.0, 4.0, 16.0, 36.0, 64.0, 100.0, 140.0, 200.0];
    let mut problems = Vec::new();
    if scale.unit_value != 4.0 {
        problems.push(format!("alpha {}", scale.unit_value));
    }
    if scale.values != expected {
        problems.push(format!("breakpoints {:?}", scale.values));
    }
    // Pairwise card table, upper triangle by rows.
    let expected_cards: [&[u32]; 7] = [
        &[0, 3, 8, 15, 24, 35, 49],
        &[2, 7, 14, 23, 34, 48],
        &[4, 11, 20, 31, 45],
        &[6, 15, 26, 40],
        &[8, 19, 33],
        &[10, 24],
        &[13],
    ];
    let table = fill_pairwise_table(&cards);
    let mut mismatched = 0;
    for (i, row) in expected_cards.iter().enumerate() {
        for (off, &e) in row.iter().enumerate() {
            if table.get(i, i + 1 + off) != Some(e) {
                mismatched += 1;
            }
        }
    }
    if mismatched > 0 {
        problems.push(format!("{mismatched} table entries differ"));
    }
    outcome(
        problems.is_empty(),
        format!(
            "alpha {}, breakpoints {:?}, e(0,1575)={:?}, e(900,225)={:?}{}",
            scale.unit_value,
            scale.values,
            table.get(0, 7),
            table.get(1, 4),
            if problems.is_empty() {
                String::new()
            } else {
                format!("; expected {expected:?}: {}", problems.join(", "))
            }
        ),
    )
}

fn weight_derivation() -> Outcome {
    let ranking = SwingRanking {
        tiers: vec![vec![0], vec![2, 3, 4], vec![1]],
        tier_gaps: vec![2, 3],
        z: 2.0,
    };
    let w = build_weights(&ranking).unwrap();
    let expected = [0.27451, 0.13725, 0.19608, 0.19608, 0.19608];
    let worst = w
        .iter()
        .zip(expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(
        worst <= 1e-4,
        format!(
            "weights {:.5?} vs {expected:?}, max deviation {worst:.5}",
            w
        ),
    )
}

fn reference_profiles() -> Outcome {
    let rows = reference_profiles_check(&ModelConfig::default());
    let mut ok = true;
    let mut parts = Vec::new();
    for r in &rows {
        let good = match r.profile.as_str() {
            "baseline" | "critical" => r.computed == r.expected,
            _ => r.deviation().abs() <= 0.35,
        };
        ok &= good;
        parts.push(format!("{} {:.3}", r.profile, r.computed));
    }
    outcome(ok && rows.len() == 7, parts.join(", "))
}

fn quadratic_band() -> Outcome {
    let v1 = &default_functions()[0];
    let q = QuadraticApproximation {
        scale: 100.0,
        anchor_x: 1125.0,
        cap: 180.0,
    };
    let d = relative_l2_distance(v1, &q).unwrap();
    outcome(
        (3.2e-4..=1.3e-3).contains(&d),
        format!("relative L2 distance {d:.6e}, band [3.2e-4, 1.3e-3]"),
    )
}

/// Minimum of `sum k_j v_j / 1000` over integer `k` in the box with
/// `sum k = 1000`, by dynamic programming with a sliding-window minimum.
fn grid_minimum(values: [f64; 5], lo: [i64; 5], hi: [i64; 5]) -> Option<f64> {
    const N: usize = 1000;
    let inf = f64::INFINITY;
    let mut f = vec![inf; N + 1];
    f[0] = 0.0;
    for j in 0..5 {
        let v = values[j] / N as f64;
        let mut g = vec![inf; N + 1];
        let mut deque: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
        let key = |m: usize, f: &[f64]| f[m] - m as f64 * v;
        let mut next_m = 0usize;
        for s in 0..=N {
            // Window m in [s - hi, s - lo].
            let top = s as i64 - lo[j];
            while next_m as i64 <= top {
                let k = key(next_m, &f);
                while deque.back().is_some_and(|&b| key(b, &f) >= k) {
                    deque.pop_back();
                }
                deque.push_back(next_m);
                next_m += 1;
            }
            let bottom = s as i64 - hi[j];
            while deque.front().is_some_and(|&m| (m as i64) < bottom) {
                deque.pop_front();
            }
            if let Some(&m) = deque.front() {
                let best = key(m, &f);
                if best.is_finite() {
                    g[s] = best + s as f64 * v;
                }
            }
        }
        f = g;
    }
    f[N].is_finite().then_some(f[N])
}

fn random_box(rng: &mut ChaCha8Rng) -> ([i64; 5], [i64; 5]) {
    loop {
        let lo: [i64; 5] = std::array::from_fn(|_| rng.random_range(0..=300));
        let hi: [i64; 5] = std::array::from_fn(|j| (lo[j] + rng.random_range(0..=500)).min(1000));
        if lo.iter().sum::<i64>() <= 1000 && hi.iter().sum::<i64>() >= 1000 {
            return (lo, hi);
        }
    }
}

fn lp_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2021);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let (lo, hi) = random_box(&mut rng);
        let values: [f64; 5] = std::array::from_fn(|_| rng.random_range(0.0..180.0));
        let poly =
            WeightPolyhedron::new(lo.map(|k| k as f64 / 1000.0), hi.map(|k| k as f64 / 1000.0))
                .unwrap();
        let (_, min) = optimize_over_weights(values, &poly, Sense::Min);
        let (_, max) = optimize_over_weights(values, &poly, Sense::Max);
        let grid_min = grid_minimum(values, lo, hi).unwrap();
        let grid_max = -grid_minimum(values.map(|v| -v), lo, hi).unwrap();
        worst = worst
            .max((min - grid_min).abs())
            .max((max - grid_max).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 2e-3 && elapsed < Duration::from_secs(30),
        format!(
            "10000 instances, max |greedy - grid| {worst:.3e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

/// 120 evaluable days of smooth synthetic counts.
fn synthetic_raw() -> RawSeries {
    let days = 120 + 27;
    let cases: Vec<f64> = (0..days)
        .map(|t| 3000.0 + 2500.0 * (2.0 * std::f64::consts::PI * t as f64 / 70.0).sin())
        .collect();
    let counts: Vec<(u64, u64, u64, u64)> = (0..days)
        .map(|t| {
            let c = cases[t];
            let lagged = cases[t.saturating_sub(14)];
            (
                c.round() as u64,
                (0.012 * lagged).round() as u64,
                (0.6 * c + 200.0).round() as u64,
                (0.08 * c + 20.0).round() as u64,
            )
        })
        .collect();
    RawSeries::from_counts(date(2020, 9, 1), &counts).unwrap()
}

fn spec(delta: f64, samples: usize) -> PerturbationSpec {
    PerturbationSpec {
        perf_delta: delta,
        value_delta: delta,
        weight_delta: delta,
        rng_seed: 7,
        sample_count: samples,
    }
}

fn envelope_properties() -> Outcome {
    let matrix = compute_performances(&synthetic_raw()).unwrap();
    let cfg = ModelConfig::default();
    let e10 = envelope_from_matrix(&matrix, &cfg, &spec(0.10, 1)).unwrap();
    let e05 = envelope_from_matrix(&matrix, &cfg, &spec(0.05, 1)).unwrap();
    let sandwich = e10
        .days
        .iter()
        .all(|d| d.v_minus <= d.v_nominal && d.v_nominal <= d.v_plus);
    let monotone = e10
        .days
        .iter()
        .zip(&e05.days)
        .all(|(a, b)| a.spread() >= b.spread());
    let mc = MonteCarlo::new(&matrix, &cfg, &spec(0.10, 400), SamplingMode::AroundNominal).unwrap();
    let mut outside = 0;
    for t in mc.run().unwrap() {
        for (v, d) in t.values.iter().zip(&e10.days) {
            if *v < d.v_minus - 1e-9 || *v > d.v_plus + 1e-9 {
                outside += 1;
            }
        }
    }
    let s = e10.summary();
    outcome(
        matrix.len() == 120 && sandwich && monotone && outside == 0,
        format!(
            "{} days, sandwich {sandwich}, 10% >= 5% spread {monotone}, {outside} trajectory points outside; mean spread {:.3}, sd {:.3}",
            matrix.len(),
            s.mean,
            s.sd
        ),
    )
}

fn counterfactual() -> Outcome {
    let cfg = ModelConfig::default();
    let matrix = compute_performances(&synthetic_raw()).unwrap();
    let pivot = CounterfactualSpec { pivot_day: 60 };
    let actual = run_series(&matrix, &cfg);
    let cf = no_vaccination_series(&matrix, &cfg, &pivot).unwrap();
    let pre_equal = actual.points[..=60]
        .iter()
        .zip(&cf.points)
        .all(|(a, c)| a.overall == c.overall);
    let pillar_one = actual.points.iter().zip(&cf.points).all(|(a, c)| {
        a.contributions[0].to_bits() == c.contributions[0].to_bits()
            && a.contributions[1].to_bits() == c.contributions[1].to_bits()
    });

    let rows: Vec<PerformanceVector> = (0..40)
        .map(|t| {
            let severity = if t > 20 { 0.5 } else { 1.0 };
            PerformanceVector::new(
                date(2021, 3, 1) + chrono::Days::new(t),
                [1000.0, 1.0, 1.5, 2000.0 * severity, 150.0 * severity],
            )
        })
        .collect();
    let hand = CriteriaMatrix::from_rows(rows).unwrap();
    let spec = CounterfactualSpec { pivot_day: 20 };
    let a = run_series(&hand, &cfg);
    let c = no_vaccination_series(&hand, &cfg, &spec).unwrap();
    let dominated = a
        .points
        .iter()
        .zip(&c.points)
        .skip(21)
        .all(|(a, c)| c.overall >= a.overall);
    let gap = c.points[30].overall - a.points[30].overall;
    outcome(
        pre_equal && pillar_one && dominated && gap > 0.0,
        format!("pre-pivot equal {pre_equal}, incidence and transmission identical {pillar_one}, severity drop dominated {dominated} (gap {gap:.3})"),
    )
}

fn value_function_structure() -> Outcome {
    let fs = default_functions();
    let mut problems = Vec::new();
    for (j, f) in fs.iter().enumerate() {
        let bps = f.breakpoints();
        let x_end = f.cap_onset() * 1.5;
        for &(x, y) in bps {
            let h = 1e-9 * x.abs().max(1.0);
            let left = CappedCurve::value_at(f, (x - h).max(0.0));
            let right = CappedCurve::value_at(f, x + h);
            let slope = bps
                .windows(2)
                .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                .fold(0.0, f64::max);
            if (CappedCurve::value_at(f, x) - y).abs() > 1e-9
                || (right - left).abs() > 2.0 * slope * h + 1e-9
            {
                problems.push(format!("v{} jump at {x}", j + 1));
            }
        }
        let mut prev = 0.0;
        for k in 0..=20_000 {
            let v = CappedCurve::value_at(f, x_end * k as f64 / 20_000.0);
            if v < prev {
                problems.push(format!(
                    "v{} decreases near {}",
                    j + 1,
                    x_end * k as f64 / 20_000.0
                ));
                break;
            }
            prev = v;
        }
        if f.cap() != 180.0 || f.max_value() != 180.0 || CappedCurve::value_at(f, x_end) != 180.0 {
            problems.push(format!("v{} cap", j + 1));
        }
    }
    let anchors = [1125.0, 1.0, 3.6, 2500.0, 200.0];
    let at_anchor: Vec<f64> = fs
        .iter()
        .zip(anchors)
        .map(|(f, x)| f.evaluate(x).unwrap())
        .collect();
    if at_anchor.iter().any(|&v| v != 100.0) {
        problems.push(format!("anchor values {at_anchor:?}"));
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("continuous, non-decreasing, capped at 180; anchor values {at_anchor:?}")
        } else {
            problems.join(", ")
        },
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw.csv");
    let mut buf = Vec::new();
    synthetic_raw().write_csv(&mut buf).unwrap();
    std::fs::write(&input, buf).unwrap();
    let run = || {
        let argv = [
            "paci",
            "sensitivity",
            "simulate",
            "--input",
            input.to_str().unwrap(),
            "--seed",
            "42",
            "--samples",
            "1000",
        ]
        .map(String::from)
        .to_vec();
        let mut out = Vec::new();
        paci_cli::run(argv, &mut out).unwrap();
        out
    };
    let (a, b) = (run(), run());
    let lines = a.iter().filter(|&&c| c == b'\n').count();
    outcome(
        a == b && lines == 1 + 1000 * 120,
        format!("{} bytes, {lines} lines, identical {}", a.len(), a == b),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("published-days-reproduction", published_reproduction),
        ("dcm-golden-values", dcm_golden),
        ("weight-derivation", weight_derivation),
        ("reference-profiles", reference_profiles),
        ("quadratic-approximation", quadratic_band),
        ("lp-oracle-equivalence", lp_oracle),
        ("envelope-properties", envelope_properties),
        ("counterfactual", counterfactual),
        ("value-function-structure", value_function_structure),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| outcome(false, "panicked"));
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
