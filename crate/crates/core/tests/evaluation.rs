use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use forum_sentinel::corpus::Thread;
use forum_sentinel::discourse::{ConnectiveLexicon, TagSource};
use forum_sentinel::eval::{
    self, annotate_significance, approximate_randomization, EmitFormat, EvalConfig, EvalError,
    EvalReport, FoldAggregation, Regime,
};
use forum_sentinel::features::{prepare_threads, FeatureConfig, PreparedThread};
use forum_sentinel::syngen::{generate, GenSpec, PerCourse};

fn spec(n_courses: usize, threads: usize, seed: u64) -> GenSpec {
    GenSpec {
        n_courses,
        threads_per_course: PerCourse::All(threads),
        intervention_ratio: PerCourse::All(0.4),
        vocabulary_disjointness: 1.0,
        discourse_signal_strength: 0.8,
        lexical_signal_strength: 0.8,
        seed,
    }
}

fn prepare(threads: &[Thread]) -> Vec<PreparedThread> {
    prepare_threads(threads, Some(TagSource::Lexicon(ConnectiveLexicon::english()))).unwrap()
}

fn cfg(features: FeatureConfig) -> EvalConfig {
    EvalConfig {
        features,
        ..Default::default()
    }
}

/// Exact two-sided sign-flip p-value by enumerating all 2^n swaps.
fn exact_p(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let observed = d.iter().sum::<f64>().abs();
    let n = d.len();
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n)
            .map(|i| if mask >> i & 1 == 1 { -d[i] } else { d[i] })
            .sum();
        if s.abs() >= observed - 1e-12 {
            hits += 1;
        }
    }
    hits as f64 / (1u64 << n) as f64
}

#[test]
fn randomization_matches_exact_enumeration() {
    let a = vec![1.0; 10];
    let b = vec![0.0; 10];
    assert_eq!(exact_p(&a, &b), 2.0 / 1024.0);
    assert!(approximate_randomization(&a, &b, 10_000, 3).unwrap() <= 0.01);

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..5 {
        let a: Vec<f64> = (0..12).map(|_| f64::from(u8::from(rng.random_bool(0.7)))).collect();
        let b: Vec<f64> = (0..12).map(|_| f64::from(u8::from(rng.random_bool(0.4)))).collect();
        let exact = exact_p(&a, &b);
        let approx = approximate_randomization(&a, &b, 20_000, 5).unwrap();
        assert!((exact - approx).abs() < 0.02, "{exact} vs {approx}");
    }
}

#[test]
fn disjoint_courses_do_not_leak() {
    let threads = prepare(&generate(&spec(2, 60, 1)).unwrap());
    let report = eval::loo_ccv(&threads, &cfg(FeatureConfig::Edm15)).unwrap();
    assert_eq!(report.leakage.len(), 2);
    for row in &report.leakage {
        assert!(row.held_out_unique_tokens > 0);
        assert_eq!(row.leaked, 0, "{row:?}");
    }
    report.verify_consistency().unwrap();
}

#[test]
fn a_single_course_cannot_be_held_out() {
    let threads = prepare(&generate(&spec(1, 30, 2)).unwrap());
    let err = eval::loo_ccv(&threads, &cfg(FeatureConfig::Pdtb)).unwrap_err();
    assert!(matches!(err, EvalError::TooFewCourses(1)));
    assert!(matches!(
        eval::in_domain(&[], &cfg(FeatureConfig::Pdtb)),
        Err(EvalError::NoThreads)
    ));
}

#[test]
fn input_order_does_not_matter() {
    let threads = prepare(&generate(&spec(3, 40, 3)).unwrap());
    let mut shuffled = threads.clone();
    shuffled.reverse();
    shuffled.swap(0, 50);
    for regime in [Regime::InDomain, Regime::Ccv] {
        for features in [FeatureConfig::Pdtb, FeatureConfig::Edm15] {
            let a = eval::evaluate(&threads, regime, &cfg(features)).unwrap();
            let b = eval::evaluate(&shuffled, regime, &cfg(features)).unwrap();
            assert_eq!(a.render_records(), b.render_records());
        }
    }
}

#[test]
fn mean_aggregation_averages_folds() {
    let threads = prepare(&generate(&spec(2, 50, 4)).unwrap());
    let c = EvalConfig {
        aggregation: FoldAggregation::Mean,
        ..cfg(FeatureConfig::Pdtb)
    };
    let report = eval::in_domain(&threads, &c).unwrap();
    report.verify_consistency().unwrap();
    for course in &report.courses {
        let folds: Vec<_> = report
            .folds
            .iter()
            .filter(|f| f.course_id == course.course_id)
            .collect();
        assert_eq!(folds.len(), 5);
        let p = folds.iter().map(|f| f.metrics.precision).sum::<f64>() / 5.0;
        let r = folds.iter().map(|f| f.metrics.recall).sum::<f64>() / 5.0;
        assert!((course.metrics.precision - p).abs() < 1e-9);
        assert!((course.metrics.recall - r).abs() < 1e-9);
        let counts: usize = folds.iter().map(|f| f.counts.total()).sum();
        assert_eq!(counts, course.n_threads);
    }
}

#[test]
fn reports_round_trip_through_every_format() {
    let threads = prepare(&generate(&spec(2, 40, 5)).unwrap());
    let mut report = eval::loo_ccv(&threads, &cfg(FeatureConfig::Pdtb)).unwrap();
    let base = eval::loo_ccv(&threads, &cfg(FeatureConfig::Edm15)).unwrap();
    annotate_significance(&mut report, &base, 500, 1).unwrap();
    assert_eq!(report.significance.len(), 3);
    assert!(report.significance.iter().all(|s| s.p_value > 0.0 && s.p_value <= 1.0));

    let json = report.render("json".parse::<EmitFormat>().unwrap());
    let back = EvalReport::from_records(&json).unwrap();
    back.verify_consistency().unwrap();
    assert_eq!(back.render_records(), json);

    let csv = report.render(EmitFormat::Csv);
    assert_eq!(csv.lines().count(), 1 + report.courses.len() + 2);
    let table = report.render(EmitFormat::Table);
    for c in &report.courses {
        assert!(table.contains(&c.course_id));
    }
    assert!("xml".parse::<EmitFormat>().is_err());
}

#[test]
fn tampered_records_fail_the_consistency_check() {
    let threads = prepare(&generate(&spec(2, 40, 6)).unwrap());
    let mut report = eval::in_domain(&threads, &cfg(FeatureConfig::Edm15)).unwrap();
    report.macro_avg.precision += 1.0;
    assert!(matches!(report.verify_consistency(), Err(EvalError::Inconsistent(_))));
}
