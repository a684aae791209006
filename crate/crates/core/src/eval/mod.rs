//! In-domain cross-validation, leave-one-course-out evaluation and reporting.

mod folds;
mod metrics;
mod report;
mod significance;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

pub use folds::{stratified_kfold, Folds};
pub use metrics::{macro_average, prf1, weighted_macro_average, ConfusionCounts, Metrics};
pub use report::{
    ConfigEcho, CourseRow, EmitFormat, EvalReport, FoldRow, LeakageRow, Prediction,
    SignificanceNote,
};
pub use significance::{approximate_randomization, significance_marker, DEFAULT_ROUNDS};

use crate::corpus::Label;
use crate::features::{
    build_vocabulary, thread_content_tokens, FeatureConfig, FeatureError, FeatureOptions,
    Featurizer, PreparedThread, Vocabulary,
};
use crate::model::{self, Dataset, ModelError, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("leave-one-course-out needs at least 2 courses, got {0}")]
    TooFewCourses(usize),
    #[error("no threads to evaluate")]
    NoThreads,
    #[error("training pool for held-out course {0} has no intervened thread")]
    NoPositives(String),
    #[error("nothing to average")]
    NothingToAverage,
    #[error("weights must be nonnegative with a positive total")]
    ZeroWeight,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("reports do not cover the same threads: {0}")]
    UnpairedReports(String),
    #[error("inconsistent report: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Regime {
    #[default]
    InDomain,
    Ccv,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::InDomain => "in-domain",
            Regime::Ccv => "ccv",
        }
    }
}

impl FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "in-domain" | "in_domain" | "indomain" => Ok(Self::InDomain),
            "ccv" | "loo-ccv" | "loo_ccv" => Ok(Self::Ccv),
            other => Err(format!("unknown regime {other:?}")),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How in-domain fold results become one course row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FoldAggregation {
    /// Confusion counts summed over folds.
    #[default]
    Pooled,
    /// Mean of per-fold P and R.
    Mean,
}

impl FoldAggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            FoldAggregation::Pooled => "pooled",
            FoldAggregation::Mean => "mean",
        }
    }
}

impl FromStr for FoldAggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pooled" => Ok(Self::Pooled),
            "mean" | "mean-of-folds" => Ok(Self::Mean),
            other => Err(format!("unknown fold aggregation {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub features: FeatureConfig,
    pub k: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub aggregation: FoldAggregation,
    pub options: FeatureOptions,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::Edm15,
            k: 5,
            seed: 0,
            train: TrainConfig::default(),
            aggregation: FoldAggregation::Pooled,
            options: FeatureOptions::default(),
        }
    }
}

impl EvalConfig {
    fn echo(&self, regime: Regime) -> ConfigEcho {
        ConfigEcho {
            features: self.features.as_str().to_string(),
            regime: regime.as_str().to_string(),
            k: self.k,
            seed: self.seed,
            aggregation: self.aggregation.as_str().to_string(),
            l2_lambda: self.train.l2_lambda,
            max_iterations: self.train.max_iterations,
            convergence_tol: self.train.convergence_tol,
            class_weight: self.train.class_weight_mode.as_str().to_string(),
            optimizer: self.train.optimizer.as_str().to_string(),
            standardize: self.train.standardize,
        }
    }
}

/// Groups threads by course id, each course sorted by thread id.
fn courses(threads: &[PreparedThread]) -> BTreeMap<&str, Vec<&PreparedThread>> {
    let mut map: BTreeMap<&str, Vec<&PreparedThread>> = BTreeMap::new();
    for t in threads {
        map.entry(t.course_id.as_str()).or_default().push(t);
    }
    for ts in map.values_mut() {
        ts.sort_by(|a, b| a.thread_id.cmp(&b.thread_id));
    }
    map
}

struct Fitted {
    /// `(predicted intervened, probability)` per test thread.
    scores: Vec<(bool, f64)>,
    vocabulary: Option<Arc<Vocabulary>>,
    note: Option<String>,
}

/// Builds the feature space from `train` only, fits, and scores `test`.
fn fit_and_score(
    train: &[&PreparedThread],
    test: &[&PreparedThread],
    cfg: &EvalConfig,
) -> Result<Fitted, EvalError> {
    let n_pos = train.iter().filter(|t| t.label.is_positive()).count();
    if n_pos == 0 || n_pos == train.len() {
        // a single-class pool cannot be fit; predict that class
        let only = n_pos > 0 && !train.is_empty();
        let note = format!(
            "training pool has only {} threads; predicting {}",
            if only { "intervened" } else { "non-intervened" },
            if only { "intervened" } else { "non-intervened" },
        );
        log::warn!("{note}");
        let p = if only { 1.0 } else { 0.0 };
        return Ok(Fitted {
            scores: vec![(only, p); test.len()],
            vocabulary: None,
            note: Some(note),
        });
    }
    let vocabulary = if cfg.features.uses_lexical() {
        Some(Arc::new(build_vocabulary(train.iter().copied())?))
    } else {
        None
    };
    let featurizer = Featurizer::new(cfg.features, vocabulary.clone(), cfg.options)?;
    let mut examples = Vec::with_capacity(train.len());
    for t in train {
        examples.push((featurizer.featurize(t)?, t.label));
    }
    let data = Dataset::new(featurizer.space().clone(), &examples)?;
    let (m, report) = model::train(&data, &cfg.train)?;
    if !report.converged() {
        log::info!(
            "optimizer stopped ({:?}) after {} iterations, |g|inf = {:.3e}",
            report.stop,
            report.iterations,
            report.grad_inf_norm
        );
    }
    let mut scores = Vec::with_capacity(test.len());
    for t in test {
        let p = m.predict_proba(&featurizer.featurize(t)?);
        scores.push((p >= 0.5, p));
    }
    Ok(Fitted {
        scores,
        vocabulary,
        note: None,
    })
}

fn predictions(test: &[&PreparedThread], scores: &[(bool, f64)]) -> Vec<Prediction> {
    test.iter()
        .zip(scores)
        .map(|(t, &(pred, p))| Prediction {
            course_id: t.course_id.clone(),
            thread_id: t.thread_id.clone(),
            gold: t.label,
            predicted: if pred { Label::Intervened } else { Label::NotIntervened },
            probability: p,
        })
        .collect()
}

fn counts(test: &[&PreparedThread], scores: &[(bool, f64)]) -> ConfusionCounts {
    ConfusionCounts::from_pairs(test.iter().zip(scores).map(|(t, s)| (t.label.is_positive(), s.0)))
}

struct CourseResult {
    row: CourseRow,
    folds: Vec<FoldRow>,
    predictions: Vec<Prediction>,
    leakage: Option<LeakageRow>,
}

fn in_domain_course(
    course_id: &str,
    threads: &[&PreparedThread],
    cfg: &EvalConfig,
) -> Result<CourseResult, EvalError> {
    let keys: Vec<(&str, bool)> = threads
        .iter()
        .map(|t| (t.thread_id.as_str(), t.label.is_positive()))
        .collect();
    let folds = stratified_kfold(&keys, cfg.k, cfg.seed)?;
    let mut fold_rows = Vec::new();
    let mut preds = Vec::new();
    for (i, fold) in folds.folds.iter().enumerate() {
        if fold.is_empty() {
            continue;
        }
        let train: Vec<&PreparedThread> =
            folds.training_indices(i).into_iter().map(|j| threads[j]).collect();
        let test: Vec<&PreparedThread> = fold.iter().map(|&j| threads[j]).collect();
        let fitted = fit_and_score(&train, &test, cfg)?;
        let c = counts(&test, &fitted.scores);
        let mut note = fitted.note;
        if folds.degenerate && !test.iter().any(|t| t.label.is_positive()) {
            note.get_or_insert_with(|| "no intervened thread in this fold".to_string());
        }
        fold_rows.push(FoldRow {
            course_id: course_id.to_string(),
            fold: Some(i),
            n_train: train.len(),
            n_train_intervened: train.iter().filter(|t| t.label.is_positive()).count(),
            counts: c,
            metrics: prf1(&c),
            note,
        });
        preds.extend(predictions(&test, &fitted.scores));
    }
    let pooled: ConfusionCounts = fold_rows.iter().map(|f| f.counts).sum();
    let metrics = match cfg.aggregation {
        FoldAggregation::Pooled => prf1(&pooled),
        FoldAggregation::Mean => {
            let per_fold: Vec<Metrics> = fold_rows.iter().map(|f| f.metrics).collect();
            macro_average(&per_fold)?
        }
    };
    preds.sort_by(|a, b| a.thread_id.cmp(&b.thread_id));
    Ok(CourseResult {
        row: CourseRow {
            course_id: course_id.to_string(),
            n_threads: threads.len(),
            n_intervened: threads.iter().filter(|t| t.label.is_positive()).count(),
            counts: pooled,
            metrics,
        },
        folds: fold_rows,
        predictions: preds,
        leakage: None,
    })
}

fn finish(
    regime: Regime,
    cfg: &EvalConfig,
    results: Vec<CourseResult>,
) -> Result<EvalReport, EvalError> {
    let mut rows = Vec::new();
    let mut folds = Vec::new();
    let mut preds = Vec::new();
    let mut leakage = Vec::new();
    for r in results {
        rows.push(r.row);
        folds.extend(r.folds);
        preds.extend(r.predictions);
        leakage.extend(r.leakage);
    }
    let report = EvalReport::assemble(cfg.echo(regime), rows, folds, preds, leakage)?;
    report.verify_consistency()?;
    Ok(report)
}

/// Stratified k-fold cross-validation inside each course.
pub fn in_domain(threads: &[PreparedThread], cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    if threads.is_empty() {
        return Err(EvalError::NoThreads);
    }
    if cfg.k < 2 {
        return Err(EvalError::InvalidK(cfg.k));
    }
    let by_course = courses(threads);
    let results = by_course
        .par_iter()
        .map(|(c, ts)| in_domain_course(c, ts, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    finish(Regime::InDomain, cfg, results)
}

/// Leave-one-course-out: each course is scored by a model trained on all the others.
pub fn loo_ccv(threads: &[PreparedThread], cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    let by_course = courses(threads);
    if by_course.len() < 2 {
        return Err(EvalError::TooFewCourses(by_course.len()));
    }
    let ids: Vec<&str> = by_course.keys().copied().collect();
    let results = ids
        .par_iter()
        .map(|&held_out| {
            let test = &by_course[held_out];
            let train: Vec<&PreparedThread> = by_course
                .iter()
                .filter(|(c, _)| **c != held_out)
                .flat_map(|(_, ts)| ts.iter().copied())
                .collect();
            if !train.iter().any(|t| t.label.is_positive()) {
                return Err(EvalError::NoPositives(held_out.to_string()));
            }
            let fitted = fit_and_score(&train, test, cfg)?;
            let c = counts(test, &fitted.scores);
            let leakage = fitted
                .vocabulary
                .as_ref()
                .map(|v| leakage_row(held_out, test, &train, v));
            Ok(CourseResult {
                row: CourseRow {
                    course_id: held_out.to_string(),
                    n_threads: test.len(),
                    n_intervened: test.iter().filter(|t| t.label.is_positive()).count(),
                    counts: c,
                    metrics: prf1(&c),
                },
                folds: vec![FoldRow {
                    course_id: held_out.to_string(),
                    fold: None,
                    n_train: train.len(),
                    n_train_intervened: train.iter().filter(|t| t.label.is_positive()).count(),
                    counts: c,
                    metrics: prf1(&c),
                    note: fitted.note,
                }],
                predictions: predictions(test, &fitted.scores),
                leakage,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    finish(Regime::Ccv, cfg, results)
}

/// Tokens only the held-out course uses, intersected with the training vocabulary.
fn leakage_row(
    course_id: &str,
    test: &[&PreparedThread],
    train: &[&PreparedThread],
    vocabulary: &Vocabulary,
) -> LeakageRow {
    let held: BTreeSet<&str> = test.iter().flat_map(|t| thread_content_tokens(t)).collect();
    let seen: BTreeSet<&str> = train.iter().flat_map(|t| thread_content_tokens(t)).collect();
    let unique: BTreeSet<&str> = held.difference(&seen).copied().collect();
    let leaked = unique.iter().filter(|t| vocabulary.contains(t)).count();
    LeakageRow {
        course_id: course_id.to_string(),
        vocabulary_size: vocabulary.len(),
        held_out_unique_tokens: unique.len(),
        leaked,
    }
}

pub fn evaluate(
    threads: &[PreparedThread],
    regime: Regime,
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    match regime {
        Regime::InDomain => in_domain(threads, cfg),
        Regime::Ccv => loo_ccv(threads, cfg),
    }
}

/// Per-thread correctness of `report`, aligned with `other` by (course, thread).
fn paired_correctness(
    report: &EvalReport,
    other: &EvalReport,
    course: Option<&str>,
) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    let key = |p: &Prediction| (p.course_id.clone(), p.thread_id.clone());
    let theirs: BTreeMap<(String, String), bool> =
        other.predictions.iter().map(|p| (key(p), p.correct())).collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for p in &report.predictions {
        if course.is_some_and(|c| c != p.course_id) {
            continue;
        }
        let Some(&ok) = theirs.get(&key(p)) else {
            return Err(EvalError::UnpairedReports(format!(
                "{}/{} missing from baseline",
                p.course_id, p.thread_id
            )));
        };
        a.push(f64::from(u8::from(p.correct())));
        b.push(f64::from(u8::from(ok)));
    }
    if report.predictions.len() != other.predictions.len() {
        return Err(EvalError::UnpairedReports(format!(
            "{} vs {} predictions",
            report.predictions.len(),
            other.predictions.len()
        )));
    }
    Ok((a, b))
}

/// Adds per-course and overall approximate-randomization p-values against `baseline`.
pub fn annotate_significance(
    report: &mut EvalReport,
    baseline: &EvalReport,
    rounds: usize,
    seed: u64,
) -> Result<(), EvalError> {
    let name = format!("{} {}", baseline.config.features, baseline.config.regime);
    let mut notes = Vec::new();
    let course_ids: Vec<String> = report.courses.iter().map(|c| c.course_id.clone()).collect();
    for c in &course_ids {
        let (a, b) = paired_correctness(report, baseline, Some(c))?;
        notes.push(SignificanceNote {
            course_id: Some(c.clone()),
            baseline: name.clone(),
            rounds,
            p_value: approximate_randomization(&a, &b, rounds, seed)?,
        });
    }
    let (a, b) = paired_correctness(report, baseline, None)?;
    notes.push(SignificanceNote {
        course_id: None,
        baseline: name,
        rounds,
        p_value: approximate_randomization(&a, &b, rounds, seed)?,
    });
    report.significance = notes;
    Ok(())
}
