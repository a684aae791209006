use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{macro_average, prf1, weighted_macro_average, ConfusionCounts, Metrics};
use super::significance::significance_marker;
use super::EvalError;
use crate::corpus::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub features: String,
    pub regime: String,
    pub k: usize,
    pub seed: u64,
    pub aggregation: String,
    pub l2_lambda: f64,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub class_weight: String,
    pub optimizer: String,
    pub standardize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseRow {
    pub course_id: String,
    pub n_threads: usize,
    pub n_intervened: usize,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRow {
    pub course_id: String,
    /// Fold number for in-domain runs; absent for held-out courses.
    pub fold: Option<usize>,
    pub n_train: usize,
    pub n_train_intervened: usize,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub course_id: String,
    pub thread_id: String,
    pub gold: Label,
    pub predicted: Label,
    pub probability: f64,
}

impl Prediction {
    pub fn correct(&self) -> bool {
        self.gold == self.predicted
    }
}

/// Count of vocabulary entries that occur only in the held-out course.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageRow {
    pub course_id: String,
    pub vocabulary_size: usize,
    pub held_out_unique_tokens: usize,
    pub leaked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceNote {
    /// `None` for the test over all courses together.
    pub course_id: Option<String>,
    pub baseline: String,
    pub rounds: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ConfigEcho,
    pub courses: Vec<CourseRow>,
    pub macro_avg: Metrics,
    pub weighted_macro_avg: Metrics,
    pub folds: Vec<FoldRow>,
    pub predictions: Vec<Prediction>,
    pub leakage: Vec<LeakageRow>,
    pub significance: Vec<SignificanceNote>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Table,
    Csv,
    Records,
}

impl std::str::FromStr for EmitFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Self::Table),
            "csv" => Ok(Self::Csv),
            "records" | "json" => Ok(Self::Records),
            other => Err(format!("unknown emit format {other:?}")),
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn metrics_close(a: &Metrics, b: &Metrics) -> bool {
    close(a.precision, b.precision) && close(a.recall, b.recall) && close(a.f1, b.f1)
}

impl EvalReport {
    /// Builds the aggregate rows from `courses`.
    pub(crate) fn assemble(
        config: ConfigEcho,
        courses: Vec<CourseRow>,
        folds: Vec<FoldRow>,
        predictions: Vec<Prediction>,
        leakage: Vec<LeakageRow>,
    ) -> Result<Self, EvalError> {
        let (macro_avg, weighted_macro_avg) = aggregate(&courses)?;
        Ok(Self {
            config,
            courses,
            macro_avg,
            weighted_macro_avg,
            folds,
            predictions,
            leakage,
            significance: Vec::new(),
        })
    }

    pub fn course(&self, course_id: &str) -> Option<&CourseRow> {
        self.courses.iter().find(|c| c.course_id == course_id)
    }

    /// Recomputes the aggregate rows (and pooled per-course rows) from stored data.
    pub fn verify_consistency(&self) -> Result<(), EvalError> {
        let (m, w) = aggregate(&self.courses)?;
        if !metrics_close(&m, &self.macro_avg) {
            return Err(EvalError::Inconsistent(format!(
                "macro row {:?} recomputes to {m:?}",
                self.macro_avg
            )));
        }
        if !metrics_close(&w, &self.weighted_macro_avg) {
            return Err(EvalError::Inconsistent(format!(
                "weighted macro row {:?} recomputes to {w:?}",
                self.weighted_macro_avg
            )));
        }
        for c in &self.courses {
            let f = c.metrics.f1;
            if !close(f, Metrics::from_pr(c.metrics.precision, c.metrics.recall).f1) {
                return Err(EvalError::Inconsistent(format!("{}: F1 {f}", c.course_id)));
            }
            if c.counts.total() != c.n_threads {
                return Err(EvalError::Inconsistent(format!(
                    "{}: {} threads but {} scored",
                    c.course_id,
                    c.n_threads,
                    c.counts.total()
                )));
            }
            if self.config.aggregation == "pooled" && !metrics_close(&prf1(&c.counts), &c.metrics)
            {
                return Err(EvalError::Inconsistent(format!(
                    "{}: metrics do not match pooled counts",
                    c.course_id
                )));
            }
        }
        Ok(())
    }

    fn marker(&self, course: Option<&str>) -> &'static str {
        self.significance
            .iter()
            .find(|s| s.course_id.as_deref() == course)
            .map_or("", |s| significance_marker(s.p_value))
    }

    pub fn render_table(&self) -> String {
        let width = self
            .courses
            .iter()
            .map(|c| c.course_id.len())
            .chain(["Weighted macro avg.".len()])
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# {} {} features, k={}, seed={}, {} folds",
            self.config.regime, self.config.features, self.config.k, self.config.seed, self.config.aggregation
        );
        let _ = writeln!(out, "{:<width$}  {:>6}  {:>6}  {:>6}", "Course", "P", "R", "F1");
        let mut row = |name: &str, m: &Metrics, mark: &str| {
            let line = format!(
                "{name:<width$}  {:>6.1}  {:>6.1}  {:>6.1}{mark}",
                m.precision, m.recall, m.f1
            );
            let _ = writeln!(out, "{}", line.trim_end());
        };
        for c in &self.courses {
            row(&c.course_id, &c.metrics, self.marker(Some(&c.course_id)));
        }
        row("Macro avg.", &self.macro_avg, self.marker(None));
        row("Weighted macro avg.", &self.weighted_macro_avg, "");
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from("course,n_threads,n_intervened,tp,fp,fn,tn,precision,recall,f1\n");
        for c in &self.courses {
            let k = &c.counts;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                c.course_id,
                c.n_threads,
                c.n_intervened,
                k.tp,
                k.fp,
                k.fn_,
                k.tn,
                c.metrics.precision,
                c.metrics.recall,
                c.metrics.f1
            );
        }
        for (name, m) in [("macro", &self.macro_avg), ("weighted_macro", &self.weighted_macro_avg)] {
            let _ = writeln!(out, "{name},,,,,,,{},{},{}", m.precision, m.recall, m.f1);
        }
        out
    }

    pub fn render_records(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render(&self, format: EmitFormat) -> String {
        match format {
            EmitFormat::Table => self.render_table(),
            EmitFormat::Csv => self.render_csv(),
            EmitFormat::Records => self.render_records(),
        }
    }

    pub fn from_records(text: &str) -> Result<Self, EvalError> {
        serde_json::from_str(text).map_err(|e| EvalError::Inconsistent(format!("bad report: {e}")))
    }
}

fn aggregate(courses: &[CourseRow]) -> Result<(Metrics, Metrics), EvalError> {
    let rows: Vec<Metrics> = courses.iter().map(|c| c.metrics).collect();
    let weights: Vec<f64> = courses.iter().map(|c| c.n_threads as f64).collect();
    Ok((macro_average(&rows)?, weighted_macro_average(&rows, &weights)?))
}
