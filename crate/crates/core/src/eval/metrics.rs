use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, gold: bool, predicted: bool) {
        match (gold, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = Self::default();
        for (g, p) in pairs {
            c.record(g, p);
        }
        c
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// Positive-class precision, recall and F1 in percent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    /// F1 is the harmonic mean of `precision` and `recall`, 0 when both are 0.
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

pub fn prf1(c: &ConfusionCounts) -> Metrics {
    Metrics::from_pr(percent(c.tp, c.tp + c.fp), percent(c.tp, c.tp + c.fn_))
}

/// Unweighted mean of P and R; F1 is recomputed from the means.
pub fn macro_average(rows: &[Metrics]) -> Result<Metrics, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::NothingToAverage);
    }
    let n = rows.len() as f64;
    let p = rows.iter().map(|m| m.precision).sum::<f64>() / n;
    let r = rows.iter().map(|m| m.recall).sum::<f64>() / n;
    Ok(Metrics::from_pr(p, r))
}

/// Weighted mean of P and R; F1 is recomputed from the means.
pub fn weighted_macro_average(rows: &[Metrics], weights: &[f64]) -> Result<Metrics, EvalError> {
    if rows.len() != weights.len() {
        return Err(EvalError::LengthMismatch {
            left: rows.len(),
            right: weights.len(),
        });
    }
    if rows.is_empty() {
        return Err(EvalError::NothingToAverage);
    }
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(EvalError::ZeroWeight);
    }
    let p = rows.iter().zip(weights).map(|(m, w)| m.precision * w).sum::<f64>() / total;
    let r = rows.iter().zip(weights).map(|(m, w)| m.recall * w).sum::<f64>() / total;
    Ok(Metrics::from_pr(p, r))
}
