//! Class-weighted binary maximum-entropy (logistic) classifier.

mod io;
mod objective;
mod optim;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use io::{load_model, read_model, save_model, write_model};
pub use objective::{loss_and_gradient, Objective};
pub use optim::{minimize, OptimizerKind, StopReason, TrainReport};

use crate::corpus::Label;
use crate::features::{FeatureSpace, FeatureVector};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("no positive examples: class weight is undefined")]
    NoPositives,
    #[error("training data has a single class ({0})")]
    SingleClass(Label),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("non-finite feature value in example {0}")]
    NonFinite(usize),
    #[error("example {0} is not in the dataset's feature space")]
    SpaceMismatch(usize),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("model file byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("model file truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassWeightMode {
    None,
    #[default]
    NegOverPos,
}

impl ClassWeightMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassWeightMode::None => "none",
            ClassWeightMode::NegOverPos => "neg_over_pos",
        }
    }
}

impl FromStr for ClassWeightMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "neg_over_pos" => Ok(Self::NegOverPos),
            other => Err(format!("unknown class weight mode {other:?}")),
        }
    }
}

impl fmt::Display for ClassWeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub l2_lambda: f64,
    pub max_iterations: usize,
    /// Stop once the gradient infinity-norm is at or below this.
    pub convergence_tol: f64,
    pub class_weight_mode: ClassWeightMode,
    /// Echoed into the model file. The optimizers are deterministic and do not draw from it.
    pub seed: u64,
    /// Rescale each feature to unit root-mean-square before optimizing.
    pub standardize: bool,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2_lambda: 1e-4,
            max_iterations: 500,
            convergence_tol: 1e-6,
            class_weight_mode: ClassWeightMode::NegOverPos,
            seed: 0,
            standardize: false,
            optimizer: OptimizerKind::Lbfgs,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(ModelError::InvalidConfig(format!(
                "l2_lambda must be a nonnegative number, got {}",
                self.l2_lambda
            )));
        }
        if self.max_iterations == 0 {
            return Err(ModelError::InvalidConfig("max_iterations must be positive".into()));
        }
        if !(self.convergence_tol > 0.0 && self.convergence_tol.is_finite()) {
            return Err(ModelError::InvalidConfig(format!(
                "convergence_tol must be positive, got {}",
                self.convergence_tol
            )));
        }
        Ok(())
    }
}

/// Ratio of negative to positive training examples, applied to positive loss terms.
pub fn class_weight(n_pos: usize, n_neg: usize) -> Result<f64, ModelError> {
    if n_pos == 0 {
        return Err(ModelError::NoPositives);
    }
    Ok(n_neg as f64 / n_pos as f64)
}

/// Labeled sparse rows sharing one feature space.
#[derive(Debug, Clone)]
pub struct Dataset {
    space: Arc<FeatureSpace>,
    rows: Vec<Vec<(usize, f64)>>,
    labels: Vec<bool>,
}

impl Dataset {
    pub fn new(
        space: Arc<FeatureSpace>,
        examples: &[(FeatureVector, Label)],
    ) -> Result<Self, ModelError> {
        let mut rows = Vec::with_capacity(examples.len());
        let mut labels = Vec::with_capacity(examples.len());
        for (i, (v, label)) in examples.iter().enumerate() {
            if !Arc::ptr_eq(v.space(), &space) && v.space().hash() != space.hash() {
                return Err(ModelError::SpaceMismatch(i));
            }
            if v.entries().iter().any(|(_, x)| !x.is_finite()) {
                return Err(ModelError::NonFinite(i));
            }
            rows.push(v.entries().to_vec());
            labels.push(label.is_positive());
        }
        Ok(Self {
            space,
            rows,
            labels,
        })
    }

    /// Builds from raw rows; mostly for tests and synthetic data.
    pub fn from_rows(
        space: Arc<FeatureSpace>,
        rows: Vec<Vec<(usize, f64)>>,
        labels: Vec<bool>,
    ) -> Result<Self, ModelError> {
        assert_eq!(rows.len(), labels.len());
        for (i, r) in rows.iter().enumerate() {
            if r.iter().any(|(j, x)| !x.is_finite() || *j >= space.dim()) {
                return Err(ModelError::NonFinite(i));
            }
        }
        Ok(Self {
            space,
            rows,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn space(&self) -> &Arc<FeatureSpace> {
        &self.space
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn n_pos(&self) -> usize {
        self.labels.iter().filter(|y| **y).count()
    }

    pub fn n_neg(&self) -> usize {
        self.len() - self.n_pos()
    }

    /// Per-feature root-mean-square; 1 for features that never fire.
    fn feature_scales(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.dim()];
        for r in &self.rows {
            for &(j, x) in r {
                sq[j] += x * x;
            }
        }
        let n = self.len().max(1) as f64;
        sq.into_iter()
            .map(|s| if s > 0.0 { (s / n).sqrt() } else { 1.0 })
            .collect()
    }

    fn scaled(&self, scales: &[f64]) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|r| r.iter().map(|&(j, x)| (j, x / scales[j])).collect())
            .collect();
        Self {
            space: self.space.clone(),
            rows,
            labels: self.labels.clone(),
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxentModel {
    space: Arc<FeatureSpace>,
    /// Aligned with `space.names()`.
    weights: Vec<f64>,
    bias: f64,
    config: TrainConfig,
}

impl MaxentModel {
    pub fn new(
        space: Arc<FeatureSpace>,
        weights: Vec<f64>,
        bias: f64,
        config: TrainConfig,
    ) -> Self {
        assert_eq!(weights.len(), space.dim());
        Self {
            space,
            weights,
            bias,
            config,
        }
    }

    pub fn zero(space: Arc<FeatureSpace>) -> Self {
        let d = space.dim();
        Self::new(space, vec![0.0; d], 0.0, TrainConfig::default())
    }

    pub fn space(&self) -> &Arc<FeatureSpace> {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, name: &str) -> Option<f64> {
        self.space.index_of(name).map(|i| self.weights[i])
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn score_row(&self, row: &[(usize, f64)]) -> f64 {
        self.bias + row.iter().map(|&(j, x)| self.weights[j] * x).sum::<f64>()
    }

    /// Linear score; vectors from another space are matched by feature name.
    pub fn score(&self, vector: &FeatureVector) -> f64 {
        if Arc::ptr_eq(vector.space(), &self.space) || vector.space().hash() == self.space.hash() {
            self.score_row(vector.entries())
        } else {
            self.bias
                + vector
                    .iter_named()
                    .filter_map(|(n, x)| self.space.index_of(n).map(|j| self.weights[j] * x))
                    .sum::<f64>()
        }
    }

    pub fn predict_proba(&self, vector: &FeatureVector) -> f64 {
        sigmoid(self.score(vector))
    }

    /// Intervened iff the probability is at least one half.
    pub fn predict(&self, vector: &FeatureVector) -> Label {
        if self.predict_proba(vector) >= 0.5 {
            Label::Intervened
        } else {
            Label::NotIntervened
        }
    }

    pub fn predict_row(&self, row: &[(usize, f64)]) -> bool {
        sigmoid(self.score_row(row)) >= 0.5
    }
}

/// Fits a model; fails unless both classes are present.
pub fn train(data: &Dataset, config: &TrainConfig) -> Result<(MaxentModel, TrainReport), ModelError> {
    config.validate()?;
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let (n_pos, n_neg) = (data.n_pos(), data.n_neg());
    if n_pos == 0 {
        return Err(ModelError::SingleClass(Label::NotIntervened));
    }
    if n_neg == 0 {
        return Err(ModelError::SingleClass(Label::Intervened));
    }
    let pos_weight = match config.class_weight_mode {
        ClassWeightMode::None => 1.0,
        ClassWeightMode::NegOverPos => class_weight(n_pos, n_neg)?,
    };
    let scales = config.standardize.then(|| data.feature_scales());
    let scaled;
    let fit_data = match &scales {
        Some(s) => {
            scaled = data.scaled(s);
            &scaled
        }
        None => data,
    };
    let objective = Objective::new(fit_data, pos_weight, config.l2_lambda);
    let init = vec![0.0; data.dim() + 1];
    let (theta, report) = minimize(&objective, init, config);
    let d = data.dim();
    let mut weights = theta[..d].to_vec();
    if let Some(s) = &scales {
        for (w, s) in weights.iter_mut().zip(s) {
            *w /= s;
        }
    }
    log::debug!(
        "trained {} weights: {:?} after {} iterations (|g|inf = {:.3e})",
        d,
        report.stop,
        report.iterations,
        report.grad_inf_norm
    );
    Ok((
        MaxentModel::new(data.space.clone(), weights, theta[d], *config),
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(d: usize) -> Arc<FeatureSpace> {
        Arc::new(FeatureSpace::new("t", (0..d).map(|i| format!("f{i}")).collect()).unwrap())
    }

    #[test]
    fn class_weight_values() {
        assert_eq!(class_weight(40, 265).unwrap(), 6.625);
        assert!((class_weight(81, 2332).unwrap() - 28.79).abs() <= 0.005);
        assert_eq!(class_weight(5, 0).unwrap(), 0.0);
        assert!(matches!(class_weight(0, 3), Err(ModelError::NoPositives)));
    }

    #[test]
    fn zero_model_is_uncertain() {
        let s = space(3);
        let m = MaxentModel::zero(s.clone());
        let v = FeatureVector::from_indexed(s, vec![(0, 1.0), (2, -4.0)]).unwrap();
        assert_eq!(m.predict_proba(&v), 0.5);
        assert_eq!(m.predict(&v), Label::Intervened);
    }

    #[test]
    fn negated_model_flips_probability() {
        let s = space(2);
        let m = MaxentModel::new(s.clone(), vec![0.7, -1.2], 0.3, TrainConfig::default());
        let neg = MaxentModel::new(s.clone(), vec![-0.7, 1.2], -0.3, TrainConfig::default());
        let v = FeatureVector::from_indexed(s, vec![(0, 2.0), (1, 0.5)]).unwrap();
        assert!((m.predict_proba(&v) + neg.predict_proba(&v) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn separable_points_are_fit() {
        let s = space(2);
        let rows = vec![
            vec![(0, 1.0), (1, 1.0)],
            vec![(0, 2.0), (1, 1.5)],
            vec![(0, -1.0), (1, -1.0)],
            vec![(0, -2.0), (1, -0.5)],
        ];
        let labels = vec![true, true, false, false];
        let data = Dataset::from_rows(s, rows.clone(), labels.clone()).unwrap();
        let (model, _) = train(&data, &TrainConfig::default()).unwrap();
        for (r, y) in rows.iter().zip(labels) {
            assert_eq!(model.predict_row(r), y);
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let s = space(1);
        let data = Dataset::from_rows(s, vec![vec![(0, 1.0)]], vec![true]).unwrap();
        assert!(matches!(
            train(&data, &TrainConfig::default()),
            Err(ModelError::SingleClass(_))
        ));
    }

    #[test]
    fn invalid_config() {
        let c = TrainConfig {
            l2_lambda: -1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            max_iterations: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn standardized_training_predicts_in_original_units() {
        let s = space(2);
        let rows = vec![
            vec![(0, 100.0), (1, 0.01)],
            vec![(0, 200.0), (1, 0.02)],
            vec![(0, -100.0), (1, -0.01)],
            vec![(0, -300.0), (1, -0.02)],
        ];
        let labels = vec![true, true, false, false];
        let data = Dataset::from_rows(s, rows.clone(), labels.clone()).unwrap();
        let cfg = TrainConfig {
            standardize: true,
            ..Default::default()
        };
        let (model, _) = train(&data, &cfg).unwrap();
        for (r, y) in rows.iter().zip(labels) {
            assert_eq!(model.predict_row(r), y);
        }
    }
}
