//! Run configuration: a TOML file merged under command-line flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use forum_sentinel::eval::{EmitFormat, EvalConfig, FoldAggregation, Regime};
use forum_sentinel::features::{FeatureConfig, FeatureOptions};
use forum_sentinel::model::{ClassWeightMode, OptimizerKind, TrainConfig};

use crate::{Failure, Flags};

/// Keys accepted in a `--config` file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    corpus: Option<PathBuf>,
    lexicon: Option<PathBuf>,
    tags: Option<PathBuf>,
    features: Option<String>,
    regime: Option<String>,
    k: Option<usize>,
    seed: Option<u64>,
    l2: Option<f64>,
    max_iterations: Option<usize>,
    convergence_tol: Option<f64>,
    class_weight: Option<String>,
    optimizer: Option<String>,
    standardize: Option<bool>,
    aggregation: Option<String>,
    jobs: Option<usize>,
    emit: Option<String>,
    out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub tags: Option<PathBuf>,
    pub features: FeatureConfig,
    pub regime: Regime,
    pub k: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub aggregation: FoldAggregation,
    pub jobs: Option<usize>,
    pub emit: EmitFormat,
    pub out: Option<PathBuf>,
}

fn parse<T: FromStr<Err = String>>(key: &str, value: Option<&str>) -> Result<Option<T>, Failure> {
    value
        .map(|v| v.parse::<T>().map_err(|e| Failure::input(anyhow::anyhow!("{key}: {e}"))))
        .transpose()
}

fn existing(path: Option<PathBuf>, what: &str) -> Result<Option<PathBuf>, Failure> {
    match path {
        Some(p) if !p.exists() => Err(Failure::io(anyhow::anyhow!(
            "{what} {} does not exist",
            p.display()
        ))),
        other => Ok(other),
    }
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self, Failure> {
        let file = match &flags.config {
            Some(p) => load_file(p)?,
            None => FileConfig::default(),
        };
        let pick = |flag: &Option<String>, file: &Option<String>| flag.clone().or(file.clone());
        let defaults = TrainConfig::default();
        let train = TrainConfig {
            l2_lambda: flags.l2.or(file.l2).unwrap_or(defaults.l2_lambda),
            max_iterations: flags
                .max_iterations
                .or(file.max_iterations)
                .unwrap_or(defaults.max_iterations),
            convergence_tol: flags
                .convergence_tol
                .or(file.convergence_tol)
                .unwrap_or(defaults.convergence_tol),
            class_weight_mode: parse::<ClassWeightMode>(
                "class_weight",
                pick(&flags.class_weight, &file.class_weight).as_deref(),
            )?
            .unwrap_or(defaults.class_weight_mode),
            seed: flags.seed.or(file.seed).unwrap_or(defaults.seed),
            standardize: flags.standardize || file.standardize.unwrap_or(false),
            optimizer: parse::<OptimizerKind>(
                "optimizer",
                pick(&flags.optimizer, &file.optimizer).as_deref(),
            )?
            .unwrap_or(defaults.optimizer),
        };
        train.validate().map_err(|e| Failure::input(e.into()))?;
        let k = flags.k.or(file.k).unwrap_or(5);
        if k < 2 {
            return Err(Failure::input(anyhow::anyhow!("k must be at least 2, got {k}")));
        }
        if flags.jobs.or(file.jobs) == Some(0) {
            return Err(Failure::input(anyhow::anyhow!("jobs must be positive")));
        }
        Ok(Self {
            corpus: existing(flags.corpus.clone().or(file.corpus), "corpus")?,
            lexicon: existing(flags.lexicon.clone().or(file.lexicon), "lexicon")?,
            tags: existing(flags.tags.clone().or(file.tags), "tag file")?,
            features: parse("features", pick(&flags.features, &file.features).as_deref())?
                .unwrap_or(FeatureConfig::Pdtb),
            regime: parse("regime", pick(&flags.regime, &file.regime).as_deref())?
                .unwrap_or(Regime::InDomain),
            k,
            seed: train.seed,
            train,
            aggregation: parse("aggregation", pick(&flags.aggregation, &file.aggregation).as_deref())?
                .unwrap_or_default(),
            jobs: flags.jobs.or(file.jobs),
            emit: parse("emit", pick(&flags.emit, &file.emit).as_deref())?
                .unwrap_or(EmitFormat::Table),
            out: flags.out.clone().or(file.out),
        })
    }

    pub fn corpus(&self) -> Result<&Path, Failure> {
        self.corpus
            .as_deref()
            .ok_or_else(|| Failure::usage(anyhow::anyhow!("--corpus is required")))
    }

    pub fn eval_config(&self, features: FeatureConfig) -> EvalConfig {
        EvalConfig {
            features,
            k: self.k,
            seed: self.seed,
            train: self.train,
            aggregation: self.aggregation,
            options: FeatureOptions::default(),
        }
    }
}

fn load_file(path: &Path) -> Result<FileConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::io(anyhow::anyhow!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| Failure::input(anyhow::anyhow!("config {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_keys_parse() {
        let f: FileConfig = toml::from_str("features = \"eplusp\"\nk = 3\nl2 = 0.5\n").unwrap();
        assert_eq!(f.features.as_deref(), Some("eplusp"));
        assert_eq!(f.k, Some(3));
        assert!(toml::from_str::<FileConfig>("bogus = 1").is_err());
    }

    #[test]
    fn enum_errors_are_bad_input() {
        let err = parse::<Regime>("regime", Some("sideways")).unwrap_err();
        assert_eq!(err.code, crate::EXIT_BAD_INPUT);
    }
}
