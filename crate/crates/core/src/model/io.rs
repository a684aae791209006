//! Plain-text model files.
//!
//! ```text
//! forum-sentinel-maxent 1
//! l2_lambda<TAB>1.0000000000000000e-4
//! max_iterations<TAB>500
//! convergence_tol<TAB>...
//! class_weight<TAB>neg_over_pos
//! seed<TAB>0
//! standardize<TAB>false
//! optimizer<TAB>lbfgs
//! space<TAB><tag><TAB><hash><TAB><dim>
//! bias<TAB><value>
//! w<TAB><name><TAB><value>        (dim lines, in space order)
//! end
//! ```
//!
//! Floats are written in `{:.16e}` form, which round-trips every `f64`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use super::{MaxentModel, ModelError, TrainConfig};
use crate::features::FeatureSpace;

const MAGIC: &str = "forum-sentinel-maxent 1";

pub fn write_model(model: &MaxentModel, mut out: impl Write) -> std::io::Result<()> {
    let c = model.config();
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "l2_lambda\t{:.16e}", c.l2_lambda)?;
    writeln!(out, "max_iterations\t{}", c.max_iterations)?;
    writeln!(out, "convergence_tol\t{:.16e}", c.convergence_tol)?;
    writeln!(out, "class_weight\t{}", c.class_weight_mode)?;
    writeln!(out, "seed\t{}", c.seed)?;
    writeln!(out, "standardize\t{}", c.standardize)?;
    writeln!(out, "optimizer\t{}", c.optimizer)?;
    let s = model.space();
    writeln!(out, "space\t{}\t{}\t{}", s.tag(), s.hash(), s.dim())?;
    writeln!(out, "bias\t{:.16e}", model.bias())?;
    for (name, w) in s.names().iter().zip(model.weights()) {
        writeln!(out, "w\t{name}\t{w:.16e}")?;
    }
    writeln!(out, "end")
}

pub fn save_model(model: &MaxentModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_model(model, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MaxentModel, ModelError> {
    read_model(File::open(path)?)
}

/// Line cursor that remembers where each line starts.
struct Lines<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str), ModelError> {
        if self.pos >= self.text.len() {
            return Err(ModelError::Truncated {
                offset: self.text.len(),
            });
        }
        let start = self.pos;
        let rest = &self.text[start..];
        let (line, advance) = match rest.find('\n') {
            Some(i) => (&rest[..i], i + 1),
            None => (rest, rest.len()),
        };
        self.pos += advance;
        Ok((start, line.strip_suffix('\r').unwrap_or(line)))
    }

    fn field(&mut self, key: &str) -> Result<(usize, &'a str), ModelError> {
        let (offset, line) = self.next()?;
        match line.split_once('\t') {
            Some((k, v)) if k == key => Ok((offset, v)),
            _ => Err(malformed(offset, format!("expected {key:?} line"))),
        }
    }

    fn parsed<T: FromStr>(&mut self, key: &str) -> Result<T, ModelError> {
        let (offset, v) = self.field(key)?;
        v.parse()
            .map_err(|_| malformed(offset, format!("bad value for {key}: {v:?}")))
    }
}

fn malformed(offset: usize, message: String) -> ModelError {
    ModelError::Malformed { offset, message }
}

fn parse_f64(offset: usize, v: &str) -> Result<f64, ModelError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(malformed(offset, format!("bad number {v:?}"))),
    }
}

pub fn read_model(mut input: impl Read) -> Result<MaxentModel, ModelError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let text = String::from_utf8(bytes).map_err(|e| {
        malformed(e.utf8_error().valid_up_to(), "invalid UTF-8".into())
    })?;
    let mut lines = Lines { text: &text, pos: 0 };

    let (offset, first) = lines.next()?;
    if first != MAGIC {
        return Err(malformed(offset, format!("expected {MAGIC:?}")));
    }
    let (o, v) = lines.field("l2_lambda")?;
    let l2_lambda = parse_f64(o, v)?;
    let max_iterations = lines.parsed("max_iterations")?;
    let (o, v) = lines.field("convergence_tol")?;
    let convergence_tol = parse_f64(o, v)?;
    let class_weight_mode = lines.parsed("class_weight")?;
    let seed = lines.parsed("seed")?;
    let standardize = lines.parsed("standardize")?;
    let optimizer = lines.parsed("optimizer")?;
    let config = TrainConfig {
        l2_lambda,
        max_iterations,
        convergence_tol,
        class_weight_mode,
        seed,
        standardize,
        optimizer,
    };

    let (space_offset, v) = lines.field("space")?;
    let parts: Vec<&str> = v.split('\t').collect();
    let [tag, hash, dim] = parts[..] else {
        return Err(malformed(space_offset, "expected tag, hash and dimension".into()));
    };
    let dim: usize = dim
        .parse()
        .map_err(|_| malformed(space_offset, format!("bad dimension {dim:?}")))?;
    let (o, v) = lines.field("bias")?;
    let bias = parse_f64(o, v)?;

    let mut names = Vec::with_capacity(dim);
    let mut weights = Vec::with_capacity(dim);
    for _ in 0..dim {
        let (o, v) = lines.field("w")?;
        let (name, w) = v
            .rsplit_once('\t')
            .ok_or_else(|| malformed(o, "expected name and weight".into()))?;
        names.push(name.to_string());
        weights.push(parse_f64(o, w)?);
    }
    let (o, last) = lines.next()?;
    if last != "end" {
        return Err(malformed(o, "expected end after the last weight".into()));
    }
    let space = FeatureSpace::new(tag, names)
        .map_err(|e| malformed(space_offset, e.to_string()))?;
    if space.hash() != hash {
        return Err(malformed(
            space_offset,
            format!("feature names hash to {}, header says {hash}", space.hash()),
        ));
    }
    Ok(MaxentModel::new(Arc::new(space), weights, bias, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClassWeightMode, OptimizerKind};

    fn model() -> MaxentModel {
        let space = Arc::new(
            FeatureSpace::new("t/1", vec!["a".into(), "unigram:x:y".into(), "b c".into()]).unwrap(),
        );
        let config = TrainConfig {
            l2_lambda: 0.1 + 0.2,
            seed: 17,
            standardize: true,
            class_weight_mode: ClassWeightMode::None,
            optimizer: OptimizerKind::GradientDescent,
            ..Default::default()
        };
        MaxentModel::new(space, vec![1.0 / 3.0, -2.5e-300, 7.0], -0.1, config)
    }

    fn bytes(m: &MaxentModel) -> Vec<u8> {
        let mut buf = Vec::new();
        write_model(m, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let back = read_model(bytes(&m).as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(bytes(&back), bytes(&m));
    }

    #[test]
    fn truncation_reports_file_length() {
        let full = bytes(&model());
        let cut = &full[..full.len() - 4];
        match read_model(cut) {
            Err(ModelError::Truncated { offset }) => assert_eq!(offset, cut.len()),
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn malformed_reports_line_offset() {
        let text = String::from_utf8(bytes(&model())).unwrap();
        let bad = text.replace("seed\t17", "seed\tseventeen");
        let offset = bad.find("seed\t").unwrap();
        match read_model(bad.as_bytes()) {
            Err(ModelError::Malformed { offset: o, .. }) => assert_eq!(o, offset),
            other => panic!("expected malformed, got {other:?}"),
        }
    }

    #[test]
    fn tampered_names_fail_hash_check() {
        let text = String::from_utf8(bytes(&model())).unwrap();
        let bad = text.replace("w\ta\t", "w\tz\t");
        assert!(matches!(
            read_model(bad.as_bytes()),
            Err(ModelError::Malformed { .. })
        ));
    }
}
