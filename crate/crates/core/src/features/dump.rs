//! Feature dump files written by `featurize` and read by `train`.
//!
//! ```text
//! #forum-sentinel-features v1
//! #space <tag> <hash>
//! #dim <name>                      (one line per dimension, in order)
//! <course_id>\t<thread_id>\t<label>\t<name>:<value>\t...
//! ```

use std::io::{BufRead, Write};
use std::sync::Arc;

use super::{FeatureError, FeatureSpace, FeatureVector};
use crate::corpus::Label;

const MAGIC: &str = "#forum-sentinel-features v1";

#[derive(Debug, Clone, PartialEq)]
pub struct DumpRecord {
    pub course_id: String,
    pub thread_id: String,
    pub label: Label,
    pub vector: FeatureVector,
}

#[derive(Debug, Clone)]
pub struct FeatureDump {
    pub space: Arc<FeatureSpace>,
    pub records: Vec<DumpRecord>,
}

pub fn write_feature_dump(
    space: &FeatureSpace,
    records: &[DumpRecord],
    mut out: impl Write,
) -> std::io::Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "#space\t{}\t{}", space.tag(), space.hash())?;
    for n in space.names() {
        writeln!(out, "#dim\t{n}")?;
    }
    for r in records {
        write!(out, "{}\t{}\t{}", r.course_id, r.thread_id, r.label)?;
        for (name, value) in r.vector.iter_named() {
            write!(out, "\t{name}:{value}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_feature_dump(input: impl BufRead) -> Result<FeatureDump, FeatureError> {
    let mut lines = input.lines().enumerate();
    let bad = |line: usize, message: String| FeatureError::MalformedDump { line, message };
    match lines.next() {
        Some((_, Ok(l))) if l == MAGIC => {}
        Some((_, Err(e))) => return Err(e.into()),
        _ => return Err(bad(1, "missing header".into())),
    }
    let mut tag = None;
    let mut names = Vec::new();
    let mut space: Option<Arc<FeatureSpace>> = None;
    let mut expected_hash = String::new();
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if let Some(rest) = line.strip_prefix("#space\t") {
            let (t, h) = rest
                .split_once('\t')
                .ok_or_else(|| bad(line_no, "expected #space<TAB>tag<TAB>hash".into()))?;
            tag = Some(t.to_string());
            expected_hash = h.to_string();
            continue;
        }
        if let Some(name) = line.strip_prefix("#dim\t") {
            if space.is_some() {
                return Err(bad(line_no, "#dim after the first record".into()));
            }
            names.push(name.to_string());
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let space = match &space {
            Some(s) => s.clone(),
            None => {
                let t = tag
                    .clone()
                    .ok_or_else(|| bad(line_no, "record before #space header".into()))?;
                let s = Arc::new(FeatureSpace::new(t, std::mem::take(&mut names))?);
                if s.hash() != expected_hash {
                    return Err(bad(
                        line_no,
                        format!("space hash {} does not match header {expected_hash}", s.hash()),
                    ));
                }
                space = Some(s.clone());
                s
            }
        };
        let mut fields = line.split('\t');
        let (Some(course_id), Some(thread_id), Some(label)) =
            (fields.next(), fields.next(), fields.next())
        else {
            return Err(bad(line_no, "expected course, thread and label".into()));
        };
        let label: Label = label.parse().map_err(|e| bad(line_no, format!("{e}")))?;
        let mut entries = Vec::new();
        for f in fields {
            let (name, value) = f
                .rsplit_once(':')
                .ok_or_else(|| bad(line_no, format!("expected name:value, got {f:?}")))?;
            let value: f64 = value
                .parse()
                .map_err(|_| bad(line_no, format!("bad value in {f:?}")))?;
            let i = space
                .index_of(name)
                .ok_or_else(|| FeatureError::UnknownFeature(name.to_string()))?;
            entries.push((i, value));
        }
        records.push(DumpRecord {
            course_id: course_id.to_string(),
            thread_id: thread_id.to_string(),
            label,
            vector: FeatureVector::from_indexed(space, entries)?,
        });
    }
    let space = match space {
        Some(s) => s,
        None => Arc::new(FeatureSpace::new(
            tag.ok_or_else(|| bad(2, "missing #space header".into()))?,
            names,
        )?),
    };
    Ok(FeatureDump { space, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip() {
        let space = Arc::new(
            FeatureSpace::new(
                "edm15/x",
                vec!["edm15:n_posts".into(), "unigram::".into(), "unigram:chord".into()],
            )
            .unwrap(),
        );
        let v = FeatureVector::from_named(
            space.clone(),
            [("edm15:n_posts", 2.0), ("unigram::", 1.0), ("unigram:chord", 0.1 + 0.2)],
        )
        .unwrap();
        let rec = DumpRecord {
            course_id: "C".into(),
            thread_id: "t1".into(),
            label: Label::Intervened,
            vector: v,
        };
        let mut buf = Vec::new();
        write_feature_dump(&space, std::slice::from_ref(&rec), &mut buf).unwrap();
        let dump = read_feature_dump(buf.as_slice()).unwrap();
        assert_eq!(dump.space.names(), space.names());
        assert_eq!(dump.records[0].vector.entries(), rec.vector.entries());
        assert_eq!(dump.records[0].label, Label::Intervened);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_feature_dump("nope\n".as_bytes()).is_err());
        let text = format!("{MAGIC}\n#space\tt\tdeadbeef\n#dim\ta\nC\tt\tintervened\ta:1\n");
        assert!(read_feature_dump(text.as_bytes()).is_err());
    }
}
