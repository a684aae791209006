//! Externally produced connective tags.
//!
//! One record per line, tab-separated:
//! `course_id  thread_id  post_id  [start:end:Sense ...]`
//! where `start..end` is a half-open token range in the post's token stream.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use super::{DiscourseError, PostDiscourse, SenseTag, TaggedConnective};
use crate::textprep::TokenizedPost;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagRecord {
    pub course_id: String,
    pub thread_id: String,
    pub post_id: String,
    pub spans: Vec<(usize, usize, SenseTag)>,
}

type PostKey = (String, String, String);

#[derive(Debug, Clone, Default)]
pub struct ImportedTags {
    posts: HashMap<PostKey, Vec<(usize, usize, SenseTag)>>,
}

impl ImportedTags {
    pub fn parse(src: &str) -> Result<Self, DiscourseError> {
        let mut posts = HashMap::new();
        for (idx, raw) in src.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let bad = |message: String| DiscourseError::MalformedTags { line, message };
            let fields: Vec<&str> = raw.split('\t').collect();
            if fields.len() < 3 {
                return Err(bad("expected course_id, thread_id and post_id".into()));
            }
            let mut spans = Vec::with_capacity(fields.len() - 3);
            for f in &fields[3..] {
                let parts: Vec<&str> = f.split(':').collect();
                let [s, e, sense] = parts[..] else {
                    return Err(bad(format!("expected start:end:sense, got {f:?}")));
                };
                let start: usize = s.parse().map_err(|_| bad(format!("bad start {s:?}")))?;
                let end: usize = e.parse().map_err(|_| bad(format!("bad end {e:?}")))?;
                let sense: SenseTag = sense.parse().map_err(bad)?;
                if start >= end {
                    return Err(bad(format!("empty span {start}..{end}")));
                }
                if let Some(&(_, prev_end, _)) = spans.last() {
                    if start < prev_end {
                        return Err(bad(format!("span {start}..{end} overlaps or is out of order")));
                    }
                }
                spans.push((start, end, sense));
            }
            let key = (
                fields[0].to_string(),
                fields[1].to_string(),
                fields[2].to_string(),
            );
            if posts.insert(key, spans).is_some() {
                return Err(bad(format!("duplicate record for post {:?}", fields[2])));
            }
        }
        Ok(Self { posts })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DiscourseError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|source| DiscourseError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&src)
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    /// Imported tags for one post, verbatim. Posts without a record have no tags.
    pub fn post_tags(
        &self,
        course_id: &str,
        thread_id: &str,
        post_id: &str,
        tokens: &TokenizedPost,
    ) -> Result<PostDiscourse, DiscourseError> {
        let key = (
            course_id.to_string(),
            thread_id.to_string(),
            post_id.to_string(),
        );
        let Some(spans) = self.posts.get(&key) else {
            return Ok(PostDiscourse::default());
        };
        let connectives = spans
            .iter()
            .map(|&(start, end, sense)| {
                if end > tokens.len() {
                    return Err(DiscourseError::SpanOutOfRange {
                        post_id: post_id.to_string(),
                        start,
                        end,
                        len: tokens.len(),
                    });
                }
                Ok(TaggedConnective {
                    token_span: start..end,
                    surface: tokens.tokens[start..end].join(" "),
                    sense,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(PostDiscourse { connectives })
    }
}

impl TagRecord {
    pub fn from_post(course_id: &str, thread_id: &str, post_id: &str, tags: &PostDiscourse) -> Self {
        Self {
            course_id: course_id.to_string(),
            thread_id: thread_id.to_string(),
            post_id: post_id.to_string(),
            spans: tags
                .connectives
                .iter()
                .map(|c| (c.token_span.start, c.token_span.end, c.sense))
                .collect(),
        }
    }
}

/// Writes records in the import format, so a `tag` run can be fed back with `--tags`.
pub fn write_tag_records(records: &[TagRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in records {
        write!(out, "{}\t{}\t{}", r.course_id, r.thread_id, r.post_id)?;
        for (s, e, sense) in &r.spans {
            write!(out, "\t{s}:{e}:{sense}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
