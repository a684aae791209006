//! Shallow explicit-connective tagging with Level-1 discourse senses.
//!
//! Connectives are found by longest match against a [`ConnectiveLexicon`].
//! A match is kept when its discourse prior reaches the lexicon threshold or
//! when a positional cue fires (sentence start, or an adjacent comma).
//! Overlapping candidates are resolved in favor of the longer match, then the
//! leftmost one. Tagging never crosses post boundaries.

mod import;
mod lexicon;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

pub use import::{write_tag_records, ImportedTags, TagRecord};
pub use lexicon::{
    ConnectiveLexicon, LexiconEntry, DEFAULT_PRIOR_THRESHOLD, MAX_CONNECTIVE_TOKENS,
};

use crate::corpus::Thread;
use crate::textprep::{self, TokenizedPost};

#[derive(Debug, thiserror::Error)]
pub enum DiscourseError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon line {line}: {message}")]
    MalformedLexicon { line: usize, message: String },
    #[error("lexicon line {line}: discourse prior {value} outside [0, 1]")]
    PriorOutOfRange { line: usize, value: f64 },
    #[error("lexicon line {line}: duplicate surface {surface:?}")]
    DuplicateSurface { line: usize, surface: String },
    #[error("tag file line {line}: {message}")]
    MalformedTags { line: usize, message: String },
    #[error("imported span {start}..{end} of post {post_id:?} exceeds its {len} tokens")]
    SpanOutOfRange {
        post_id: String,
        start: usize,
        end: usize,
        len: usize,
    },
}

/// PDTB Level-1 sense. The declaration order is the feature ordinal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SenseTag {
    Temporal,
    Contingency,
    Comparison,
    Expansion,
}

impl SenseTag {
    pub const ALL: [SenseTag; 4] = [
        SenseTag::Temporal,
        SenseTag::Contingency,
        SenseTag::Comparison,
        SenseTag::Expansion,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SenseTag::Temporal => "Temporal",
            SenseTag::Contingency => "Contingency",
            SenseTag::Comparison => "Comparison",
            SenseTag::Expansion => "Expansion",
        }
    }
}

impl fmt::Display for SenseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SenseTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SenseTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown sense {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedConnective {
    /// Half-open token range within the post.
    pub token_span: Range<usize>,
    pub surface: String,
    pub sense: SenseTag,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PostDiscourse {
    pub connectives: Vec<TaggedConnective>,
}

impl PostDiscourse {
    pub fn senses(&self) -> impl Iterator<Item = SenseTag> + '_ {
        self.connectives.iter().map(|c| c.sense)
    }

    pub fn len(&self) -> usize {
        self.connectives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.connectives.is_empty()
    }

    /// Spans are strictly increasing and pairwise disjoint.
    pub fn spans_well_formed(&self) -> bool {
        self.connectives
            .windows(2)
            .all(|w| w[0].token_span.end <= w[1].token_span.start)
            && self
                .connectives
                .iter()
                .all(|c| c.token_span.start < c.token_span.end)
    }
}

struct Candidate<'a> {
    start: usize,
    entry: &'a LexiconEntry,
}

fn positional_cue(post: &TokenizedPost, start: usize, len: usize) -> bool {
    let prev = start.checked_sub(1).map(|i| post.tokens[i].as_str());
    let next = post.tokens.get(start + len).map(String::as_str);
    post.is_sentence_start(start)
        || prev.is_some_and(|p| p == "," || p.starts_with(['.', '!', '?']))
        || next == Some(",")
}

/// Tags explicit connectives in one post's unfiltered token stream.
pub fn tag_post(post: &TokenizedPost, lexicon: &ConnectiveLexicon) -> PostDiscourse {
    let tokens = &post.tokens;
    let tau = lexicon.prior_threshold();
    let mut candidates: Vec<Candidate> = Vec::new();
    for start in 0..tokens.len() {
        for entry in lexicon.matches_at(&tokens[start..]) {
            if entry.discourse_prior >= tau || positional_cue(post, start, entry.tokens.len()) {
                candidates.push(Candidate { start, entry });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.entry
            .tokens
            .len()
            .cmp(&a.entry.tokens.len())
            .then(a.start.cmp(&b.start))
    });
    let mut taken = vec![false; tokens.len()];
    let mut chosen: Vec<TaggedConnective> = Vec::new();
    for c in candidates {
        let span = c.start..c.start + c.entry.tokens.len();
        if taken[span.clone()].iter().any(|t| *t) {
            continue;
        }
        taken[span.clone()].iter_mut().for_each(|t| *t = true);
        chosen.push(TaggedConnective {
            token_span: span,
            surface: c.entry.surface.clone(),
            sense: c.entry.sense(),
        });
    }
    chosen.sort_by_key(|c| c.token_span.start);
    PostDiscourse {
        connectives: chosen,
    }
}

/// Where connective tags come from: the built-in matcher or an imported tag file.
#[derive(Debug, Clone, Copy)]
pub enum TagSource<'a> {
    Lexicon(&'a ConnectiveLexicon),
    Imported(&'a ImportedTags),
}

impl TagSource<'_> {
    /// Tags post `post_index` of `thread`, whose tokens are `tokens`.
    pub fn tag(
        &self,
        thread: &Thread,
        post_index: usize,
        tokens: &TokenizedPost,
    ) -> Result<PostDiscourse, DiscourseError> {
        match self {
            TagSource::Lexicon(lex) => Ok(tag_post(tokens, lex)),
            TagSource::Imported(imported) => {
                let post_id = &thread.posts[post_index].post_id;
                imported.post_tags(&thread.course_id, &thread.thread_id, post_id, tokens)
            }
        }
    }
}

/// Tags every post of a thread independently, in post order.
pub fn tag_thread(
    thread: &Thread,
    source: TagSource<'_>,
) -> Result<Vec<PostDiscourse>, DiscourseError> {
    thread
        .posts
        .iter()
        .enumerate()
        .map(|(i, p)| source.tag(thread, i, &textprep::preprocess(&p.text)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SenseCounts(pub [usize; 4]);

impl SenseCounts {
    pub fn add(&mut self, sense: SenseTag) {
        self.0[sense.index()] += 1;
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn get(&self, sense: SenseTag) -> usize {
        self.0[sense.index()]
    }
}

/// Share of each sense among all tagged connectives, in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct SenseDistribution {
    pub counts: SenseCounts,
    pub percent: [f64; 4],
}

impl SenseDistribution {
    pub fn percent_of(&self, sense: SenseTag) -> f64 {
        self.percent[sense.index()]
    }

    /// One line per sense, largest first, rounded to whole percent.
    pub fn render(&self) -> String {
        let mut order = SenseTag::ALL.to_vec();
        order.sort_by(|a, b| self.counts.get(*b).cmp(&self.counts.get(*a)).then(a.cmp(b)));
        order
            .into_iter()
            .map(|s| {
                format!(
                    "{:<12} {:>8} {:>4.0}%\n",
                    s.as_str(),
                    self.counts.get(s),
                    self.percent_of(s)
                )
            })
            .collect()
    }
}

/// `None` when nothing was tagged.
pub fn sense_distribution<'a>(
    taggings: impl IntoIterator<Item = &'a PostDiscourse>,
) -> Option<SenseDistribution> {
    let mut counts = SenseCounts::default();
    for post in taggings {
        post.senses().for_each(|s| counts.add(s));
    }
    distribution_from_counts(counts)
}

pub fn distribution_from_counts(counts: SenseCounts) -> Option<SenseDistribution> {
    let total = counts.total();
    if total == 0 {
        return None;
    }
    let mut percent = [0.0; 4];
    for (p, c) in percent.iter_mut().zip(counts.0) {
        *p = 100.0 * c as f64 / total as f64;
    }
    Some(SenseDistribution { counts, percent })
}
