//! Lexical and thread-structure baseline features.

use std::sync::{Arc, OnceLock};

use super::vocab::thread_content_tokens;
use super::{FeatureError, FeatureSpace, FeatureVector, PreparedThread, UnigramValues, Vocabulary};
use crate::corpus::SubForumType;
use crate::textprep;

const DEFAULT_AFFIRMATIONS: &str = include_str!("../../data/affirmations_en.txt");

/// Non-unigram baseline features; they precede the `unigram:` block.
pub const EDM15_META_NAMES: [&str; 12] = [
    "edm15:forum_errata",
    "edm15:forum_exam",
    "edm15:forum_lecture",
    "edm15:forum_homework",
    "edm15:affirmation",
    "edm15:n_posts",
    "edm15:n_comments",
    "edm15:n_posts_plus_comments",
    "edm15:avg_comments_per_post",
    "edm15:n_sentences",
    "edm15:n_url",
    "edm15:n_timeref",
];

const FORUM: usize = 0;
const AFFIRMATION: usize = 4;
const N_POSTS: usize = 5;
const N_COMMENTS: usize = 6;
const N_BOTH: usize = 7;
const AVG_COMMENTS: usize = 8;
const N_SENTENCES: usize = 9;
const N_URL: usize = 10;
const N_TIMEREF: usize = 11;
const UNIGRAM_OFFSET: usize = EDM15_META_NAMES.len();

/// Phrases signalling that a student acknowledges an earlier post.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Affirmations {
    phrases: Vec<Vec<String>>,
}

impl Affirmations {
    pub fn parse(src: &str) -> Self {
        let phrases = src
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| textprep::tokenize(l).tokens)
            .filter(|t| !t.is_empty())
            .collect();
        Self { phrases }
    }

    pub fn english() -> &'static Affirmations {
        static A: OnceLock<Affirmations> = OnceLock::new();
        A.get_or_init(|| Affirmations::parse(DEFAULT_AFFIRMATIONS))
    }

    pub fn matches(&self, tokens: &[String]) -> bool {
        self.phrases
            .iter()
            .any(|p| tokens.windows(p.len()).any(|w| w == p.as_slice()))
    }
}

pub fn edm15_feature_names(vocab: &Vocabulary) -> Vec<String> {
    EDM15_META_NAMES
        .iter()
        .map(|s| s.to_string())
        .chain(vocab.tokens().iter().map(|t| format!("unigram:{t}")))
        .collect()
}

pub fn edm15_space(vocab: &Vocabulary) -> Arc<FeatureSpace> {
    Arc::new(
        FeatureSpace::new(format!("edm15/{}", vocab.hash()), edm15_feature_names(vocab))
            .expect("vocabulary tokens are unique"),
    )
}

fn forum_slot(sf: SubForumType) -> Option<usize> {
    SubForumType::KEPT.iter().position(|k| *k == sf)
}

/// Baseline values keyed by index in an EDM15-prefixed space.
pub(crate) fn edm15_entries(
    thread: &PreparedThread,
    vocab: &Vocabulary,
    affirmations: &Affirmations,
    unigrams: UnigramValues,
) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    if let Some(slot) = forum_slot(thread.subforum) {
        out.push((FORUM + slot, 1.0));
    }
    let affirmed = thread
        .posts
        .iter()
        .skip(1)
        .any(|p| affirmations.matches(&p.tokens.tokens));
    out.push((AFFIRMATION, f64::from(u8::from(affirmed))));

    let n_comments = thread.posts.iter().filter(|p| p.is_comment).count();
    let n_posts = thread.posts.len() - n_comments;
    out.push((N_POSTS, n_posts as f64));
    out.push((N_COMMENTS, n_comments as f64));
    out.push((N_BOTH, thread.posts.len() as f64));
    let avg = if n_posts == 0 {
        0.0
    } else {
        n_comments as f64 / n_posts as f64
    };
    out.push((AVG_COMMENTS, avg));
    out.push((N_SENTENCES, thread.sentence_count() as f64));
    let (mut url, mut timeref) = (0, 0);
    for p in &thread.posts {
        url += p.tokens.replaced_counts.url;
        timeref += p.tokens.replaced_counts.timeref;
    }
    out.push((N_URL, url as f64));
    out.push((N_TIMEREF, timeref as f64));

    let mut counts: Vec<(usize, f64)> = thread_content_tokens(thread)
        .filter_map(|t| vocab.get(t))
        .map(|i| (UNIGRAM_OFFSET + i, 1.0))
        .collect();
    if unigrams == UnigramValues::Binary {
        counts.sort_by_key(|e| e.0);
        counts.dedup_by_key(|e| e.0);
    }
    out.extend(counts);
    out
}

/// Baseline feature vector; unseen tokens contribute nothing.
pub fn edm15_features(
    thread: &PreparedThread,
    vocab: &Vocabulary,
    space: Arc<FeatureSpace>,
) -> Result<FeatureVector, FeatureError> {
    let entries = edm15_entries(thread, vocab, Affirmations::english(), UnigramValues::Counts);
    FeatureVector::from_indexed(space, entries)
}
