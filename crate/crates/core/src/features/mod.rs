//! Thread feature extraction under the `edm15`, `pdtb` and `eplusp` configurations.
//!
//! Features are computed from the student posts that precede the first staff
//! post; the intervention itself is never an input.

mod dump;
mod edm15;
mod pdtb;
mod space;
mod vocab;

use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

pub use dump::{read_feature_dump, write_feature_dump, DumpRecord, FeatureDump};
pub use edm15::{edm15_feature_names, edm15_features, edm15_space, Affirmations, EDM15_META_NAMES};
pub use pdtb::{pdtb_feature_names, pdtb_features, pdtb_space, pdtb_values, PDTB_DIM};
pub use space::{FeatureConfig, FeatureSpace, FeatureVector};
pub use vocab::{build_vocabulary, thread_content_tokens, Vocabulary};

use crate::corpus::{Label, SubForumType, Thread};
use crate::discourse::{DiscourseError, PostDiscourse, TagSource};
use crate::textprep::{self, TokenizedPost};

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("feature config {0} needs a vocabulary")]
    MissingVocabulary(FeatureConfig),
    #[error("feature config {0} needs a connective lexicon or imported tags")]
    MissingTagger(FeatureConfig),
    #[error("cannot build a vocabulary from an empty training set")]
    EmptyTrainingSet,
    #[error("thread length is zero but {tags} connective(s) were tagged")]
    InconsistentLength { tags: usize },
    #[error("feature {0:?} has a non-finite value")]
    NonFinite(String),
    #[error("duplicate feature name {0:?}")]
    DuplicateName(String),
    #[error("feature {0:?} is not in the feature space")]
    UnknownFeature(String),
    #[error("feature dump line {line}: {message}")]
    MalformedDump { line: usize, message: String },
    #[error(transparent)]
    Discourse(#[from] DiscourseError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Denominator for the absolute sense frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LengthNormalizer {
    #[default]
    Tokens,
    Posts,
    Sentences,
}

impl FromStr for LengthNormalizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "token" | "tokens" => Ok(Self::Tokens),
            "post" | "posts" => Ok(Self::Posts),
            "sentence" | "sentences" => Ok(Self::Sentences),
            other => Err(format!("unknown length normalizer {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnigramValues {
    #[default]
    Counts,
    Binary,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FeatureOptions {
    pub normalizer: LengthNormalizer,
    pub unigrams: UnigramValues,
}

#[derive(Debug, Clone)]
pub struct PreparedPost {
    pub is_comment: bool,
    pub tokens: TokenizedPost,
    pub discourse: PostDiscourse,
}

/// A thread reduced to its pre-intervention student posts, tokenized and tagged.
#[derive(Debug, Clone)]
pub struct PreparedThread {
    pub course_id: String,
    pub thread_id: String,
    pub subforum: SubForumType,
    pub label: Label,
    pub posts: Vec<PreparedPost>,
}

impl PreparedThread {
    pub fn token_length(&self) -> usize {
        self.posts.iter().map(|p| p.tokens.len()).sum()
    }

    pub fn sentence_count(&self) -> usize {
        self.posts.iter().map(|p| p.tokens.sentences.len()).sum()
    }

    fn length(&self, normalizer: LengthNormalizer) -> usize {
        match normalizer {
            LengthNormalizer::Tokens => self.token_length(),
            LengthNormalizer::Posts => self.posts.len(),
            LengthNormalizer::Sentences => self.sentence_count(),
        }
    }

    pub fn tagging(&self) -> Vec<PostDiscourse> {
        self.posts.iter().map(|p| p.discourse.clone()).collect()
    }
}

/// Tokenizes the student posts and tags them when a source is given.
pub fn prepare_thread(
    thread: &Thread,
    source: Option<TagSource<'_>>,
) -> Result<PreparedThread, FeatureError> {
    let mut posts = Vec::new();
    for (i, p) in thread.student_posts().enumerate() {
        let tokens = textprep::preprocess(&p.text);
        let discourse = match source {
            Some(src) => src.tag(thread, i, &tokens)?,
            None => PostDiscourse::default(),
        };
        posts.push(PreparedPost {
            is_comment: p.is_comment(),
            tokens,
            discourse,
        });
    }
    Ok(PreparedThread {
        course_id: thread.course_id.clone(),
        thread_id: thread.thread_id.clone(),
        subforum: thread.subforum,
        label: thread.label,
        posts,
    })
}

/// Order-preserving parallel preparation.
pub fn prepare_threads(
    threads: &[Thread],
    source: Option<TagSource<'_>>,
) -> Result<Vec<PreparedThread>, FeatureError> {
    threads
        .par_iter()
        .map(|t| prepare_thread(t, source))
        .collect()
}

/// Maps prepared threads into one fixed feature space.
#[derive(Debug, Clone)]
pub struct Featurizer {
    config: FeatureConfig,
    space: Arc<FeatureSpace>,
    vocabulary: Option<Arc<Vocabulary>>,
    affirmations: Arc<Affirmations>,
    options: FeatureOptions,
}

impl Featurizer {
    pub fn new(
        config: FeatureConfig,
        vocabulary: Option<Arc<Vocabulary>>,
        options: FeatureOptions,
    ) -> Result<Self, FeatureError> {
        let space = match (config, &vocabulary) {
            (FeatureConfig::Pdtb, _) => pdtb_space(),
            (_, None) => return Err(FeatureError::MissingVocabulary(config)),
            (FeatureConfig::Edm15, Some(v)) => edm15_space(v),
            (FeatureConfig::EplusP, Some(v)) => {
                let mut names = edm15_feature_names(v);
                names.extend(pdtb_feature_names());
                Arc::new(FeatureSpace::new(
                    format!("eplusp/{}", v.hash()),
                    names,
                )?)
            }
        };
        Ok(Self {
            config,
            space,
            vocabulary: if config.uses_lexical() { vocabulary } else { None },
            affirmations: Arc::new(Affirmations::english().clone()),
            options,
        })
    }

    pub fn with_affirmations(mut self, affirmations: Affirmations) -> Self {
        self.affirmations = Arc::new(affirmations);
        self
    }

    pub fn config(&self) -> FeatureConfig {
        self.config
    }

    pub fn space(&self) -> &Arc<FeatureSpace> {
        &self.space
    }

    pub fn vocabulary(&self) -> Option<&Arc<Vocabulary>> {
        self.vocabulary.as_ref()
    }

    pub fn featurize(&self, thread: &PreparedThread) -> Result<FeatureVector, FeatureError> {
        let mut entries: Vec<(usize, f64)> = Vec::new();
        if let Some(vocab) = &self.vocabulary {
            // EDM15 block occupies the leading indices in both edm15 and eplusp spaces.
            let v = edm15::edm15_entries(thread, vocab, &self.affirmations, self.options.unigrams);
            entries.extend(v);
        }
        if self.config.uses_discourse() {
            let offset = self.space.dim() - PDTB_DIM;
            let values = pdtb_values(&thread.tagging(), thread.length(self.options.normalizer))?;
            entries.extend(values.into_iter().enumerate().map(|(i, v)| (offset + i, v)));
        }
        FeatureVector::from_indexed(self.space.clone(), entries)
    }

    /// Order-preserving parallel featurization.
    pub fn featurize_all(
        &self,
        threads: &[PreparedThread],
    ) -> Result<Vec<(FeatureVector, Label)>, FeatureError> {
        threads
            .par_iter()
            .map(|t| Ok((self.featurize(t)?, t.label)))
            .collect()
    }
}

/// Tokenizes, tags and featurizes threads under `config`.
pub fn vectorize(
    threads: &[Thread],
    config: FeatureConfig,
    vocabulary: Option<Arc<Vocabulary>>,
    source: Option<TagSource<'_>>,
    options: FeatureOptions,
) -> Result<Vec<(FeatureVector, Label)>, FeatureError> {
    if config.uses_discourse() && source.is_none() {
        return Err(FeatureError::MissingTagger(config));
    }
    let featurizer = Featurizer::new(config, vocabulary, options)?;
    let prepared = prepare_threads(threads, source.filter(|_| config.uses_discourse()))?;
    featurizer.featurize_all(&prepared)
}
