use std::collections::{BTreeSet, HashMap};

use sha2::{Digest, Sha256};

use super::{FeatureError, PreparedThread};
use crate::textprep::{content_filter, Stopwords};

/// Unigram vocabulary, frozen after construction. Tokens are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    hash: String,
}

impl Vocabulary {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = tokens.into_iter().map(Into::into).collect();
        let tokens: Vec<String> = set.into_iter().collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let mut h = Sha256::new();
        for t in &tokens {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        let hash = h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect();
        Self {
            tokens,
            index,
            hash,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }
}

/// Content-filtered tokens of one prepared thread.
pub fn thread_content_tokens(thread: &PreparedThread) -> impl Iterator<Item = &str> {
    thread
        .posts
        .iter()
        .flat_map(|p| content_filter(&p.tokens.tokens, Stopwords::english()))
}

/// All distinct content tokens of the training threads.
pub fn build_vocabulary<'a>(
    training: impl IntoIterator<Item = &'a PreparedThread>,
) -> Result<Vocabulary, FeatureError> {
    let mut n = 0;
    let vocab = Vocabulary::from_tokens(training.into_iter().flat_map(|t| {
        n += 1;
        thread_content_tokens(t)
    }));
    if n == 0 {
        return Err(FeatureError::EmptyTrainingSet);
    }
    log::debug!("vocabulary of {} unigrams from {n} threads", vocab.len());
    Ok(vocab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, SubForumType};
    use crate::features::PreparedPost;
    use crate::textprep::preprocess;

    fn thread(text: &str) -> PreparedThread {
        PreparedThread {
            course_id: "c".into(),
            thread_id: text.into(),
            subforum: SubForumType::Exam,
            label: Label::NotIntervened,
            posts: vec![PreparedPost {
                is_comment: false,
                tokens: preprocess(text),
                discourse: Default::default(),
            }],
        }
    }

    #[test]
    fn shared_tokens() {
        let v = build_vocabulary(&[thread("quantum chord"), thread("chord quantum")]).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.tokens(), ["chord", "quantum"]);
    }

    #[test]
    fn disjoint_courses_add_up() {
        let a = build_vocabulary(&[thread("tornado earthquake")]).unwrap();
        let b = build_vocabulary(&[thread("harmony cadence")]).unwrap();
        let ab = build_vocabulary(&[thread("tornado earthquake"), thread("harmony cadence")])
            .unwrap();
        assert_eq!(ab.len(), a.len() + b.len());
    }

    #[test]
    fn stopwords_are_not_vocabulary() {
        let v = build_vocabulary(&[thread("but if the tornado is big")]).unwrap();
        assert_eq!(v.tokens(), ["big", "tornado"]);
    }

    #[test]
    fn empty_training_set() {
        assert!(matches!(
            build_vocabulary(&[]),
            Err(FeatureError::EmptyTrainingSet)
        ));
    }
}
