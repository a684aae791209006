use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use super::{DiscourseError, SenseTag};
use crate::textprep;

const DEFAULT_LEXICON: &str = include_str!("../../data/connectives_en.tsv");

/// Longest connective surface, in tokens.
pub const MAX_CONNECTIVE_TOKENS: usize = 4;

pub const DEFAULT_PRIOR_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub surface: String,
    pub tokens: Vec<String>,
    pub discourse_prior: f64,
    /// Indexed by [`SenseTag::index`].
    pub sense_weights: [f64; 4],
}

impl LexiconEntry {
    /// Highest-weighted sense; ties go to the lower ordinal.
    pub fn sense(&self) -> SenseTag {
        let mut best = 0;
        for i in 1..4 {
            if self.sense_weights[i] > self.sense_weights[best] {
                best = i;
            }
        }
        SenseTag::ALL[best]
    }
}

#[derive(Debug, Clone)]
pub struct ConnectiveLexicon {
    entries: Vec<LexiconEntry>,
    by_first_token: HashMap<String, Vec<usize>>,
    prior_threshold: f64,
}

impl ConnectiveLexicon {
    pub fn from_entries(entries: Vec<LexiconEntry>) -> Result<Self, DiscourseError> {
        let mut by_first_token: HashMap<String, Vec<usize>> = HashMap::new();
        let mut seen = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if seen.insert(e.surface.clone(), i).is_some() {
                return Err(DiscourseError::DuplicateSurface {
                    line: i + 1,
                    surface: e.surface.clone(),
                });
            }
            by_first_token
                .entry(e.tokens[0].clone())
                .or_default()
                .push(i);
        }
        Ok(Self {
            entries,
            by_first_token,
            prior_threshold: DEFAULT_PRIOR_THRESHOLD,
        })
    }

    /// Parses the tab-separated lexicon format:
    /// `surface  prior  temporal  contingency  comparison  expansion`.
    pub fn parse(src: &str) -> Result<Self, DiscourseError> {
        let mut entries = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (idx, raw) in src.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
            if fields.len() != 6 {
                return Err(DiscourseError::MalformedLexicon {
                    line,
                    message: format!("expected 6 tab-separated fields, found {}", fields.len()),
                });
            }
            let surface = fields[0].to_string();
            let num = |s: &str| {
                s.parse::<f64>().map_err(|_| DiscourseError::MalformedLexicon {
                    line,
                    message: format!("not a number: {s:?}"),
                })
            };
            let discourse_prior = num(fields[1])?;
            if !(0.0..=1.0).contains(&discourse_prior) {
                return Err(DiscourseError::PriorOutOfRange {
                    line,
                    value: discourse_prior,
                });
            }
            let mut sense_weights = [0.0; 4];
            for (w, f) in sense_weights.iter_mut().zip(&fields[2..]) {
                *w = num(f)?;
                if !w.is_finite() || *w < 0.0 {
                    return Err(DiscourseError::MalformedLexicon {
                        line,
                        message: format!("sense weight must be nonnegative, got {f}"),
                    });
                }
            }
            if !sense_weights.iter().any(|w| *w > 0.0) {
                return Err(DiscourseError::MalformedLexicon {
                    line,
                    message: "no positive sense weight".into(),
                });
            }
            let tokens = textprep::tokenize(&surface).tokens;
            let expected: Vec<&str> = surface.split_whitespace().collect();
            if tokens.is_empty()
                || tokens.len() > MAX_CONNECTIVE_TOKENS
                || tokens != expected
            {
                return Err(DiscourseError::MalformedLexicon {
                    line,
                    message: format!(
                        "surface {surface:?} must be 1-{MAX_CONNECTIVE_TOKENS} lowercase word tokens"
                    ),
                });
            }
            if seen.insert(surface.clone(), line).is_some() {
                return Err(DiscourseError::DuplicateSurface { line, surface });
            }
            entries.push(LexiconEntry {
                surface,
                tokens,
                discourse_prior,
                sense_weights,
            });
        }
        Self::from_entries(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DiscourseError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|source| DiscourseError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&src)
    }

    /// The shipped English inventory of explicit connectives.
    pub fn english() -> &'static ConnectiveLexicon {
        static L: OnceLock<ConnectiveLexicon> = OnceLock::new();
        L.get_or_init(|| Self::parse(DEFAULT_LEXICON).expect("shipped lexicon is valid"))
    }

    pub fn with_prior_threshold(mut self, threshold: f64) -> Self {
        self.prior_threshold = threshold;
        self
    }

    pub fn prior_threshold(&self) -> f64 {
        self.prior_threshold
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn get(&self, surface: &str) -> Option<&LexiconEntry> {
        self.entries.iter().find(|e| e.surface == surface)
    }

    /// A copy without the given surface.
    pub fn without(&self, surface: &str) -> Self {
        let entries = self
            .entries
            .iter()
            .filter(|e| e.surface != surface)
            .cloned()
            .collect();
        Self::from_entries(entries)
            .expect("subset of a valid lexicon")
            .with_prior_threshold(self.prior_threshold)
    }

    /// Entries whose token sequence starts at `tokens[0]`.
    pub(crate) fn matches_at<'a>(
        &'a self,
        tokens: &'a [String],
    ) -> impl Iterator<Item = &'a LexiconEntry> + 'a {
        let ids = tokens
            .first()
            .and_then(|t| self.by_first_token.get(t))
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        ids.iter()
            .map(|&i| &self.entries[i])
            .filter(move |e| tokens.starts_with(&e.tokens))
    }
}
