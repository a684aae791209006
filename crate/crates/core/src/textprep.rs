//! Tokenization, sentence splitting and non-lexical token replacement.

use std::collections::HashSet;
use std::ops::Range;
use std::sync::OnceLock;

use regex::Regex;

pub const EQU: &str = "EQU";
pub const URL: &str = "URL";
pub const TIMEREF: &str = "TIMEREF";

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReplacementCounts {
    pub equ: usize,
    pub url: usize,
    pub timeref: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replaced {
    pub text: String,
    pub counts: ReplacementCounts,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenizedPost {
    pub tokens: Vec<String>,
    /// Token-index ranges; they partition `0..tokens.len()`.
    pub sentences: Vec<Range<usize>>,
    pub replaced_counts: ReplacementCounts,
}

impl TokenizedPost {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_sentence_start(&self, idx: usize) -> bool {
        self.sentences.iter().any(|s| s.start == idx)
    }
}

pub fn is_placeholder(token: &str) -> bool {
    matches!(token, EQU | URL | TIMEREF)
}

struct Patterns {
    url: Regex,
    dollar_equ: Regex,
    timeref: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        url: Regex::new(r"(?i)\b(?:(?:https?|ftp)://|www\.)\S+").unwrap(),
        dollar_equ: Regex::new(r"\$(?:[^$\s]|[^$\s][^$\n]*[^$\s])\$").unwrap(),
        timeref: Regex::new(r"\b\d{1,2}:\d{2}(?::\d{2})?\b").unwrap(),
    })
}

/// Trailing characters that belong to the surrounding sentence, not the match.
fn trailing_punct_len(s: &str) -> usize {
    let trimmed = s.trim_end_matches(['.', ',', ';', ':', '!', '?', ')', ']', '"', '\'']);
    s.len() - trimmed.len()
}

/// Replaces URLs, equations and time references with `URL`, `EQU` and `TIMEREF`.
///
/// URLs are replaced first, then `$...$` spans, then whitespace-delimited
/// runs that look like formulas, then `(h)h:mm(:ss)` time references.
pub fn replace_nonlexical(text: &str) -> Replaced {
    let p = patterns();
    let mut counts = ReplacementCounts::default();

    let text = p.url.replace_all(text, |c: &regex::Captures| {
        let m = &c[0];
        let keep = trailing_punct_len(m);
        counts.url += 1;
        format!("{URL}{}", &m[m.len() - keep..])
    });
    let text = p.dollar_equ.replace_all(&text, |_: &regex::Captures| {
        counts.equ += 1;
        EQU.to_string()
    });
    let text = replace_formula_runs(&text, &mut counts.equ);
    let text = p.timeref.replace_all(&text, |_: &regex::Captures| {
        counts.timeref += 1;
        TIMEREF.to_string()
    });
    Replaced {
        text: text.into_owned(),
        counts,
    }
}

fn looks_like_formula(run: &str) -> bool {
    let ops = run
        .chars()
        .filter(|c| matches!(c, '=' | '+' | '^' | '/' | '\\'))
        .count();
    ops >= 2 && run.chars().any(|c| c.is_ascii_digit())
}

fn replace_formula_runs(text: &str, count: &mut usize) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while !rest.is_empty() {
        let ws_end = rest
            .find(|c: char| !c.is_whitespace())
            .unwrap_or(rest.len());
        out.push_str(&rest[..ws_end]);
        rest = &rest[ws_end..];
        let run_end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let run = &rest[..run_end];
        let keep = trailing_punct_len(run);
        let core = &run[..run.len() - keep];
        if looks_like_formula(core) {
            *count += 1;
            out.push_str(EQU);
            out.push_str(&run[core.len()..]);
        } else {
            out.push_str(run);
        }
        rest = &rest[run_end..];
    }
    out
}

#[derive(Debug)]
struct RawToken {
    text: String,
    /// Terminal punctuation run such as `.`, `!!` or `?!`.
    terminal: bool,
    is_word: bool,
    space_before: bool,
    upper_initial: bool,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn raw_tokens(text: &str) -> Vec<RawToken> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut space_before = true;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            space_before = true;
            i += 1;
            continue;
        }
        let start = i;
        let (terminal, is_word) = if is_word_char(c) {
            i += 1;
            while i < chars.len() {
                if is_word_char(chars[i]) {
                    i += 1;
                } else if matches!(chars[i], '\'' | '’')
                    && i + 1 < chars.len()
                    && is_word_char(chars[i + 1])
                {
                    i += 2;
                } else {
                    break;
                }
            }
            (false, true)
        } else if is_terminal(c) {
            while i < chars.len() && is_terminal(chars[i]) {
                i += 1;
            }
            (true, false)
        } else {
            i += 1;
            (false, false)
        };
        let surface: String = chars[start..i].iter().collect();
        let surface = surface.replace('’', "'");
        let text = if is_placeholder(&surface) {
            surface
        } else {
            surface.to_lowercase()
        };
        out.push(RawToken {
            text,
            terminal,
            is_word,
            space_before,
            upper_initial: c.is_uppercase(),
        });
        space_before = false;
    }
    out
}

/// Splits lowercase word and punctuation tokens and finds sentence boundaries.
///
/// A sentence ends at a run of `.`, `!` or `?` followed by whitespace and an
/// uppercase letter, or by the end of the text. A sentence holding a single
/// word (a greeting such as "Hi!!") is merged into the sentence after it.
pub fn tokenize(text: &str) -> TokenizedPost {
    let raw = raw_tokens(text);
    let mut bounds = Vec::new();
    let mut start = 0;
    for (i, t) in raw.iter().enumerate() {
        let ends = t.terminal
            && match raw.get(i + 1) {
                None => true,
                Some(next) => next.space_before && next.upper_initial,
            };
        if ends {
            bounds.push(start..i + 1);
            start = i + 1;
        }
    }
    if start < raw.len() {
        bounds.push(start..raw.len());
    }

    let mut sentences: Vec<Range<usize>> = Vec::with_capacity(bounds.len());
    let mut pending: Option<usize> = None;
    let n_bounds = bounds.len();
    for (k, b) in bounds.into_iter().enumerate() {
        let begin = pending.take().unwrap_or(b.start);
        let words = raw[b.clone()].iter().filter(|t| t.is_word).count();
        if words == 1 && k + 1 < n_bounds {
            pending = Some(begin);
            continue;
        }
        sentences.push(begin..b.end);
    }

    let tokens: Vec<String> = raw.into_iter().map(|t| t.text).collect();
    let replaced_counts = placeholder_counts(&tokens);
    TokenizedPost {
        tokens,
        sentences,
        replaced_counts,
    }
}

fn placeholder_counts(tokens: &[String]) -> ReplacementCounts {
    let mut c = ReplacementCounts::default();
    for t in tokens {
        match t.as_str() {
            EQU => c.equ += 1,
            URL => c.url += 1,
            TIMEREF => c.timeref += 1,
            _ => {}
        }
    }
    c
}

/// `tokenize(replace_nonlexical(text))`.
pub fn preprocess(text: &str) -> TokenizedPost {
    tokenize(&replace_nonlexical(text).text)
}

#[derive(Debug, Clone)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Stopwords {
    /// Parses one lowercase word per line; blank lines and `#` comments are skipped.
    pub fn parse(src: &str) -> Self {
        let words = src
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect();
        Self { words }
    }

    pub fn english() -> &'static Stopwords {
        static S: OnceLock<Stopwords> = OnceLock::new();
        S.get_or_init(|| Stopwords::parse(DEFAULT_STOPWORDS))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, w: &str) -> bool {
        self.words.contains(w)
    }
}

/// Drops stopwords and tokens shorter than three characters. Placeholders survive.
pub fn content_filter<'a>(tokens: &'a [String], stopwords: &Stopwords) -> Vec<&'a str> {
    tokens
        .iter()
        .map(String::as_str)
        .filter(|t| is_placeholder(t) || (t.chars().count() >= 3 && !stopwords.contains(t)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_url() {
        let r = replace_nonlexical("see https://x.y/z for hints");
        assert_eq!(r.text, "see URL for hints");
        assert_eq!(r.counts.url, 1);
    }

    #[test]
    fn single_timeref() {
        let r = replace_nonlexical("at 12:45 in lecture 3");
        assert_eq!(r.text, "at TIMEREF in lecture 3");
        assert_eq!(r.counts.timeref, 1);
        assert_eq!(r.counts.url + r.counts.equ, 0);
    }

    #[test]
    fn dollar_equation() {
        let r = replace_nonlexical("solve $x^2+1=0$ first");
        assert_eq!(r.text, "solve EQU first");
        assert_eq!(r.counts.equ, 1);
    }

    #[test]
    fn url_with_port_is_not_a_timeref() {
        let r = replace_nonlexical("http://localhost:8080/a at 10:15");
        assert_eq!(r.text, "URL at TIMEREF");
        assert_eq!((r.counts.url, r.counts.timeref), (1, 1));
    }

    #[test]
    fn empty_text() {
        let t = tokenize("");
        assert!(t.tokens.is_empty());
        assert!(t.sentences.is_empty());
    }

    #[test]
    fn two_sentences() {
        let t = tokenize("Is that normal or just a mistake? Thank you.");
        assert_eq!(t.sentences.len(), 2);
        assert_eq!(t.tokens[0], "is");
        assert_eq!(t.tokens.last().unwrap(), ".");
    }

    #[test]
    fn greeting_merges_forward() {
        let t = tokenize("Hi!! I have a question");
        assert_eq!(t.tokens, toks(&["hi", "!!", "i", "have", "a", "question"]));
        assert_eq!(t.sentences, vec![0..6]);
    }

    #[test]
    fn placeholders_and_apostrophes() {
        let t = tokenize("You're right, see URL at TIMEREF.");
        assert_eq!(
            t.tokens,
            toks(&["you're", "right", ",", "see", "URL", "at", "TIMEREF", "."])
        );
        assert_eq!(t.replaced_counts.url, 1);
        assert_eq!(t.replaced_counts.timeref, 1);
        let t = tokenize("I don’t know");
        assert_eq!(t.tokens[1], "don't");
    }

    #[test]
    fn content_filter_examples() {
        let sw = Stopwords::english();
        let v = toks(&["i", "am", "so", "confused"]);
        assert_eq!(content_filter(&v, sw), ["confused"]);
        let v = toks(&["URL", "ok"]);
        assert_eq!(content_filter(&v, sw), ["URL"]);
        // "because" is on the frozen list, "therefore" is not
        assert!(sw.contains("because"));
        assert!(!sw.contains("therefore"));
        let v = toks(&["because", "therefore"]);
        assert_eq!(content_filter(&v, sw), ["therefore"]);
    }

    #[test]
    fn stopword_list_size() {
        assert_eq!(Stopwords::english().len(), 174);
    }
}
