//! Seeded synthetic forum corpora with controllable vocabulary shift and
//! discourse signal.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{write_corpus, AuthorRole, Label, Post, SubForumType, Thread};
use crate::discourse::ConnectiveLexicon;
use crate::textprep::Stopwords;

const CONTENT_POOL: usize = 80;
const TOPIC_POOL: usize = 12;

#[derive(Debug, thiserror::Error)]
pub enum SynGenError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("course {course}: {requested} intervened threads requested but only {threads} threads")]
    Infeasible {
        course: usize,
        requested: usize,
        threads: usize,
    },
    #[error("spec file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One value for every course, or one per course.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerCourse<T> {
    Each(Vec<T>),
    All(T),
}

impl<T: Copy> PerCourse<T> {
    pub fn get(&self, course: usize) -> Option<T> {
        match self {
            PerCourse::All(v) => Some(*v),
            PerCourse::Each(vs) => vs.get(course).copied(),
        }
    }
}

fn default_lexical_signal() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub n_courses: usize,
    pub threads_per_course: PerCourse<usize>,
    /// Intervened over non-intervened threads.
    pub intervention_ratio: PerCourse<f64>,
    /// Fraction of each course's content and topic words that no other course uses.
    pub vocabulary_disjointness: f64,
    /// Probability that an intervened thread carries contingency/comparison connectives.
    pub discourse_signal_strength: f64,
    /// Probability that an intervened thread mentions its course's trouble-topic words.
    #[serde(default = "default_lexical_signal")]
    pub lexical_signal_strength: f64,
    pub seed: u64,
}

impl GenSpec {
    pub fn from_toml(text: &str) -> Result<Self, SynGenError> {
        let spec: GenSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SynGenError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<(), SynGenError> {
        let bad = |m: String| Err(SynGenError::InvalidSpec(m));
        if self.n_courses == 0 {
            return bad("n_courses must be positive".into());
        }
        for (name, p) in [
            ("vocabulary_disjointness", self.vocabulary_disjointness),
            ("discourse_signal_strength", self.discourse_signal_strength),
            ("lexical_signal_strength", self.lexical_signal_strength),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        for c in 0..self.n_courses {
            let Some(n) = self.threads_per_course.get(c) else {
                return bad(format!("no thread count for course {}", c + 1));
            };
            if n == 0 {
                return bad(format!("course {} has no threads", c + 1));
            }
            let Some(r) = self.intervention_ratio.get(c) else {
                return bad(format!("no intervention ratio for course {}", c + 1));
            };
            if r.is_nan() || r < 0.0 {
                return bad(format!("intervention ratio must be nonnegative, got {r}"));
            }
            let requested = intervened_count(n, r);
            if requested > n {
                return Err(SynGenError::Infeasible {
                    course: c + 1,
                    requested,
                    threads: n,
                });
            }
        }
        Ok(())
    }
}

/// Intervened threads out of `threads` for an intervened/non-intervened ratio.
///
/// An infinite ratio asks for one more intervened thread than there are threads.
pub fn intervened_count(threads: usize, ratio: f64) -> usize {
    if ratio.is_infinite() {
        return threads + 1;
    }
    (threads as f64 * ratio / (1.0 + ratio)).round() as usize
}

pub fn course_id(course: usize) -> String {
    format!("SYN-{:02}", course + 1)
}

struct WordMaker {
    used: BTreeSet<String>,
}

impl WordMaker {
    fn new() -> Self {
        let lexicon = ConnectiveLexicon::english();
        let used = lexicon
            .entries()
            .iter()
            .flat_map(|e| e.tokens.iter().cloned())
            .collect();
        Self { used }
    }

    /// A fresh consonant-vowel pseudo-word no stopword or connective collides with.
    fn fresh(&mut self, rng: &mut ChaCha8Rng) -> String {
        const C: &[u8] = b"bdfgklmnprstvz";
        const V: &[u8] = b"aeiou";
        loop {
            let syllables = rng.random_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push(*C.choose(rng).unwrap() as char);
                w.push(*V.choose(rng).unwrap() as char);
            }
            if rng.random_bool(0.5) {
                w.push(*C.choose(rng).unwrap() as char);
            }
            if Stopwords::english().contains(&w) || !self.used.insert(w.clone()) {
                continue;
            }
            return w;
        }
    }

    fn pool(&mut self, n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
        (0..n).map(|_| self.fresh(rng)).collect()
    }
}

struct CourseWords {
    content: Vec<String>,
    topic: Vec<String>,
}

fn mixed_pool(
    size: usize,
    disjointness: f64,
    shared: &[String],
    maker: &mut WordMaker,
    rng: &mut ChaCha8Rng,
) -> Vec<String> {
    let unique = (size as f64 * disjointness).round() as usize;
    let mut pool = maker.pool(unique, rng);
    pool.extend(shared.choose_multiple(rng, size - unique).cloned());
    pool
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Sentences whose connectives are tagged Contingency or Comparison.
fn signal_sentence(w: &[String], rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..4) {
        0 => format!("If {} {}, then {} {}.", w[0], w[1], w[2], w[3]),
        1 => format!("But {} {} {}.", w[0], w[1], w[2]),
        2 => format!("{} {} because {} {}.", capitalize(&w[0]), w[1], w[2], w[3]),
        _ => format!("{} {}, so {} {}?", capitalize(&w[0]), w[1], w[2], w[3]),
    }
}

/// Sentences whose connectives are tagged Expansion or Temporal.
fn neutral_sentence(w: &[String], rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..4) {
        0 => format!("{} {}, and {} {}.", capitalize(&w[0]), w[1], w[2], w[3]),
        1 => format!("{} {}, or {} {}?", capitalize(&w[0]), w[1], w[2], w[3]),
        2 => format!("When {} {}, {} {}.", w[0], w[1], w[2], w[3]),
        _ => format!("After {} {}, {} {} before {}.", w[0], w[1], w[2], w[3], w[4]),
    }
}

struct ThreadPlan {
    intervened: bool,
    discourse_signal: bool,
    lexical_signal: bool,
}

fn words(plan: &ThreadPlan, cw: &CourseWords, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut w: Vec<String> = (0..5).map(|_| cw.content.choose(rng).unwrap().clone()).collect();
    if plan.lexical_signal {
        let slot = rng.random_range(0..4);
        w[slot] = cw.topic.choose(rng).unwrap().clone();
    }
    w
}

fn post_text(plan: &ThreadPlan, cw: &CourseWords, first: bool, rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..=3);
    let mut sentences = Vec::with_capacity(n + 1);
    for i in 0..n {
        let w = words(plan, cw, rng);
        // the opening post of a signal thread always leads with a signal sentence
        let signal = plan.discourse_signal && ((first && i == 0) || rng.random_bool(0.7));
        sentences.push(if signal {
            signal_sentence(&w, rng)
        } else {
            neutral_sentence(&w, rng)
        });
    }
    sentences.join(" ")
}

fn make_thread(
    course: usize,
    index: usize,
    plan: &ThreadPlan,
    cw: &CourseWords,
    start: DateTime<Utc>,
    rng: &mut ChaCha8Rng,
) -> Thread {
    let cid = course_id(course);
    let tid = format!("{cid}-T{:04}", index + 1);
    let subforum = *SubForumType::KEPT.choose(rng).unwrap();
    let n_student = rng.random_range(1..=4);
    let mut posts: Vec<Post> = Vec::new();
    let mut top_level: Vec<String> = Vec::new();
    let mut minute = 0i64;
    let mut push = |posts: &mut Vec<Post>, role, author: String, text: String, parent| {
        let post_id = format!("{tid}-P{}", posts.len() + 1);
        minute += 7;
        posts.push(Post {
            post_id,
            author_id: author,
            role,
            timestamp: start + Duration::minutes(minute),
            text,
            parent_post_id: parent,
        });
    };
    for i in 0..n_student {
        let parent = (i > 0 && rng.random_bool(0.4)).then(|| top_level.choose(rng).unwrap().clone());
        let author = format!("{cid}-S{:03}", rng.random_range(1..=200));
        let text = post_text(plan, cw, i == 0, rng);
        let is_top = parent.is_none();
        push(&mut posts, AuthorRole::Student, author, text, parent);
        if is_top {
            top_level.push(posts.last().unwrap().post_id.clone());
        }
    }
    if plan.intervened {
        let role = if rng.random_bool(0.5) {
            AuthorRole::Instructor
        } else {
            AuthorRole::TeachingAssistant
        };
        let text = format!("Thanks for asking. Please check {} again.", cw.content.choose(rng).unwrap());
        push(&mut posts, role, format!("{cid}-STAFF"), text, None);
        // students keep talking after the staff reply; loading truncates these
        if rng.random_bool(0.3) {
            let author = format!("{cid}-S{:03}", rng.random_range(1..=200));
            push(&mut posts, AuthorRole::Student, author, "Thanks, that helps.".into(), None);
        }
    }
    Thread {
        course_id: cid,
        thread_id: tid,
        subforum,
        posts,
        label: if plan.intervened {
            Label::Intervened
        } else {
            Label::NotIntervened
        },
    }
}

/// Generates the corpus described by `spec`, course by course.
pub fn generate(spec: &GenSpec) -> Result<Vec<Thread>, SynGenError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut maker = WordMaker::new();
    let shared_content = maker.pool(CONTENT_POOL, &mut rng);
    let shared_topic = maker.pool(TOPIC_POOL, &mut rng);
    let epoch = Utc.with_ymd_and_hms(2015, 1, 5, 9, 0, 0).unwrap();
    let mut threads = Vec::new();
    for c in 0..spec.n_courses {
        let n = spec.threads_per_course.get(c).expect("validated");
        let r = spec.intervention_ratio.get(c).expect("validated");
        let d = spec.vocabulary_disjointness;
        let cw = CourseWords {
            content: mixed_pool(CONTENT_POOL, d, &shared_content, &mut maker, &mut rng),
            topic: mixed_pool(TOPIC_POOL, d, &shared_topic, &mut maker, &mut rng),
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut intervened = vec![false; n];
        for &i in &order[..intervened_count(n, r)] {
            intervened[i] = true;
        }
        let course_start = epoch + Duration::days(120 * c as i64);
        for (i, &iv) in intervened.iter().enumerate() {
            let plan = ThreadPlan {
                intervened: iv,
                discourse_signal: iv && rng.random_bool(spec.discourse_signal_strength),
                lexical_signal: iv && rng.random_bool(spec.lexical_signal_strength),
            };
            let start = course_start + Duration::hours(3 * i as i64);
            threads.push(make_thread(c, i, &plan, &cw, start, &mut rng));
        }
    }
    Ok(threads)
}

pub fn generate_to_writer(spec: &GenSpec, out: impl Write) -> Result<(), SynGenError> {
    write_corpus(&generate(spec)?, out)?;
    Ok(())
}

/// Two isotropic Gaussian classes in `dim` dimensions whose means are
/// `separation` apart. Rows are in random order.
pub fn gaussian_classes(
    n_pos: usize,
    n_neg: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let shift = separation / (dim as f64).sqrt();
    let mut rows: Vec<(Vec<f64>, bool)> = (0..n_pos + n_neg)
        .map(|i| {
            let y = i < n_pos;
            let m = if y { shift / 2.0 } else { -shift / 2.0 };
            ((0..dim).map(|_| m + noise.sample(&mut rng)).collect(), y)
        })
        .collect();
    rows.shuffle(&mut rng);
    rows.into_iter().unzip()
}
