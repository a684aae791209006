//! Thread corpus ingestion, filtering, truncation and labeling.
//!
//! Input is a line-delimited JSON file with one thread per line (see
//! `docs/corpus-format.md`). Loading keeps every thread; [`filter_and_label`]
//! applies the sub-forum filter, drops staff-initiated threads and truncates
//! each remaining thread right after its first staff post.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown subforum {value:?}")]
    UnknownSubforum { line: usize, value: String },
    #[error("line {line}: unknown author role {value:?}")]
    UnknownRole { line: usize, value: String },
    #[error("line {line}: duplicate thread {thread_id:?} in course {course_id:?}")]
    DuplicateThread {
        line: usize,
        course_id: String,
        thread_id: String,
    },
    #[error("line {line}: duplicate post id {post_id:?}")]
    DuplicatePost { line: usize, post_id: String },
    #[error("line {line}: post {post_id:?} has parent {parent:?}, which is not a top-level post of the thread")]
    DanglingParent {
        line: usize,
        post_id: String,
        parent: String,
    },
    #[error("line {line}: thread has no posts")]
    EmptyThread { line: usize },
}

/// Sub-forum category a thread was posted in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SubForumType {
    Errata,
    Exam,
    Lecture,
    Homework,
    General,
    PeerReview,
    StudyGroup,
    TechnicalIssues,
}

impl SubForumType {
    pub const ALL: [SubForumType; 8] = [
        SubForumType::Errata,
        SubForumType::Exam,
        SubForumType::Lecture,
        SubForumType::Homework,
        SubForumType::General,
        SubForumType::PeerReview,
        SubForumType::StudyGroup,
        SubForumType::TechnicalIssues,
    ];

    /// The four content-focused sub-forums kept for modeling, in feature order.
    pub const KEPT: [SubForumType; 4] = [
        SubForumType::Errata,
        SubForumType::Exam,
        SubForumType::Lecture,
        SubForumType::Homework,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SubForumType::Errata => "errata",
            SubForumType::Exam => "exam",
            SubForumType::Lecture => "lecture",
            SubForumType::Homework => "homework",
            SubForumType::General => "general",
            SubForumType::PeerReview => "peer_review",
            SubForumType::StudyGroup => "study_group",
            SubForumType::TechnicalIssues => "technical_issues",
        }
    }

    pub fn is_kept(self) -> bool {
        Self::KEPT.contains(&self)
    }
}

impl fmt::Display for SubForumType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown value {0:?}")]
pub struct UnknownVariant(pub String);

impl FromStr for SubForumType {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AuthorRole {
    Student,
    Instructor,
    TeachingAssistant,
}

impl AuthorRole {
    pub fn as_str(self) -> &'static str {
        match self {
            AuthorRole::Student => "student",
            AuthorRole::Instructor => "instructor",
            AuthorRole::TeachingAssistant => "teaching_assistant",
        }
    }

    /// Instructors and teaching assistants both count as instructional staff.
    pub fn is_staff(self) -> bool {
        !matches!(self, AuthorRole::Student)
    }
}

impl FromStr for AuthorRole {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "student" => Ok(AuthorRole::Student),
            "instructor" => Ok(AuthorRole::Instructor),
            "teaching_assistant" => Ok(AuthorRole::TeachingAssistant),
            other => Err(UnknownVariant(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Intervened,
    NotIntervened,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Intervened
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Intervened => "intervened",
            Label::NotIntervened => "not_intervened",
        }
    }
}

impl FromStr for Label {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "intervened" => Ok(Label::Intervened),
            "not_intervened" => Ok(Label::NotIntervened),
            other => Err(UnknownVariant(other.to_string())),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Post {
    pub post_id: String,
    pub author_id: String,
    pub role: AuthorRole,
    pub timestamp: DateTime<Utc>,
    pub text: String,
    /// `None` for a top-level post, otherwise the top-level post this comment replies to.
    pub parent_post_id: Option<String>,
}

impl Post {
    pub fn is_comment(&self) -> bool {
        self.parent_post_id.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thread {
    pub course_id: String,
    pub thread_id: String,
    pub subforum: SubForumType,
    /// Posts and comments flattened into one chronological sequence.
    pub posts: Vec<Post>,
    pub label: Label,
}

impl Thread {
    /// Posts written before the first staff post, i.e. the text a predictor may look at.
    pub fn student_posts(&self) -> impl Iterator<Item = &Post> {
        self.posts.iter().take_while(|p| !p.role.is_staff())
    }

    fn first_staff_index(&self) -> Option<usize> {
        self.posts.iter().position(|p| p.role.is_staff())
    }

    /// Checks the post-filtering shape: starts with a student, and a staff post
    /// (if any) is the final post and matches the label.
    pub fn satisfies_truncation_invariant(&self) -> bool {
        let Some(first) = self.posts.first() else {
            return false;
        };
        if first.role.is_staff() {
            return false;
        }
        match (self.label, self.first_staff_index()) {
            (Label::Intervened, Some(i)) => i + 1 == self.posts.len(),
            (Label::NotIntervened, None) => true,
            _ => false,
        }
    }
}

/// Threads as loaded, plus how many of them needed their posts re-sorted.
#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub threads: Vec<Thread>,
    pub resorted_threads: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct PostRecord {
    post_id: String,
    author_id: String,
    role: String,
    timestamp: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent_post_id: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ThreadRecord {
    course_id: String,
    thread_id: String,
    subforum: String,
    posts: Vec<PostRecord>,
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<LoadedCorpus, CorpusError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_corpus(BufReader::new(file)).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

/// Parses corpus records from any buffered reader. Blank lines are skipped.
pub fn read_corpus(reader: impl BufRead) -> Result<LoadedCorpus, CorpusError> {
    let mut out = LoadedCorpus::default();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: String::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ThreadRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        let (thread, resorted) = thread_from_record(record, line_no)?;
        if !seen.insert((thread.course_id.clone(), thread.thread_id.clone())) {
            return Err(CorpusError::DuplicateThread {
                line: line_no,
                course_id: thread.course_id,
                thread_id: thread.thread_id,
            });
        }
        if resorted {
            out.resorted_threads += 1;
        }
        out.threads.push(thread);
    }
    if out.resorted_threads > 0 {
        log::warn!(
            "{} thread(s) had out-of-order timestamps and were re-sorted",
            out.resorted_threads
        );
    }
    Ok(out)
}

fn thread_from_record(record: ThreadRecord, line: usize) -> Result<(Thread, bool), CorpusError> {
    let subforum = record
        .subforum
        .parse::<SubForumType>()
        .map_err(|e| CorpusError::UnknownSubforum { line, value: e.0 })?;
    if record.posts.is_empty() {
        return Err(CorpusError::EmptyThread { line });
    }
    let mut posts = Vec::with_capacity(record.posts.len());
    let mut ids = HashSet::new();
    for p in record.posts {
        let role = p
            .role
            .parse::<AuthorRole>()
            .map_err(|e| CorpusError::UnknownRole { line, value: e.0 })?;
        let timestamp = DateTime::parse_from_rfc3339(&p.timestamp)
            .map_err(|e| CorpusError::Malformed {
                line,
                message: format!("post {:?}: bad timestamp {:?}: {e}", p.post_id, p.timestamp),
            })?
            .with_timezone(&Utc);
        if !ids.insert(p.post_id.clone()) {
            return Err(CorpusError::DuplicatePost {
                line,
                post_id: p.post_id,
            });
        }
        posts.push(Post {
            post_id: p.post_id,
            author_id: p.author_id,
            role,
            timestamp,
            text: p.text,
            parent_post_id: p.parent_post_id,
        });
    }
    let top_level: HashSet<&str> = posts
        .iter()
        .filter(|p| p.parent_post_id.is_none())
        .map(|p| p.post_id.as_str())
        .collect();
    for p in &posts {
        if let Some(parent) = &p.parent_post_id {
            if !top_level.contains(parent.as_str()) {
                return Err(CorpusError::DanglingParent {
                    line,
                    post_id: p.post_id.clone(),
                    parent: parent.clone(),
                });
            }
        }
    }
    let resorted = posts.windows(2).any(|w| w[0].timestamp > w[1].timestamp);
    // stable: ties keep input order
    posts.sort_by_key(|p| p.timestamp);
    let label = if posts.iter().any(|p| p.role.is_staff()) {
        Label::Intervened
    } else {
        Label::NotIntervened
    };
    let thread = Thread {
        course_id: record.course_id,
        thread_id: record.thread_id,
        subforum,
        posts,
        label,
    };
    Ok((thread, resorted))
}

fn record_from_thread(thread: &Thread) -> ThreadRecord {
    ThreadRecord {
        course_id: thread.course_id.clone(),
        thread_id: thread.thread_id.clone(),
        subforum: thread.subforum.as_str().to_string(),
        posts: thread
            .posts
            .iter()
            .map(|p| PostRecord {
                post_id: p.post_id.clone(),
                author_id: p.author_id.clone(),
                role: p.role.as_str().to_string(),
                timestamp: p.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
                text: p.text.clone(),
                parent_post_id: p.parent_post_id.clone(),
            })
            .collect(),
    }
}

/// Writes threads in the corpus line format. Output is deterministic.
pub fn write_corpus(threads: &[Thread], mut out: impl Write) -> std::io::Result<()> {
    for t in threads {
        let line = serde_json::to_string(&record_from_thread(t)).map_err(std::io::Error::other)?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Keeps content sub-forums, drops staff-initiated threads, truncates after the
/// first staff post and assigns labels.
pub fn filter_and_label(raw: Vec<Thread>) -> Vec<Thread> {
    raw.into_iter()
        .filter(|t| t.subforum.is_kept())
        .filter_map(|mut t| {
            if t.posts.first()?.role.is_staff() {
                return None;
            }
            match t.first_staff_index() {
                Some(i) => {
                    t.posts.truncate(i + 1);
                    t.label = Label::Intervened;
                }
                None => t.label = Label::NotIntervened,
            }
            Some(t)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CourseCounts {
    pub intervened: usize,
    pub non_intervened: usize,
}

impl CourseCounts {
    pub fn total(&self) -> usize {
        self.intervened + self.non_intervened
    }

    /// Intervened / non-intervened; `None` when there are no non-intervened threads.
    pub fn intervention_ratio(&self) -> Option<f64> {
        (self.non_intervened > 0).then(|| self.intervened as f64 / self.non_intervened as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusStats {
    pub courses: BTreeMap<String, CourseCounts>,
}

impl CorpusStats {
    pub fn total_intervened(&self) -> usize {
        self.courses.values().map(|c| c.intervened).sum()
    }

    pub fn total_non_intervened(&self) -> usize {
        self.courses.values().map(|c| c.non_intervened).sum()
    }

    /// Aligned per-course table with the ratio rounded to two decimals.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let width = self
            .courses
            .keys()
            .map(|k| k.len())
            .max()
            .unwrap_or(0)
            .max("course".len());
        s.push_str(&format!(
            "{:<width$}  {:>10}  {:>14}  {:>6}\n",
            "course", "intervened", "non_intervened", "ratio"
        ));
        for (course, c) in &self.courses {
            s.push_str(&format!(
                "{:<width$}  {:>10}  {:>14}  {:>6}\n",
                course,
                c.intervened,
                c.non_intervened,
                format_ratio(c.intervention_ratio())
            ));
        }
        s
    }
}

pub fn format_ratio(ratio: Option<f64>) -> String {
    match ratio {
        Some(r) => format!("{r:.2}"),
        None => "-".to_string(),
    }
}

pub fn corpus_stats(threads: &[Thread]) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for t in threads {
        let c = stats.courses.entry(t.course_id.clone()).or_default();
        match t.label {
            Label::Intervened => c.intervened += 1,
            Label::NotIntervened => c.non_intervened += 1,
        }
    }
    stats
}

/// Groups threads by course id, sorted by course id.
pub fn by_course(threads: &[Thread]) -> BTreeMap<String, Vec<Thread>> {
    let mut map: BTreeMap<String, Vec<Thread>> = BTreeMap::new();
    for t in threads {
        map.entry(t.course_id.clone()).or_default().push(t.clone());
    }
    map
}

/// Number of threads per course, used as weights for weighted averages.
pub fn course_totals(threads: &[Thread]) -> HashMap<String, usize> {
    corpus_stats(threads)
        .courses
        .into_iter()
        .map(|(k, v)| (k, v.total()))
        .collect()
}
