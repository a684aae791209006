use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_forum-sentinel"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn spec(dir: &Path, courses: usize, threads: usize, ratio: f64) {
    fs::write(
        dir.join("spec.toml"),
        format!(
            "n_courses = {courses}\nthreads_per_course = {threads}\nintervention_ratio = {ratio}\n\
             vocabulary_disjointness = 0.8\ndiscourse_signal_strength = 0.8\nseed = 3\n"
        ),
    )
    .unwrap();
}

fn generated(courses: usize, threads: usize, ratio: f64) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    spec(dir.path(), courses, threads, ratio);
    ok(dir.path(), &["syngen", "--spec", "spec.toml", "--out", "gen"]);
    dir
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().unwrap().is_file())
        .map(|e| {
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn syngen_is_reproducible() {
    let dir = generated(2, 30, 0.4);
    ok(dir.path(), &["syngen", "--spec", "spec.toml", "--out", "again"]);
    assert_eq!(
        fs::read(dir.path().join("gen/corpus.jsonl")).unwrap(),
        fs::read(dir.path().join("again/corpus.jsonl")).unwrap()
    );
}

#[test]
fn ingest_prints_course_counts() {
    let dir = generated(1, 691, 0.31);
    let out = ok(dir.path(), &["ingest", "--corpus", "gen/corpus.jsonl"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(row, ["SYN-01", "164", "527", "0.31"]);
}

#[test]
fn empty_corpus() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    let out = ok(dir.path(), &["ingest", "--corpus", "empty.jsonl"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1);
    let out = ok(dir.path(), &["tag", "--corpus", "empty.jsonl", "--out", "t"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "no connectives tagged\n");
    assert!(fs::read(dir.path().join("t/tags.tsv")).unwrap().is_empty());
}

#[test]
fn jobs_do_not_change_outputs() {
    let dir = generated(3, 50, 0.4);
    let p = dir.path();
    for jobs in ["1", "4"] {
        let out = format!("out{jobs}");
        let common = ["--corpus", "gen/corpus.jsonl", "--jobs", jobs, "--out", &out];
        ok(p, &[&["tag"], &common[..]].concat());
        ok(p, &[&["featurize", "--features", "eplusp"], &common[..]].concat());
        ok(p, &[&["train", "--features", "pdtb"], &common[..]].concat());
        ok(
            p,
            &[&["eval", "--features", "eplusp", "--baseline", "edm15", "--rounds", "300"], &common[..]].concat(),
        );
        ok(
            p,
            &[&["eval", "--regime", "ccv", "--features", "pdtb", "--emit", "csv", "--out", &format!("{out}/ccv")], &common[..4]].concat(),
        );
    }
    let one = read_all(&p.join("out1"));
    let four = read_all(&p.join("out4"));
    assert_eq!(one.len(), four.len());
    for ((n1, b1), (n4, b4)) in one.iter().zip(&four) {
        assert_eq!(n1, n4);
        assert!(b1 == b4, "{n1} differs between --jobs 1 and 4");
    }
    assert_eq!(read_all(&p.join("out1/ccv")), read_all(&p.join("out4/ccv")));
}

#[test]
fn dump_and_corpus_train_the_same_model() {
    let dir = generated(2, 40, 0.5);
    let p = dir.path();
    ok(p, &["featurize", "--corpus", "gen/corpus.jsonl", "--features", "edm15", "--out", "f"]);
    ok(p, &["train", "--dump", "f/features.tsv", "--out", "a"]);
    ok(p, &["train", "--corpus", "gen/corpus.jsonl", "--features", "edm15", "--out", "b"]);
    assert_eq!(
        fs::read(p.join("a/model.txt")).unwrap(),
        fs::read(p.join("b/model.txt")).unwrap()
    );
}

#[test]
fn flags_override_the_config_file() {
    let dir = generated(2, 40, 0.5);
    let p = dir.path();
    fs::write(
        p.join("run.toml"),
        "corpus = \"gen/corpus.jsonl\"\nfeatures = \"edm15\"\nregime = \"ccv\"\nemit = \"records\"\nl2 = 0.5\n",
    )
    .unwrap();
    let out = ok(p, &["eval", "--config", "run.toml", "--features", "pdtb"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"features\": \"pdtb\""));
    assert!(text.contains("\"regime\": \"ccv\""));
    assert!(text.contains("\"l2_lambda\": 0.5"));
}

#[test]
fn tag_output_feeds_back_as_imported_tags() {
    let dir = generated(2, 40, 0.5);
    let p = dir.path();
    ok(p, &["tag", "--corpus", "gen/corpus.jsonl", "--out", "t"]);
    let base = ["eval", "--corpus", "gen/corpus.jsonl", "--features", "pdtb", "--emit", "records"];
    let a = ok(p, &base);
    let b = ok(p, &[&base[..], &["--tags", "t/tags.tsv"]].concat());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn exit_codes() {
    let dir = generated(1, 30, 0.5);
    let p = dir.path();
    fs::write(p.join("bad.jsonl"), "{not json\n").unwrap();
    let code = |args: &[&str]| run(p, args).status.code().unwrap();
    assert_eq!(code(&["ingest", "--corpus", "missing.jsonl"]), 1);
    assert_eq!(code(&["ingest", "--frobnicate"]), 2);
    assert_eq!(code(&["ingest"]), 2);
    assert_eq!(code(&["ingest", "--corpus", "bad.jsonl"]), 3);
    assert_eq!(code(&["eval", "--corpus", "gen/corpus.jsonl", "--features", "nope"]), 3);
    assert_eq!(code(&["eval", "--corpus", "gen/corpus.jsonl", "--k", "1"]), 3);
    assert_eq!(code(&["eval", "--corpus", "gen/corpus.jsonl", "--regime", "ccv"]), 4);
}
