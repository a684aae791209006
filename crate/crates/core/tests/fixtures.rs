use forum_sentinel::textprep::{preprocess, replace_nonlexical};

fn rows(src: &str) -> impl Iterator<Item = Vec<&str>> {
    src.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').collect())
}

#[test]
fn nonlexical_replacements() {
    let src = include_str!("../data/nonlexical_patterns.tsv");
    let mut n = 0;
    for r in rows(src) {
        let [kind, input, expected] = r[..] else {
            panic!("bad fixture row {r:?}");
        };
        assert_eq!(replace_nonlexical(input).text, expected, "{kind}: {input:?}");
        n += 1;
    }
    assert!(n >= 15);
}

#[test]
fn sentence_counts() {
    let src = include_str!("../data/sentence_split.tsv");
    let mut n = 0;
    for r in rows(src) {
        let [input, count] = r[..] else {
            panic!("bad fixture row {r:?}");
        };
        let count: usize = count.parse().unwrap();
        assert_eq!(preprocess(input).sentences.len(), count, "{input:?}");
        n += 1;
    }
    assert!(n >= 9);
}
