use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::{TimeZone, Utc};
use proptest::prelude::*;

use forum_sentinel::corpus::{filter_and_label, AuthorRole, Label, Post, SubForumType, Thread};
use forum_sentinel::discourse::{tag_post, ConnectiveLexicon, PostDiscourse, SenseTag};
use forum_sentinel::eval::stratified_kfold;
use forum_sentinel::features::{pdtb_values, FeatureSpace};
use forum_sentinel::model::{Dataset, Objective};
use forum_sentinel::textprep::{
    content_filter, is_placeholder, preprocess, replace_nonlexical, Stopwords,
};

const WORDS: &[&str] = &[
    "if", "but", "then", "and", "so", "as", "soon", "well", "in", "fact", "for", "example",
    "addition", "when", "now", "or", "because", "the", "chord", "minor", "scale", "I", "We",
    "But", "If", "Now", ",", ".", "?", "!!", "3:15", "http://x.y/z", "$a+b$", "on", "other",
    "hand", "contrast", "so", "that", "even", "though",
];

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS), 0..40).prop_map(|w| w.join(" "))
}

fn role() -> impl Strategy<Value = AuthorRole> {
    prop_oneof![
        3 => Just(AuthorRole::Student),
        1 => Just(AuthorRole::Instructor),
        1 => Just(AuthorRole::TeachingAssistant),
    ]
}

fn raw_thread() -> impl Strategy<Value = Thread> {
    (
        0usize..3,
        0usize..1000,
        prop::sample::select(SubForumType::ALL.to_vec()),
        prop::collection::vec((role(), any::<bool>()), 1..6),
    )
        .prop_map(|(course, id, subforum, posts)| {
            let t0 = Utc.with_ymd_and_hms(2016, 3, 1, 0, 0, 0).unwrap();
            let posts = posts
                .into_iter()
                .enumerate()
                .map(|(i, (role, comment))| Post {
                    post_id: format!("p{i}"),
                    author_id: format!("a{i}"),
                    role,
                    timestamp: t0 + chrono::Duration::minutes(i as i64),
                    text: "words".into(),
                    parent_post_id: (comment && i > 0).then(|| "p0".to_string()),
                })
                .collect();
            Thread {
                course_id: format!("C{course}"),
                thread_id: format!("t{id}"),
                subforum,
                posts,
                label: Label::NotIntervened,
            }
        })
}

fn sense() -> impl Strategy<Value = SenseTag> {
    prop::sample::select(SenseTag::ALL.to_vec())
}

fn tagging() -> impl Strategy<Value = Vec<PostDiscourse>> {
    prop::collection::vec(prop::collection::vec(sense(), 0..6), 0..5).prop_map(|posts| {
        posts
            .into_iter()
            .map(|senses| PostDiscourse {
                connectives: senses
                    .into_iter()
                    .enumerate()
                    .map(|(i, s)| forum_sentinel::discourse::TaggedConnective {
                        token_span: i..i + 1,
                        surface: "x".into(),
                        sense: s,
                    })
                    .collect(),
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn filtering_is_idempotent(raw in prop::collection::vec(raw_thread(), 0..12)) {
        let once = filter_and_label(raw);
        let twice = filter_and_label(once.clone());
        prop_assert_eq!(&once, &twice);
        for t in &once {
            prop_assert!(t.satisfies_truncation_invariant());
            prop_assert!(t.subforum.is_kept());
        }
    }

    #[test]
    fn sentences_partition_tokens(s in text()) {
        let p = preprocess(&s);
        let mut next = 0;
        for r in &p.sentences {
            prop_assert_eq!(r.start, next);
            prop_assert!(r.end > r.start);
            next = r.end;
        }
        prop_assert_eq!(next, p.tokens.len());
        prop_assert_eq!(p.sentences.is_empty(), p.tokens.is_empty());
    }

    #[test]
    fn preprocessing_is_pure(s in text()) {
        prop_assert_eq!(preprocess(&s), preprocess(&s));
        prop_assert_eq!(replace_nonlexical(&s), replace_nonlexical(&s));
    }

    #[test]
    fn content_filter_keeps_placeholders(s in text()) {
        let p = preprocess(&s);
        let kept = content_filter(&p.tokens, Stopwords::english());
        prop_assert!(kept.len() <= p.tokens.len());
        let placeholders = p.tokens.iter().filter(|t| is_placeholder(t)).count();
        prop_assert_eq!(kept.iter().filter(|t| is_placeholder(t)).count(), placeholders);
    }

    #[test]
    fn tagger_spans_are_well_formed(s in text()) {
        let p = preprocess(&s);
        let d = tag_post(&p, ConnectiveLexicon::english());
        prop_assert!(d.spans_well_formed());
        for c in &d.connectives {
            prop_assert!(c.token_span.end <= p.tokens.len());
            prop_assert_eq!(p.tokens[c.token_span.clone()].join(" "), c.surface.clone());
        }
        prop_assert_eq!(&d, &tag_post(&p, ConnectiveLexicon::english()));
    }

    #[test]
    fn removing_an_entry_only_frees_its_own_spans(s in text(), pick in any::<prop::sample::Index>()) {
        let lex = ConnectiveLexicon::english();
        let p = preprocess(&s);
        let before = tag_post(&p, lex);
        let removed = &lex.entries()[pick.index(lex.len())].surface;
        let after = tag_post(&p, &lex.without(removed));
        let gone: Vec<_> = before.connectives.iter().filter(|c| !after.connectives.contains(c)).collect();
        for c in &after.connectives {
            prop_assert!(&c.surface != removed);
            if before.connectives.contains(c) {
                continue;
            }
            // a new tag must sit where a vanished tag used to block it
            let overlaps = gone.iter().any(|g| {
                g.token_span.start < c.token_span.end && c.token_span.start < g.token_span.end
            });
            prop_assert!(overlaps, "new tag {:?} outside vanished spans {:?}", c, gone);
        }
    }

    #[test]
    fn pdtb_sums(t in tagging(), extra in 0usize..50) {
        let total: usize = t.iter().map(|p| p.len()).sum();
        let pairs: usize = t.iter().map(|p| p.len().saturating_sub(1)).sum();
        let len = total + extra + 1;
        let v = pdtb_values(&t, len).unwrap();
        prop_assert_eq!(v[0], total as f64);
        let rel: f64 = (0..4).map(|s| v[2 + 2 * s]).sum();
        let abs: f64 = (0..4).map(|s| v[1 + 2 * s]).sum();
        let pair_sum: f64 = v[9..].iter().sum();
        if total > 0 {
            prop_assert!((rel - 1.0).abs() <= 1e-12);
            prop_assert!((abs - total as f64 / len as f64).abs() <= 1e-12);
        } else {
            prop_assert!(v.iter().all(|x| *x == 0.0));
        }
        if pairs > 0 {
            prop_assert!((pair_sum - 1.0).abs() <= 1e-12);
        } else {
            prop_assert_eq!(pair_sum, 0.0);
        }
    }

    #[test]
    fn folds_partition(n_pos in 0usize..30, n_neg in 0usize..60, k in 2usize..8, seed in any::<u64>()) {
        let items: Vec<(usize, bool)> = (0..n_pos + n_neg).map(|i| (i * 7919 % 1009, i < n_pos)).collect();
        let f = stratified_kfold(&items, k, seed).unwrap();
        prop_assert_eq!(f.folds.len(), k);
        let mut all: Vec<usize> = f.folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..items.len()).collect::<Vec<_>>());
        let pos: Vec<usize> = f.folds.iter().map(|fo| fo.iter().filter(|&&i| items[i].1).count()).collect();
        let neg: Vec<usize> = f.folds.iter().zip(&pos).map(|(fo, p)| fo.len() - p).collect();
        prop_assert!(pos.iter().max().unwrap() - pos.iter().min().unwrap() <= 1);
        prop_assert!(neg.iter().max().unwrap() - neg.iter().min().unwrap() <= 1);
        prop_assert_eq!(f.degenerate, n_pos < k);
    }

    #[test]
    fn loss_is_convex(
        rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 2..20),
        a in prop::collection::vec(-4.0f64..4.0, 5),
        b in prop::collection::vec(-4.0f64..4.0, 5),
        pos_weight in 0.1f64..30.0,
    ) {
        let space = Arc::new(FeatureSpace::new("p", (0..4).map(|i| format!("x{i}")).collect()).unwrap());
        let labels: Vec<bool> = (0..rows.len()).map(|i| i % 2 == 0).collect();
        let sparse = rows.iter().map(|r| r.iter().copied().enumerate().collect()).collect();
        let data = Dataset::from_rows(space, sparse, labels).unwrap();
        let obj = Objective::new(&data, pos_weight, 1e-3);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x + y) / 2.0).collect();
        prop_assert!(obj.loss(&mid) <= (obj.loss(&a) + obj.loss(&b)) / 2.0 + 1e-9);
    }
}

proptest! {
    #[test]
    fn intervened_counts_match_labels(raw in prop::collection::vec(raw_thread(), 0..40)) {
        let out = filter_and_label(raw);
        let stats = forum_sentinel::corpus::corpus_stats(&out);
        let labeled = out.iter().filter(|t| t.label.is_positive()).count();
        prop_assert_eq!(stats.total_intervened(), labeled);
        let courses: BTreeSet<&str> = out.iter().map(|t| t.course_id.as_str()).collect();
        prop_assert_eq!(stats.courses.len(), courses.len());
    }
}
