//! The 25 discourse-sense features.
//!
//! Layout, in order:
//! 1. `pdtb:total_senses`
//! 2. for each sense in ordinal order: `pdtb:abs_<sense>`, `pdtb:rel_<sense>`
//! 3. for each ordered sense pair: `pdtb:pair_<first>_<second>`

use std::sync::{Arc, OnceLock};

use super::{FeatureError, FeatureSpace, FeatureVector};
use crate::discourse::{PostDiscourse, SenseTag};

pub const PDTB_DIM: usize = 25;

fn lower(s: SenseTag) -> String {
    s.as_str().to_lowercase()
}

pub fn pdtb_feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(PDTB_DIM);
    names.push("pdtb:total_senses".to_string());
    for s in SenseTag::ALL {
        names.push(format!("pdtb:abs_{}", lower(s)));
        names.push(format!("pdtb:rel_{}", lower(s)));
    }
    for a in SenseTag::ALL {
        for b in SenseTag::ALL {
            names.push(format!("pdtb:pair_{}_{}", lower(a), lower(b)));
        }
    }
    names
}

pub fn pdtb_space() -> Arc<FeatureSpace> {
    static S: OnceLock<Arc<FeatureSpace>> = OnceLock::new();
    S.get_or_init(|| Arc::new(FeatureSpace::new("pdtb", pdtb_feature_names()).unwrap()))
        .clone()
}

/// Dense values in the documented layout.
pub fn pdtb_values(
    tagging: &[PostDiscourse],
    thread_length: usize,
) -> Result<[f64; PDTB_DIM], FeatureError> {
    let mut counts = [0usize; 4];
    let mut pairs = [[0usize; 4]; 4];
    let mut n_pairs = 0usize;
    for post in tagging {
        let senses: Vec<SenseTag> = post.senses().collect();
        for s in &senses {
            counts[s.index()] += 1;
        }
        // adjacent pairs inside one post only
        for w in senses.windows(2) {
            pairs[w[0].index()][w[1].index()] += 1;
            n_pairs += 1;
        }
    }
    let total: usize = counts.iter().sum();
    if thread_length == 0 && total > 0 {
        return Err(FeatureError::InconsistentLength { tags: total });
    }
    let mut out = [0.0; PDTB_DIM];
    out[0] = total as f64;
    for s in SenseTag::ALL {
        let c = counts[s.index()] as f64;
        if thread_length > 0 {
            out[1 + 2 * s.index()] = c / thread_length as f64;
        }
        if total > 0 {
            out[2 + 2 * s.index()] = c / total as f64;
        }
    }
    if n_pairs > 0 {
        for a in 0..4 {
            for b in 0..4 {
                out[9 + 4 * a + b] = pairs[a][b] as f64 / n_pairs as f64;
            }
        }
    }
    Ok(out)
}

/// Discourse features of a thread; `thread_length` normalizes the absolute frequencies.
pub fn pdtb_features(
    tagging: &[PostDiscourse],
    thread_length: usize,
) -> Result<FeatureVector, FeatureError> {
    let values = pdtb_values(tagging, thread_length)?;
    FeatureVector::from_indexed(pdtb_space(), values.into_iter().enumerate().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discourse::TaggedConnective;
    use SenseTag::*;

    fn post(senses: &[SenseTag]) -> PostDiscourse {
        PostDiscourse {
            connectives: senses
                .iter()
                .enumerate()
                .map(|(i, s)| TaggedConnective {
                    token_span: i..i + 1,
                    surface: "x".into(),
                    sense: *s,
                })
                .collect(),
        }
    }

    #[test]
    fn layout() {
        let names = pdtb_feature_names();
        assert_eq!(names.len(), 25);
        assert_eq!(names[0], "pdtb:total_senses");
        assert_eq!(names[1], "pdtb:abs_temporal");
        assert_eq!(names[8], "pdtb:rel_expansion");
        assert_eq!(names[9], "pdtb:pair_temporal_temporal");
        assert_eq!(names[24], "pdtb:pair_expansion_expansion");
    }

    #[test]
    fn single_post_sequence() {
        let v = pdtb_features(&[post(&[Expansion, Contingency, Expansion])], 100).unwrap();
        assert_eq!(v.space().dim(), 25);
        assert_eq!(v.get("pdtb:total_senses"), 3.0);
        assert_eq!(v.get("pdtb:abs_expansion"), 0.02);
        assert_eq!(v.get("pdtb:rel_expansion"), 2.0 / 3.0);
        assert_eq!(v.get("pdtb:abs_contingency"), 0.01);
        assert_eq!(v.get("pdtb:rel_contingency"), 1.0 / 3.0);
        assert_eq!(v.get("pdtb:pair_expansion_contingency"), 0.5);
        assert_eq!(v.get("pdtb:pair_contingency_expansion"), 0.5);
        assert_eq!(v.entries().len(), 7);
    }

    #[test]
    fn no_connectives_is_all_zero() {
        let v = pdtb_values(&[post(&[]), post(&[])], 40).unwrap();
        assert!(v.iter().all(|x| *x == 0.0));
        assert!(pdtb_values(&[], 0).unwrap().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn pairs_do_not_cross_posts() {
        let v = pdtb_features(&[post(&[Temporal]), post(&[Comparison])], 10).unwrap();
        assert_eq!(v.get("pdtb:total_senses"), 2.0);
        assert_eq!(v.get("pdtb:rel_temporal"), 0.5);
        assert_eq!(v.get("pdtb:rel_comparison"), 0.5);
        let dense = v.to_dense();
        assert!(dense[9..].iter().all(|x| *x == 0.0));
    }

    #[test]
    fn zero_length_with_tags_is_an_error() {
        assert!(matches!(
            pdtb_values(&[post(&[Temporal])], 0),
            Err(FeatureError::InconsistentLength { tags: 1 })
        ));
    }
}
