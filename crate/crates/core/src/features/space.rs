use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::FeatureError;

/// Which feature blocks a model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureConfig {
    /// Lexical and thread-structure baseline.
    Edm15,
    /// The 25 discourse-sense features only.
    Pdtb,
    /// Union of both blocks.
    EplusP,
}

impl FeatureConfig {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureConfig::Edm15 => "edm15",
            FeatureConfig::Pdtb => "pdtb",
            FeatureConfig::EplusP => "eplusp",
        }
    }

    pub fn uses_lexical(self) -> bool {
        matches!(self, FeatureConfig::Edm15 | FeatureConfig::EplusP)
    }

    pub fn uses_discourse(self) -> bool {
        matches!(self, FeatureConfig::Pdtb | FeatureConfig::EplusP)
    }
}

impl fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "edm15" => Ok(FeatureConfig::Edm15),
            "pdtb" => Ok(FeatureConfig::Pdtb),
            "eplusp" => Ok(FeatureConfig::EplusP),
            other => Err(format!("unknown feature config {other:?} (edm15|pdtb|eplusp)")),
        }
    }
}

/// Ordered, fixed set of feature names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpace {
    names: Vec<String>,
    index: HashMap<String, usize>,
    /// e.g. `"eplusp"`; part of the hash.
    tag: String,
    hash: String,
}

impl FeatureSpace {
    pub fn new(tag: impl Into<String>, names: Vec<String>) -> Result<Self, FeatureError> {
        let tag = tag.into();
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(FeatureError::DuplicateName(n.clone()));
            }
        }
        let mut h = Sha256::new();
        h.update(tag.as_bytes());
        for n in &names {
            h.update([0u8]);
            h.update(n.as_bytes());
        }
        let digest = h.finalize();
        let hash = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self {
            names,
            index,
            tag,
            hash,
        })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    /// Short digest of the tag and the ordered names.
    pub fn hash(&self) -> &str {
        &self.hash
    }
}

/// Sparse feature values over a [`FeatureSpace`]. Zeros are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    space: Arc<FeatureSpace>,
    entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    /// `entries` may be unsorted; duplicates are summed.
    pub fn from_indexed(
        space: Arc<FeatureSpace>,
        mut entries: Vec<(usize, f64)>,
    ) -> Result<Self, FeatureError> {
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            if i >= space.dim() {
                return Err(FeatureError::UnknownFeature(format!("#{i}")));
            }
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => merged.push((i, v)),
            }
        }
        if let Some(&(i, _)) = merged.iter().find(|(_, v)| !v.is_finite()) {
            return Err(FeatureError::NonFinite(space.name(i).to_string()));
        }
        merged.retain(|(_, v)| *v != 0.0);
        Ok(Self {
            space,
            entries: merged,
        })
    }

    pub fn from_named<'a>(
        space: Arc<FeatureSpace>,
        values: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Self, FeatureError> {
        let entries = values
            .into_iter()
            .map(|(n, v)| {
                space
                    .index_of(n)
                    .map(|i| (i, v))
                    .ok_or_else(|| FeatureError::UnknownFeature(n.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_indexed(space, entries)
    }

    pub fn space(&self) -> &Arc<FeatureSpace> {
        &self.space
    }

    /// Nonzero `(index, value)` pairs in index order.
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> f64 {
        self.space
            .index_of(name)
            .and_then(|i| self.get_index(i))
            .unwrap_or(0.0)
    }

    fn get_index(&self, i: usize) -> Option<f64> {
        self.entries
            .binary_search_by_key(&i, |e| e.0)
            .ok()
            .map(|k| self.entries[k].1)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.space.dim()];
        for &(i, v) in &self.entries {
            d[i] = v;
        }
        d
    }

    pub fn iter_named(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|&(i, v)| (self.space.name(i), v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> Arc<FeatureSpace> {
        Arc::new(FeatureSpace::new("t", vec!["a".into(), "b".into(), "c".into()]).unwrap())
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(FeatureSpace::new("t", vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn sparse_vector_basics() {
        let v = FeatureVector::from_named(space(), [("c", 2.0), ("a", 1.0), ("b", 0.0)]).unwrap();
        assert_eq!(v.entries(), &[(0, 1.0), (2, 2.0)]);
        assert_eq!(v.get("b"), 0.0);
        assert_eq!(v.to_dense(), vec![1.0, 0.0, 2.0]);
        assert!(FeatureVector::from_named(space(), [("zz", 1.0)]).is_err());
        assert!(FeatureVector::from_named(space(), [("a", f64::NAN)]).is_err());
    }

    #[test]
    fn hash_depends_on_order_and_tag() {
        let a = FeatureSpace::new("t", vec!["a".into(), "b".into()]).unwrap();
        let b = FeatureSpace::new("t", vec!["b".into(), "a".into()]).unwrap();
        let c = FeatureSpace::new("u", vec!["a".into(), "b".into()]).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
