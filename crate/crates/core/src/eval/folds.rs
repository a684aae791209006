use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Folds {
    /// Indices into the input slice, ascending within each fold.
    pub folds: Vec<Vec<usize>>,
    /// Fewer positives than folds, so some folds have none.
    pub degenerate: bool,
}

impl Folds {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Indices outside fold `i`, ascending.
    pub fn training_indices(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// Splits `items` (key, is_positive) into `k` class-stratified folds.
///
/// Items are ordered by key before shuffling, so the folds depend only on the
/// set of keys and the seed. Keys are expected to be unique.
pub fn stratified_kfold<K: Ord>(items: &[(K, bool)], k: usize, seed: u64) -> Result<Folds, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidK(k));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| items[a].0.cmp(&items[b].0));
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = order.into_iter().partition(|&i| items[i].1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let mut folds = vec![Vec::new(); k];
    let n_pos = pos.len();
    for (j, i) in pos.into_iter().enumerate() {
        folds[j % k].push(i);
    }
    // negatives continue where the positives stopped so fold sizes stay balanced
    for (j, i) in neg.into_iter().enumerate() {
        folds[(n_pos + j) % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    let degenerate = n_pos < k;
    if degenerate {
        log::warn!("{n_pos} positives for {k} folds: some folds have no positive example");
    }
    Ok(Folds { folds, degenerate })
}
