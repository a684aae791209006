use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EvalError;

pub const DEFAULT_ROUNDS: usize = 10_000;

/// Two-sided paired approximate-randomization test on per-item scores.
///
/// The statistic is `|sum(a) - sum(b)|`. Each round swaps every pair with
/// probability one half; the p-value is `(hits + 1) / (rounds + 1)`.
pub fn approximate_randomization(
    a: &[f64],
    b: &[f64],
    rounds: usize,
    seed: u64,
) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let observed = diffs.iter().sum::<f64>().abs();
    // guard against summation-order noise when comparing with the observed value
    let eps = 1e-9 * (1.0 + diffs.iter().map(|d| d.abs()).sum::<f64>());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..rounds {
        let s: f64 = diffs
            .iter()
            .map(|&d| if rng.random::<bool>() { -d } else { d })
            .sum();
        if s.abs() + eps >= observed {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (rounds + 1) as f64)
}

/// `**` below 0.01, `*` below 0.05, otherwise empty.
pub fn significance_marker(p: f64) -> &'static str {
    if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}
