use rand::seq::SliceRandom;

use super::{Corpus, Split, SplitAssignment};
use crate::error::{Error, Result};
use crate::seed::stream_rng;

pub const DEFAULT_VAL_FRAC: f64 = 0.1;
pub const DEFAULT_TEST_FRAC: f64 = 0.2;

/// Per-user stratified split. Each user's interactions are shuffled; users
/// with a single interaction stay in train, everyone else keeps at least one
/// train interaction and spills `round(n * frac)` rows to test and validation.
pub fn partition(corpus: &Corpus, val_frac: f64, test_frac: f64, seed: u64) -> Result<SplitAssignment> {
    let in_range = |f: f64| f.is_finite() && (0.0..1.0).contains(&f);
    if !in_range(val_frac) || !in_range(test_frac) || val_frac + test_frac >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "split fractions must be in [0, 1) with val + test < 1 (got val={val_frac}, test={test_frac})"
        )));
    }

    let mut rng = stream_rng(seed, 0);
    let mut labels = vec![Split::Train; corpus.interactions().len()];
    for user in 0..corpus.n_users() as u32 {
        let mut rows: Vec<usize> = corpus.user_photos(user).iter().map(|&p| corpus.photo_row(p)).collect();
        let n = rows.len();
        if n < 2 {
            continue;
        }
        rows.shuffle(&mut rng);
        let (n_val, n_test) = spill_counts(n, val_frac, test_frac);
        for &r in &rows[..n_test] {
            labels[r] = Split::Test;
        }
        for &r in &rows[n_test..n_test + n_val] {
            labels[r] = Split::Val;
        }
    }
    SplitAssignment::new(labels, corpus)
}

/// `(n_val, n_test)` for a user with `n >= 2` interactions.
fn spill_counts(n: usize, val_frac: f64, test_frac: f64) -> (usize, usize) {
    let mut n_test = (n as f64 * test_frac).round() as usize;
    let mut n_val = (n as f64 * val_frac).round() as usize;
    while n_test + n_val > n - 1 {
        if n_val > 0 {
            n_val -= 1;
        } else {
            n_test -= 1;
        }
    }
    (n_val, n_test)
}
