//! Seeded train/validation/test splits and k-fold partitions.

use rand::seq::SliceRandom;

use super::DataError;
use crate::rng;

/// The 6:2:2 ratio used for train/validation/test.
pub const DEFAULT_RATIOS: [f64; 3] = [0.6, 0.2, 0.2];

/// Row indices of one cross-validation fold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub holdout: Vec<usize>,
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, 0));
    idx
}

/// Uniform random three-way split of `0..n`.
///
/// The first two parts get `floor(ratio * n)` rows, the last part gets the
/// remainder.
pub fn split(
    n: usize,
    ratios: [f64; 3],
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>), DataError> {
    if n < 10 {
        return Err(DataError::TooFewRows { rows: n, needed: 10 });
    }
    split_indices(&(0..n).collect::<Vec<_>>(), ratios, seed)
}

/// Three-way split of an arbitrary index set, same size rule as [`split`].
pub fn split_indices(
    indices: &[usize],
    ratios: [f64; 3],
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>), DataError> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) || ratios.iter().sum::<f64>() > 1.0 + 1e-9
    {
        return Err(DataError::InvalidRatios(ratios.to_vec()));
    }
    let n = indices.len();
    let perm = permutation(n, seed);
    // The epsilon keeps 0.6 * 10 from flooring to 5.
    let n_first = ((ratios[0] * n as f64) + 1e-9).floor() as usize;
    let n_second = ((ratios[1] * n as f64) + 1e-9).floor() as usize;
    let n_second = n_second.min(n - n_first);

    let pick = |range: std::ops::Range<usize>| {
        let mut v: Vec<usize> = perm[range].iter().map(|&p| indices[p]).collect();
        v.sort_unstable();
        v
    };
    Ok((
        pick(0..n_first),
        pick(n_first..n_first + n_second),
        pick(n_first + n_second..n),
    ))
}

/// `k` folds whose holdouts partition `0..n`, sizes differing by at most one.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>, DataError> {
    if k < 2 {
        return Err(DataError::InvalidFoldCount(k));
    }
    if n < k {
        return Err(DataError::TooFewRows { rows: n, needed: k });
    }
    let perm = permutation(n, seed);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        let mut holdout = perm[start..start + len].to_vec();
        holdout.sort_unstable();
        let mut train: Vec<usize> = perm[..start]
            .iter()
            .chain(&perm[start + len..])
            .copied()
            .collect();
        train.sort_unstable();
        folds.push(Fold { train, holdout });
        start += len;
    }
    Ok(folds)
}
