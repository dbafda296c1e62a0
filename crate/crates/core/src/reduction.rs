//! Online objective reduction.
//!
//! Each generation the population's objective matrix is turned into a
//! signed nonlinear-correlation matrix. After a warm-start period the mean of
//! the most recent matrices drives a greedy conflict-first selection of
//! representative objectives; objectives correlated above `tau` with a
//! selected one are dropped.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ReductionError {
    #[error("{got} samples, at least {needed} needed")]
    TooFewSamples { got: usize, needed: usize },
    #[error("correlation history holds {got} matrices, {needed} needed")]
    InsufficientHistory { got: usize, needed: usize },
    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("tau must lie in (0, 1), got {0}")]
    InvalidTau(f64),
    #[error("matrix is not square or has inconsistent rows")]
    NotSquare,
}

pub const MIN_SAMPLES: usize = 4;

/// Average ranks (1-based), ties share the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Quantile bin of a 1-based (possibly fractional) rank.
fn rank_bin(rank: f64, n: usize, bins: usize) -> usize {
    let b = ((rank - 1.0) * bins as f64 / n as f64).floor() as usize;
    b.min(bins - 1)
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|v| *v == x[0])
}

/// Rank-grid nonlinear correlation coefficient in [0, 1] (unsigned).
///
/// Ranks are cut into `b = floor(sqrt(N))` quantile bins; the coefficient is
/// `2 + Σ p_ij log_b p_ij` over the `b x b` grid, clamped to [0, 1].
pub fn nonlinear_correlation(x: &[f64], y: &[f64]) -> Result<f64, ReductionError> {
    check_pair(x, y)?;
    if is_constant(x) || is_constant(y) {
        return Ok(0.0);
    }
    Ok(ncc_from_ranks(&average_ranks(x), &average_ranks(y)))
}

fn ncc_from_ranks(rx: &[f64], ry: &[f64]) -> f64 {
    let n = rx.len();
    let bins = (n as f64).sqrt().floor() as usize;
    let mut grid = vec![0usize; bins * bins];
    for (a, b) in rx.iter().zip(ry) {
        grid[rank_bin(*a, n, bins) * bins + rank_bin(*b, n, bins)] += 1;
    }
    // Summing over sorted counts makes the result exactly symmetric in (x, y).
    grid.sort_unstable();
    let log_b = (bins as f64).ln();
    let plogp: f64 = grid
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            p * p.ln() / log_b
        })
        .sum();
    (2.0 + plogp).clamp(0.0, 1.0)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), ReductionError> {
    if x.len() != y.len() {
        return Err(ReductionError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < MIN_SAMPLES {
        return Err(ReductionError::TooFewSamples {
            got: x.len(),
            needed: MIN_SAMPLES,
        });
    }
    Ok(())
}

/// Nonlinear correlation signed by the Spearman rank correlation.
/// Zero when either vector is constant.
pub fn signed_ncc(x: &[f64], y: &[f64]) -> Result<f64, ReductionError> {
    check_pair(x, y)?;
    if is_constant(x) || is_constant(y) {
        return Ok(0.0);
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let rho = pearson(&rx, &ry);
    let sign = if rho > 0.0 {
        1.0
    } else if rho < 0.0 {
        -1.0
    } else {
        0.0
    };
    Ok(sign * ncc_from_ranks(&rx, &ry))
}

/// Symmetric square matrix with unit diagonal and entries in [-1, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn identity(n: usize) -> CorrelationMatrix {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        CorrelationMatrix { n, entries }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<CorrelationMatrix, ReductionError> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(ReductionError::NotSquare);
        }
        Ok(CorrelationMatrix {
            n,
            entries: rows.concat(),
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.n + j] = v;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.n)
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        (0..self.n).map(|i| self.get(i, j)).sum()
    }

    /// Sum of the strictly negative entries in column `j`.
    pub fn negative_column_sum(&self, j: usize) -> f64 {
        (0..self.n).map(|i| self.get(i, j)).filter(|v| *v < 0.0).sum()
    }

    pub fn column_has_negative(&self, j: usize) -> bool {
        (0..self.n).any(|i| self.get(i, j) < 0.0)
    }
}

/// Pairwise signed NCC of the columns of a `samples x objectives` matrix.
pub fn mncie_matrix(samples: &[Vec<f64>]) -> Result<CorrelationMatrix, ReductionError> {
    if samples.len() < MIN_SAMPLES {
        return Err(ReductionError::TooFewSamples {
            got: samples.len(),
            needed: MIN_SAMPLES,
        });
    }
    let m = samples[0].len();
    if samples.iter().any(|r| r.len() != m) {
        return Err(ReductionError::NotSquare);
    }
    let columns: Vec<Vec<f64>> = (0..m)
        .map(|j| samples.iter().map(|r| r[j]).collect())
        .collect();
    let mut out = CorrelationMatrix::identity(m);
    for i in 0..m {
        for j in i + 1..m {
            let v = signed_ncc(&columns[i], &columns[j])?;
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    Ok(out)
}

/// Per-generation correlation matrices, oldest first.
#[derive(Clone, Debug, Default)]
pub struct CorrelationHistory {
    matrices: VecDeque<CorrelationMatrix>,
    capacity: Option<usize>,
    pushed: usize,
}

impl CorrelationHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// A history that only keeps the most recent `capacity` matrices.
    pub fn bounded(capacity: usize) -> Self {
        CorrelationHistory {
            capacity: Some(capacity.max(1)),
            ..Default::default()
        }
    }

    pub fn push(&mut self, m: CorrelationMatrix) {
        self.matrices.push_back(m);
        self.pushed += 1;
        if let Some(cap) = self.capacity {
            while self.matrices.len() > cap {
                self.matrices.pop_front();
            }
        }
    }

    /// Number of matrices appended so far, including evicted ones.
    pub fn total_pushed(&self) -> usize {
        self.pushed
    }

    pub fn retained(&self) -> usize {
        self.matrices.len()
    }

    pub fn latest(&self) -> Option<&CorrelationMatrix> {
        self.matrices.back()
    }
}

/// Elementwise mean of the last `window` matrices.
pub fn averaged_matrix(
    history: &CorrelationHistory,
    window: usize,
) -> Result<CorrelationMatrix, ReductionError> {
    let window = window.max(1);
    if history.retained() < window {
        return Err(ReductionError::InsufficientHistory {
            got: history.retained(),
            needed: window,
        });
    }
    let recent: Vec<&CorrelationMatrix> = history.matrices.iter().rev().take(window).collect();
    let n = recent[0].size();
    let mut entries = vec![0.0; n * n];
    for m in recent.iter().rev() {
        for (acc, v) in entries.iter_mut().zip(&m.entries) {
            *acc += v;
        }
    }
    entries.iter_mut().for_each(|v| *v /= window as f64);
    Ok(CorrelationMatrix { n, entries })
}

/// Active objective indices at one generation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionMask {
    pub active: BTreeSet<usize>,
    pub generation: usize,
}

impl SelectionMask {
    pub fn full(n: usize, generation: usize) -> SelectionMask {
        SelectionMask {
            active: (0..n).collect(),
            generation,
        }
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.active.contains(&i)
    }

    pub fn indices(&self) -> Vec<usize> {
        self.active.iter().copied().collect()
    }

    pub fn to_binary_row(&self, n: usize) -> Vec<u8> {
        (0..n).map(|i| u8::from(self.contains(i))).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionConfig {
    pub tau: f64,
    /// Generations (zero-based index below this) that use the full set.
    pub warmup: usize,
    /// Number of recent matrices averaged.
    pub window: usize,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            tau: 0.22,
            warmup: 10,
            window: 10,
        }
    }
}

impl ReductionConfig {
    pub fn validate(&self) -> Result<(), ReductionError> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(ReductionError::InvalidTau(self.tau));
        }
        Ok(())
    }
}

/// Greedy conflict-first selection on an averaged correlation matrix.
///
/// While candidates remain: if some candidate column has a negative entry,
/// take the candidate with the most negative sum of negative entries;
/// otherwise take the one with the largest column sum. The pick joins the
/// result and every remaining candidate correlated with it above `tau` is
/// discarded. Ties go to the smallest index.
pub fn select_from_matrix(nc: &CorrelationMatrix, tau: f64) -> BTreeSet<usize> {
    let mut remaining: Vec<usize> = (0..nc.size()).collect();
    let mut selected = BTreeSet::new();
    while !remaining.is_empty() {
        let conflict = remaining.iter().any(|&j| nc.column_has_negative(j));
        let score = |j: usize| {
            if conflict {
                nc.negative_column_sum(j)
            } else {
                -nc.column_sum(j)
            }
        };
        // `remaining` is ascending, so the first minimum is the smallest index.
        let mut pick = remaining[0];
        let mut best = score(pick);
        for &j in &remaining[1..] {
            let s = score(j);
            if s < best {
                best = s;
                pick = j;
            }
        }
        selected.insert(pick);
        remaining.retain(|&j| j != pick && nc.get(pick, j) <= tau);
    }
    selected
}

/// Representative objectives for zero-based generation `t`.
///
/// Generations below `cfg.warmup` use the full set. Later ones average the
/// last `cfg.window` matrices of `history` and run [`select_from_matrix`].
pub fn select_representative(
    t: usize,
    history: &CorrelationHistory,
    n_objectives: usize,
    cfg: &ReductionConfig,
) -> Result<SelectionMask, ReductionError> {
    cfg.validate()?;
    if t < cfg.warmup {
        return Ok(SelectionMask::full(n_objectives, t));
    }
    let nc = averaged_matrix(history, cfg.window)?;
    Ok(SelectionMask {
        active: select_from_matrix(&nc, cfg.tau),
        generation: t,
    })
}
