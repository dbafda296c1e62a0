//! Quality indicators for sets of minimized objective vectors: GD, SP, PD
//! and hypervolume, plus nondominated filtering and normalization.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

pub type Point = Vec<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum IndicatorError {
    #[error("point set is empty")]
    EmptySet,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{got} points, at least {needed} needed")]
    TooFewPoints { got: usize, needed: usize },
    #[error("{got} points, exhaustive evaluation supports at most {max}")]
    TooManyPoints { got: usize, max: usize },
    #[error("exact hypervolume supports at most 3 objectives, got {0}")]
    DimensionTooHigh(usize),
    #[error("non-finite objective value")]
    NonFinite,
    #[error("n_samples must be positive")]
    NoSamples,
}

/// `a` Pareto-dominates `b` (minimization).
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

/// Same as [`dominates`] restricted to the coordinates in `idx`.
pub fn dominates_on(a: &[f64], b: &[f64], idx: &[usize]) -> bool {
    let mut strict = false;
    for &k in idx {
        if a[k] > b[k] {
            return false;
        }
        if a[k] < b[k] {
            strict = true;
        }
    }
    strict
}

fn check_dims(points: &[Point]) -> Result<usize, IndicatorError> {
    let m = points.first().ok_or(IndicatorError::EmptySet)?.len();
    for p in points {
        if p.len() != m {
            return Err(IndicatorError::DimensionMismatch {
                expected: m,
                got: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(IndicatorError::NonFinite);
        }
    }
    Ok(m)
}

/// Nondominated subset in input order; exact duplicates keep their first copy.
pub fn nondominated_filter(points: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if out.iter().any(|q| q == p) {
            continue;
        }
        let dominated = points
            .iter()
            .enumerate()
            .any(|(j, q)| j != i && dominates(q, p));
        if !dominated {
            out.push(p.clone());
        }
    }
    out
}

/// Nondominated set of the union of several point sets.
pub fn build_pseudo_front(pooled: &[Vec<Point>]) -> Result<Vec<Point>, IndicatorError> {
    let all: Vec<Point> = pooled.iter().flatten().cloned().collect();
    check_dims(&all)?;
    Ok(nondominated_filter(&all))
}

/// Per-objective min/max used to map objectives onto [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl NormalizationBounds {
    pub fn from_points(points: &[Point]) -> Result<NormalizationBounds, IndicatorError> {
        let m = check_dims(points)?;
        let mut lower = vec![f64::INFINITY; m];
        let mut upper = vec![f64::NEG_INFINITY; m];
        for p in points {
            for k in 0..m {
                lower[k] = lower[k].min(p[k]);
                upper[k] = upper[k].max(p[k]);
            }
        }
        Ok(NormalizationBounds { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// `(x - lower) / (upper - lower)`; degenerate axes map to 0.
    pub fn normalize(&self, p: &[f64]) -> Point {
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&x, (&lo, &hi))| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }

    pub fn normalize_all(&self, points: &[Point]) -> Vec<Point> {
        points.iter().map(|p| self.normalize(p)).collect()
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Generational distance: mean Euclidean distance to the nearest reference point.
pub fn gd(set: &[Point], reference: &[Point]) -> Result<f64, IndicatorError> {
    let m = check_dims(set)?;
    let mr = check_dims(reference)?;
    if m != mr {
        return Err(IndicatorError::DimensionMismatch { expected: m, got: mr });
    }
    let total: f64 = set
        .iter()
        .map(|p| {
            reference
                .iter()
                .map(|r| euclidean(p, r))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / set.len() as f64)
}

/// Schott's spacing with L1 nearest-neighbour distances.
pub fn spacing(set: &[Point]) -> Result<f64, IndicatorError> {
    if set.len() < 2 {
        return Err(IndicatorError::TooFewPoints {
            got: set.len(),
            needed: 2,
        });
    }
    check_dims(set)?;
    let d: Vec<f64> = (0..set.len())
        .map(|i| {
            (0..set.len())
                .filter(|&j| j != i)
                .map(|j| manhattan(&set[i], &set[j]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let ss: f64 = d.iter().map(|v| (mean - v) * (mean - v)).sum();
    Ok((ss / (d.len() - 1) as f64).sqrt())
}

/// `(Σ |a_k - b_k|^0.1)^10`.
pub fn l01_dissimilarity(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs().powf(0.1))
        .sum::<f64>()
        .powi(10)
}

/// Pure diversity, evaluated greedily: repeatedly remove the point farthest
/// (in L0.1 dissimilarity) from the rest of the set and accumulate that
/// distance. Ties remove the earliest point.
pub fn pure_diversity(set: &[Point]) -> Result<f64, IndicatorError> {
    if set.len() < 2 {
        return Ok(0.0);
    }
    check_dims(set)?;
    let n = set.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = l01_dissimilarity(&set[i], &set[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut alive: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    while alive.len() > 1 {
        let nn = |i: usize| {
            alive
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| dist[i * n + j])
                .fold(f64::INFINITY, f64::min)
        };
        let (pos, d) = alive
            .iter()
            .enumerate()
            .map(|(pos, &i)| (pos, nn(i)))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        total += d;
        alive.remove(pos);
    }
    Ok(total)
}

/// Largest PD value of the recursive definition, by exhaustive search over
/// subsets. Exponential; only for small sets.
pub fn pure_diversity_exact(set: &[Point]) -> Result<f64, IndicatorError> {
    const MAX_POINTS: usize = 20;
    if set.len() < 2 {
        return Ok(0.0);
    }
    check_dims(set)?;
    if set.len() > MAX_POINTS {
        return Err(IndicatorError::TooManyPoints {
            got: set.len(),
            max: MAX_POINTS,
        });
    }
    let n = set.len();
    let mut memo = vec![f64::NAN; 1 << n];
    fn go(mask: usize, set: &[Point], memo: &mut [f64]) -> f64 {
        if mask.count_ones() < 2 {
            return 0.0;
        }
        if !memo[mask].is_nan() {
            return memo[mask];
        }
        let mut best = f64::NEG_INFINITY;
        for s in (0..set.len()).filter(|s| mask >> s & 1 == 1) {
            let rest = mask & !(1 << s);
            let d = (0..set.len())
                .filter(|j| rest >> j & 1 == 1)
                .map(|j| l01_dissimilarity(&set[s], &set[j]))
                .fold(f64::INFINITY, f64::min);
            best = best.max(go(rest, set, memo) + d);
        }
        memo[mask] = best;
        best
    }
    Ok(go((1 << n) - 1, set, &mut memo))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HvSampler {
    /// Sample the union of dominated boxes (Karp-Luby). Accurate in high
    /// dimension, where the dominated region is a tiny fraction of the
    /// reference box.
    #[default]
    Union,
    /// Uniform sampling of the whole reference box.
    Box,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HvConfig {
    pub reference: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub sampler: HvSampler,
}

impl Default for HvConfig {
    fn default() -> Self {
        HvConfig {
            reference: 1.2,
            n_samples: 100_000,
            seed: 0,
            sampler: HvSampler::Union,
        }
    }
}

const HV_SHARDS: u64 = 16;

/// Normalize by `bounds`, clamp into `[0, reference]`, keep the nondominated
/// points that still dominate some volume.
fn hv_prepare(set: &[Point], bounds: &NormalizationBounds, reference: f64) -> Result<Vec<Point>, IndicatorError> {
    let m = check_dims(set)?;
    if m != bounds.dim() {
        return Err(IndicatorError::DimensionMismatch {
            expected: bounds.dim(),
            got: m,
        });
    }
    let pts: Vec<Point> = set
        .iter()
        .map(|p| {
            bounds
                .normalize(p)
                .into_iter()
                .map(|v| v.clamp(0.0, reference))
                .collect::<Point>()
        })
        .filter(|p: &Point| p.iter().all(|&v| v < reference))
        .collect();
    Ok(nondominated_filter(&pts))
}

/// Monte-Carlo hypervolume of the normalized set w.r.t. `(r, ..., r)`.
/// Deterministic for a given seed: samples are split into fixed shards, each
/// with its own stream, and combined in shard order.
pub fn hypervolume_mc(set: &[Point], bounds: &NormalizationBounds, cfg: &HvConfig) -> Result<f64, IndicatorError> {
    if cfg.n_samples == 0 {
        return Err(IndicatorError::NoSamples);
    }
    let r = cfg.reference;
    let pts = hv_prepare(set, bounds, r)?;
    if pts.is_empty() {
        return Ok(0.0);
    }
    let m = bounds.dim();
    let shard_sizes: Vec<usize> = (0..HV_SHARDS as usize)
        .map(|s| cfg.n_samples / HV_SHARDS as usize + usize::from(s < cfg.n_samples % HV_SHARDS as usize))
        .collect();
    match cfg.sampler {
        HvSampler::Box => {
            let hits: Vec<usize> = shard_sizes
                .par_iter()
                .enumerate()
                .map(|(s, &k)| {
                    let mut g = rng::stream(cfg.seed, s as u64);
                    let mut x = vec![0.0; m];
                    (0..k)
                        .filter(|_| {
                            x.iter_mut().for_each(|v| *v = g.random::<f64>() * r);
                            pts.iter().any(|p| p.iter().zip(&x).all(|(a, b)| a <= b))
                        })
                        .count()
                })
                .collect();
            let hits: usize = hits.iter().sum();
            Ok(r.powi(m as i32) * hits as f64 / cfg.n_samples as f64)
        }
        HvSampler::Union => {
            let volumes: Vec<f64> = pts
                .iter()
                .map(|p| p.iter().map(|v| r - v).product())
                .collect();
            let total: f64 = volumes.iter().sum();
            let mut cumulative = Vec::with_capacity(volumes.len());
            let mut acc = 0.0;
            for v in &volumes {
                acc += v / total;
                cumulative.push(acc);
            }
            let sums: Vec<f64> = shard_sizes
                .par_iter()
                .enumerate()
                .map(|(s, &k)| {
                    let mut g = rng::stream(cfg.seed, s as u64);
                    let mut x = vec![0.0; m];
                    let mut sum = 0.0;
                    for _ in 0..k {
                        let u: f64 = g.random();
                        let i = cumulative.partition_point(|&c| c < u).min(pts.len() - 1);
                        for (xk, pk) in x.iter_mut().zip(&pts[i]) {
                            *xk = pk + g.random::<f64>() * (r - pk);
                        }
                        let cover = pts
                            .iter()
                            .filter(|p| p.iter().zip(&x).all(|(a, b)| a <= b))
                            .count();
                        sum += 1.0 / cover as f64;
                    }
                    sum
                })
                .collect();
            Ok(total * sums.iter().sum::<f64>() / cfg.n_samples as f64)
        }
    }
}

/// Exact hypervolume for m <= 3 of points already in normalized space,
/// w.r.t. `(r, ..., r)`.
pub fn hypervolume_exact_smallm(set: &[Point], reference: f64) -> Result<f64, IndicatorError> {
    let m = check_dims(set)?;
    if m > 3 {
        return Err(IndicatorError::DimensionTooHigh(m));
    }
    let pts: Vec<Point> = nondominated_filter(
        &set.iter()
            .filter(|p| p.iter().all(|&v| v < reference))
            .cloned()
            .collect::<Vec<_>>(),
    );
    if pts.is_empty() {
        return Ok(0.0);
    }
    Ok(match m {
        1 => reference - pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        2 => hv2(pts.iter().map(|p| (p[0], p[1])).collect(), reference),
        _ => {
            let mut zs: Vec<f64> = pts.iter().map(|p| p[2]).collect();
            zs.sort_by(f64::total_cmp);
            zs.dedup();
            zs.push(reference);
            zs.windows(2)
                .map(|w| {
                    let slab: Vec<(f64, f64)> = pts
                        .iter()
                        .filter(|p| p[2] <= w[0])
                        .map(|p| (p[0], p[1]))
                        .collect();
                    hv2(slab, reference) * (w[1] - w[0])
                })
                .sum()
        }
    })
}

fn hv2(mut pts: Vec<(f64, f64)>, r: f64) -> f64 {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut area = 0.0;
    let mut best_y = r;
    for (x, y) in pts {
        if y < best_y {
            area += (r - x) * (best_y - y);
            best_y = y;
        }
    }
    area
}

/// The four indicators of one solution set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorValues {
    pub hv: f64,
    pub gd: f64,
    pub pd: f64,
    pub sp: f64,
}

/// HV, GD, PD and SP of the nondominated part of `population`, measured in
/// the normalized space of `front`. SP of a single-point set is reported as 0.
pub fn evaluate_set(population: &[Point], front: &[Point], hv: &HvConfig) -> Result<IndicatorValues, IndicatorError> {
    let bounds = NormalizationBounds::from_points(front)?;
    let nd = nondominated_filter(population);
    let nd_norm = bounds.normalize_all(&nd);
    let front_norm = bounds.normalize_all(front);
    Ok(IndicatorValues {
        hv: hypervolume_mc(&nd, &bounds, hv)?,
        gd: gd(&nd_norm, &front_norm)?,
        pd: pure_diversity(&nd_norm)?,
        sp: if nd_norm.len() < 2 { 0.0 } else { spacing(&nd_norm)? },
    })
}
