//! Two-archive survival selection.
//!
//! The convergence archive keeps the members with the best additive
//! ε-indicator fitness; the diversity archive keeps nondominated members and
//! truncates by fractional-norm dissimilarity. Both only look at the
//! objective columns listed in the active mask.

use std::collections::BTreeMap;

use rand::Rng;

use super::{Individual, MoeaError};
use crate::indicators::dominates_on;

/// Scaling factor of the indicator fitness.
pub const KAPPA: f64 = 0.05;

/// Min-max normalize the masked columns of `points` over the set itself.
/// Constant columns become 0. Output rows hold only masked columns.
pub fn normalize_masked(points: &[&[f64]], mask: &[usize]) -> Vec<Vec<f64>> {
    let ranges: Vec<(f64, f64)> = mask
        .iter()
        .map(|&k| {
            points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p[k]), hi.max(p[k]))
            })
        })
        .collect();
    points
        .iter()
        .map(|p| {
            mask.iter()
                .zip(&ranges)
                .map(|(&k, &(lo, hi))| if hi > lo { (p[k] - lo) / (hi - lo) } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Additive ε-indicator `I(a, b) = max_k (a_k - b_k)`: the smallest shift
/// that makes `a` weakly dominate `b`.
pub fn eps_indicator(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn indicator_table(norm: &[Vec<f64>]) -> Vec<Vec<f64>> {
    norm.iter()
        .map(|a| norm.iter().map(|b| eps_indicator(a, b)).collect())
        .collect()
}

/// `F_k = Σ_{j != k} -exp(-I(j, k) / κ)` on the normalized masked objectives.
/// Higher is better.
pub fn epsilon_indicator_fitness(candidates: &[&[f64]], mask: &[usize]) -> Vec<f64> {
    let norm = normalize_masked(candidates, mask);
    let table = indicator_table(&norm);
    fitness_from_table(&table, &vec![true; candidates.len()])
}

fn fitness_from_table(table: &[Vec<f64>], alive: &[bool]) -> Vec<f64> {
    fitness_from_weights(&weights(table), alive)
}

/// `w[j][k] = exp(-I(j, k) / κ)`.
fn weights(table: &[Vec<f64>]) -> Vec<Vec<f64>> {
    table
        .iter()
        .map(|row| row.iter().map(|v| (-v / KAPPA).exp()).collect())
        .collect()
}

fn fitness_from_weights(w: &[Vec<f64>], alive: &[bool]) -> Vec<f64> {
    (0..w.len())
        .map(|k| {
            (0..w.len())
                .filter(|&j| j != k && alive[j])
                .map(|j| -w[j][k])
                .sum()
        })
        .collect()
}

fn merge(archive: Vec<Individual>, newcomers: &[Individual]) -> Vec<Individual> {
    let mut by_id: BTreeMap<u64, Individual> = archive.into_iter().map(|i| (i.id, i)).collect();
    for n in newcomers {
        by_id.entry(n.id).or_insert_with(|| n.clone());
    }
    by_id.into_values().collect()
}

/// Drop the worst-fitness member until `capacity` remain. Normalization is
/// fixed on the merged pool; after each removal the survivors' fitness is
/// recomputed over the remaining members. Ties drop the smallest id.
/// Output is sorted by id.
pub fn update_convergence_archive(
    archive: Vec<Individual>,
    newcomers: &[Individual],
    mask: &[usize],
    capacity: usize,
) -> Vec<Individual> {
    let pool = merge(archive, newcomers);
    if pool.len() <= capacity {
        return pool;
    }
    let points: Vec<&[f64]> = pool.iter().map(|i| i.objectives.values()).collect();
    let w = weights(&indicator_table(&normalize_masked(&points, mask)));
    let mut alive = vec![true; pool.len()];
    for _ in capacity..pool.len() {
        // Re-summed rather than updated in place: the weights span many
        // orders of magnitude and subtracting removed terms loses the rest.
        let fitness = fitness_from_weights(&w, &alive);
        let worst = (0..pool.len())
            .filter(|&i| alive[i])
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if fitness[b] <= fitness[i] => Some(b),
                _ => Some(i),
            })
            .expect("pool larger than capacity");
        alive[worst] = false;
    }
    pool.into_iter().zip(alive).filter(|(_, a)| *a).map(|(i, _)| i).collect()
}

/// Members of `pool` not dominated by another member on `mask`.
pub fn mask_nondominated(pool: Vec<Individual>, mask: &[usize]) -> Vec<Individual> {
    let keep: Vec<bool> = pool
        .iter()
        .map(|p| {
            !pool
                .iter()
                .any(|q| dominates_on(q.objectives.values(), p.objectives.values(), mask))
        })
        .collect();
    pool.into_iter().zip(keep).filter(|(_, k)| *k).map(|(i, _)| i).collect()
}

/// `(Σ |a_k - b_k|^(1/m))^m` over `m` normalized coordinates.
pub fn fractional_dissimilarity(a: &[f64], b: &[f64]) -> f64 {
    let m = a.len() as f64;
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs().powf(1.0 / m))
        .sum::<f64>()
        .powf(m)
}

/// Keep the mask-nondominated members of archive ∪ newcomers; while over
/// capacity, remove the member with the smallest summed dissimilarity to
/// the rest (ties: smallest id). Output is sorted by id.
pub fn update_diversity_archive(
    archive: Vec<Individual>,
    newcomers: &[Individual],
    mask: &[usize],
    capacity: usize,
) -> Vec<Individual> {
    let pool = mask_nondominated(merge(archive, newcomers), mask);
    if pool.len() <= capacity {
        return pool;
    }
    let points: Vec<&[f64]> = pool.iter().map(|i| i.objectives.values()).collect();
    let norm = normalize_masked(&points, mask);
    let n = pool.len();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = fractional_dissimilarity(&norm[i], &norm[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let mut alive = vec![true; n];
    let mut contribution: Vec<f64> = dist.iter().map(|row| row.iter().sum()).collect();
    for _ in capacity..n {
        let victim = (0..n)
            .filter(|&i| alive[i])
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if contribution[b] <= contribution[i] => Some(b),
                _ => Some(i),
            })
            .expect("pool larger than capacity");
        alive[victim] = false;
        for y in 0..n {
            contribution[y] -= dist[victim][y];
        }
    }
    pool.into_iter().zip(alive).filter(|(_, a)| *a).map(|(i, _)| i).collect()
}

/// `ceil(phi / 2)` parent pairs: first parent uniform from the convergence
/// archive, second from the diversity archive. If one archive is empty both
/// parents come from the other.
pub fn mating_selection<'a>(
    convergence: &'a [Individual],
    diversity: &'a [Individual],
    phi: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(&'a Individual, &'a Individual)>, MoeaError> {
    let (first, second) = match (convergence.is_empty(), diversity.is_empty()) {
        (true, true) => return Err(MoeaError::EmptyPopulation),
        (false, false) => (convergence, diversity),
        (false, true) => (convergence, convergence),
        (true, false) => (diversity, diversity),
    };
    Ok((0..phi.div_ceil(2))
        .map(|_| {
            let a = &first[rng.random_range(0..first.len())];
            let b = &second[rng.random_range(0..second.len())];
            (a, b)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::{ObjectiveVector, N_OBJECTIVES};
    use crate::model::Genome;
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;

    fn ind(id: u64, obj: &[f64]) -> Individual {
        let mut v = [0.0; N_OBJECTIVES];
        v[..obj.len()].copy_from_slice(obj);
        Individual::new(id, Genome(vec![id as f64]), ObjectiveVector(v), ObjectiveVector(v))
    }

    fn ids(v: &[Individual]) -> Vec<u64> {
        v.iter().map(|i| i.id).collect()
    }

    #[test]
    fn single_newcomer_enters_empty_archive() {
        let a = update_convergence_archive(vec![], &[ind(3, &[1.0, 2.0])], &[0, 1], 5);
        assert_eq!(ids(&a), vec![3]);
        let d = update_diversity_archive(vec![], &[ind(3, &[1.0, 2.0])], &[0, 1], 5);
        assert_eq!(ids(&d), vec![3]);
    }

    #[test]
    fn under_capacity_returns_pool_sorted() {
        let a = update_convergence_archive(vec![ind(5, &[0.0, 1.0])], &[ind(2, &[1.0, 0.0])], &[0, 1], 5);
        assert_eq!(ids(&a), vec![2, 5]);
    }

    #[test]
    fn fitness_by_hand() {
        // Normalized: a=(0,1), b=(0.5,0.5), c=(1,0).
        let pts: [&[f64]; 3] = [&[0.0, 2.0], &[1.0, 1.0], &[2.0, 0.0]];
        let f = epsilon_indicator_fitness(&pts, &[0, 1]);
        let e = |i: f64| -(-i / KAPPA).exp();
        assert_abs_diff_eq!(f[0], e(0.5) + e(1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(f[1], e(0.5) + e(0.5), epsilon = 1e-12);
        assert_abs_diff_eq!(f[2], e(1.0) + e(0.5), epsilon = 1e-12);
    }

    #[test]
    fn duplicates_have_equal_fitness() {
        let pts: [&[f64]; 3] = [&[0.3, 0.7], &[0.3, 0.7], &[0.9, 0.1]];
        let f = epsilon_indicator_fitness(&pts, &[0, 1]);
        assert_eq!(f[0], f[1]);
    }

    #[test]
    fn diversity_keeps_extremes() {
        let pool = [ind(0, &[0.0, 1.0]), ind(1, &[0.5, 0.5]), ind(2, &[1.0, 0.0])];
        let d = update_diversity_archive(vec![], &pool, &[0, 1], 2);
        assert_eq!(ids(&d), vec![0, 2]);
    }

    #[test]
    fn identical_points_drop_smallest_ids() {
        let pool: Vec<Individual> = (0..5).map(|i| ind(i, &[0.4, 0.4])).collect();
        let d = update_diversity_archive(vec![], &pool, &[0, 1], 2);
        assert_eq!(ids(&d), vec![3, 4]);
        let c = update_convergence_archive(vec![], &pool, &[0, 1], 2);
        assert_eq!(ids(&c), vec![3, 4]);
    }

    #[test]
    fn dominated_newcomer_never_enters_diversity_archive() {
        let d = update_diversity_archive(vec![ind(0, &[0.1, 0.1])], &[ind(1, &[0.2, 0.3])], &[0, 1], 10);
        assert_eq!(ids(&d), vec![0]);
        // Not dominated once the mask ignores the worse column.
        let d = update_diversity_archive(vec![ind(0, &[0.1, 0.5])], &[ind(1, &[0.2, 0.3])], &[1], 10);
        assert_eq!(ids(&d), vec![1]);
    }

    #[test]
    fn mating_pairs() {
        let ca = vec![ind(0, &[0.0]), ind(1, &[1.0])];
        let da = vec![ind(2, &[0.5])];
        assert_eq!(mating_selection(&ca, &da, 2, &mut stream(1, 0)).unwrap().len(), 1);
        let pairs = mating_selection(&ca, &da, 7, &mut stream(1, 0)).unwrap();
        assert_eq!(pairs.len(), 4);
        assert!(pairs.iter().all(|(a, b)| a.id < 2 && b.id == 2));
        let again = mating_selection(&ca, &da, 7, &mut stream(1, 0)).unwrap();
        let key = |p: &[(&Individual, &Individual)]| p.iter().map(|(a, b)| (a.id, b.id)).collect::<Vec<_>>();
        assert_eq!(key(&pairs), key(&again));
        let single = mating_selection(&ca[..1], &da, 6, &mut stream(1, 0)).unwrap();
        assert!(single.iter().all(|(a, b)| a.id == 0 && b.id == 2));
        assert!(matches!(mating_selection(&[], &[], 2, &mut stream(1, 0)), Err(MoeaError::EmptyPopulation)));
        let fallback = mating_selection(&[], &da, 2, &mut stream(1, 0)).unwrap();
        assert_eq!((fallback[0].0.id, fallback[0].1.id), (2, 2));
    }
}
