//! Independent reference implementations used to cross-check the library.
//! Written from the formulas directly, favouring clarity over speed.
#![allow(dead_code)]

use std::collections::HashMap;

use fairevo::data::{EncodedDataset, Group, SplitBundle};
use fairevo::fairness::{ObjectiveVector, N_OBJECTIVES};
use fairevo::model::Genome;
use fairevo::moea::Individual;
use rand::Rng;

// ---------------------------------------------------------------------------
// Fairness measures

struct Counts {
    tp: f64,
    fp: f64,
    fn_: f64,
    tn: f64,
}

fn counts(y: &[u8], yhat: &[u8], groups: &[Group], g: Group) -> Counts {
    let mut c = Counts {
        tp: 0.0,
        fp: 0.0,
        fn_: 0.0,
        tn: 0.0,
    };
    for i in 0..y.len() {
        if groups[i] != g {
            continue;
        }
        match (y[i], yhat[i]) {
            (1, 1) => c.tp += 1.0,
            (0, 1) => c.fp += 1.0,
            (1, 0) => c.fn_ += 1.0,
            _ => c.tn += 1.0,
        }
    }
    c
}

fn div0(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    match (num == 0.0, den == 0.0) {
        (true, true) => 1.0,
        (false, true) => f64::INFINITY,
        _ => num / den,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn theil(b: &[f64]) -> f64 {
    let mu = mean(b);
    if mu == 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for &v in b {
        if v > 0.0 {
            s += v / mu * (v / mu).ln();
        }
    }
    s / b.len() as f64
}

/// Fair1..Fair25 straight from the table of formulas (index k-1 = Fair k).
pub fn table2_raw(y: &[u8], yhat: &[u8], groups: &[Group], alpha: f64, c: f64) -> [f64; 25] {
    let u = counts(y, yhat, groups, Group::Unprivileged);
    let p = counts(y, yhat, groups, Group::Privileged);
    let tpr = |k: &Counts| div0(k.tp, k.tp + k.fn_);
    let fpr = |k: &Counts| div0(k.fp, k.fp + k.tn);
    let fnr = |k: &Counts| div0(k.fn_, k.tp + k.fn_);
    let for_ = |k: &Counts| div0(k.fn_, k.tn + k.fn_);
    let fdr = |k: &Counts| div0(k.fp, k.tp + k.fp);
    let err = |k: &Counts| div0(k.fn_ + k.fp, k.tp + k.fp + k.fn_ + k.tn);
    let sel = |k: &Counts| div0(k.tp + k.fp, k.tp + k.fp + k.fn_ + k.tn);

    let b: Vec<f64> = (0..y.len()).map(|i| yhat[i] as f64 - y[i] as f64 + 1.0).collect();
    let bu: Vec<f64> = (0..y.len()).filter(|&i| groups[i] == Group::Unprivileged).map(|i| b[i]).collect();
    let bp: Vec<f64> = (0..y.len()).filter(|&i| groups[i] == Group::Privileged).map(|i| b[i]).collect();
    let n = b.len() as f64;
    let mu = mean(&b);
    let norm = n * alpha * (alpha - 1.0);
    let ge = if mu == 0.0 {
        0.0
    } else {
        b.iter().map(|v| (v / mu).powf(alpha) - 1.0).sum::<f64>() / norm
    };
    let between = |bg: &[f64]| {
        if mu == 0.0 {
            0.0
        } else {
            bg.len() as f64 * ((mean(bg) / mu).powf(alpha) - 1.0) / norm
        }
    };

    let mut f = [0.0; 25];
    f[0] = tpr(&u) - tpr(&p);
    f[1] = fpr(&u) - fpr(&p);
    f[2] = fnr(&u) - fnr(&p);
    f[3] = for_(&u) - for_(&p);
    f[4] = fdr(&u) - fdr(&p);
    f[5] = err(&u) - err(&p);
    f[6] = ratio(fpr(&u), fpr(&p));
    f[7] = ratio(fnr(&u), fnr(&p));
    f[8] = ratio(for_(&u), for_(&p));
    f[9] = ratio(fdr(&u), fdr(&p));
    f[10] = ratio(err(&u), err(&p));
    f[11] = 0.5 * (tpr(&u) - tpr(&p) + fpr(&u) - fpr(&p));
    f[12] = 0.5 * ((tpr(&u) - tpr(&p)).abs() + (fpr(&u) - fpr(&p)).abs());
    f[13] = ratio(sel(&u), sel(&p));
    f[14] = sel(&u) - sel(&p);
    f[15] = ge;
    f[16] = between(&bu) + between(&bp);
    f[17] = between(&bu) + between(&bp);
    f[18] = theil(&b);
    f[19] = 2.0 * theil(&b).sqrt();
    f[20] = theil(&bu) + theil(&bp);
    f[21] = 2.0 * theil(&bu).sqrt() + 2.0 * theil(&bp).sqrt();
    f[22] = theil(&bu) + theil(&bp);
    f[23] = 2.0 * theil(&bu).sqrt() + 2.0 * theil(&bp).sqrt();
    f[24] = smoothed_df(yhat, groups, c) - smoothed_df(y, groups, c);
    f
}

/// Largest |ln P(z=o|g_i) - ln P(z=o|g_j)| over ordered group pairs and
/// outcomes, with Dirichlet smoothing `(count + c/2) / (n_g + c)`.
pub fn smoothed_df(z: &[u8], groups: &[Group], c: f64) -> f64 {
    let gs = [Group::Unprivileged, Group::Privileged];
    let prob = |g: Group, o: u8| {
        let n_g = groups.iter().filter(|&&x| x == g).count() as f64;
        let k = (0..z.len()).filter(|&i| groups[i] == g && z[i] == o).count() as f64;
        (k + c / 2.0) / (n_g + c)
    };
    let mut best = 0.0_f64;
    for &gi in &gs {
        for &gj in &gs {
            for o in [0u8, 1] {
                best = best.max((prob(gi, o).ln() - prob(gj, o).ln()).abs());
            }
        }
    }
    best
}

/// Minimized form of a raw measure.
pub fn table2_transform(raw: &[f64; 25]) -> [f64; 25] {
    let mut out = [0.0; 25];
    for k in 1..=25 {
        let v = raw[k - 1];
        out[k - 1] = match k {
            7..=11 | 14 => {
                if v == 0.0 || v.is_infinite() {
                    1.0
                } else if v > 1.0 {
                    1.0 - 1.0 / v
                } else {
                    1.0 - v
                }
            }
            16..=24 => v,
            _ => v.abs(),
        };
    }
    out
}

pub fn same_value(a: f64, b: f64, tol: f64) -> bool {
    (a.is_infinite() && a == b) || (a - b).abs() <= tol
}

pub fn random_instance(rng: &mut impl Rng, n: usize) -> (Vec<u8>, Vec<u8>, Vec<Group>) {
    loop {
        let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let yhat: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let g: Vec<Group> = (0..n)
            .map(|_| if rng.random::<bool>() { Group::Privileged } else { Group::Unprivileged })
            .collect();
        if g.contains(&Group::Privileged) && g.contains(&Group::Unprivileged) {
            return (y, yhat, g);
        }
    }
}

// ---------------------------------------------------------------------------
// Rank-grid nonlinear correlation

fn naive_rank(x: &[f64], i: usize) -> f64 {
    let less = x.iter().filter(|&&v| v < x[i]).count() as f64;
    let equal = x.iter().filter(|&&v| v == x[i]).count() as f64;
    less + (equal + 1.0) / 2.0
}

/// Signed NCC by explicit counting of the `b x b` rank grid.
pub fn ncc_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    if x.iter().all(|&v| v == x[0]) || y.iter().all(|&v| v == y[0]) {
        return 0.0;
    }
    let mut b = 1;
    while (b + 1) * (b + 1) <= n {
        b += 1;
    }
    let rx: Vec<f64> = (0..n).map(|i| naive_rank(x, i)).collect();
    let ry: Vec<f64> = (0..n).map(|i| naive_rank(y, i)).collect();
    let bin = |r: f64| (((r - 1.0) * b as f64 / n as f64).floor() as usize).min(b - 1);
    let mut cells: HashMap<(usize, usize), usize> = HashMap::new();
    for i in 0..n {
        *cells.entry((bin(rx[i]), bin(ry[i]))).or_default() += 1;
    }
    let entropy: f64 = cells
        .values()
        .map(|&k| {
            let p = k as f64 / n as f64;
            -p * p.log(b as f64)
        })
        .sum();
    let ncc = (2.0 - entropy).clamp(0.0, 1.0);
    let mean = (n as f64 + 1.0) / 2.0;
    let cov: f64 = (0..n).map(|i| (rx[i] - mean) * (ry[i] - mean)).sum();
    if cov > 0.0 {
        ncc
    } else if cov < 0.0 {
        -ncc
    } else {
        0.0
    }
}

// ---------------------------------------------------------------------------
// Dominance and hypervolume

pub fn weakly_better_everywhere(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Indices kept by an O(n²) scan: not dominated, first of its duplicates.
pub fn nondominated_oracle(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..points.len())
        .filter(|&i| {
            !points.iter().any(|q| weakly_better_everywhere(q, &points[i]))
                && !points[..i].iter().any(|q| q == &points[i])
        })
        .map(|i| points[i].clone())
        .collect()
}

/// Exact dominated volume in `[0, r]^m` by summing the cells of the grid
/// spanned by all point coordinates.
pub fn hv_grid_oracle(points: &[Vec<f64>], r: f64) -> f64 {
    let m = points[0].len();
    let axes: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            let mut v: Vec<f64> = points.iter().map(|p| p[k].min(r)).collect();
            v.push(r);
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        })
        .collect();
    let dims: Vec<usize> = axes.iter().map(|a| a.len() - 1).collect();
    let total: usize = dims.iter().product();
    let mut volume = 0.0;
    for cell in 0..total {
        let mut rem = cell;
        let mut corner = Vec::with_capacity(m);
        let mut size = 1.0;
        for k in 0..m {
            let i = rem % dims[k];
            rem /= dims[k];
            corner.push(axes[k][i]);
            size *= axes[k][i + 1] - axes[k][i];
        }
        if points.iter().any(|p| p.iter().zip(&corner).all(|(a, c)| a <= c)) {
            volume += size;
        }
    }
    volume
}

// ---------------------------------------------------------------------------
// Network loss by finite differences

/// Log-loss of one sample evaluated through the public forward pass.
pub fn sample_loss(shape: &fairevo::model::NetworkShape, genome: &Genome, x: &[f64], y: u8) -> f64 {
    let p = fairevo::model::forward(shape, genome, x).expect("valid genome");
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

pub fn finite_difference_gradient(
    shape: &fairevo::model::NetworkShape,
    genome: &Genome,
    x: &[f64],
    y: u8,
    h: f64,
) -> Vec<f64> {
    (0..genome.len())
        .map(|k| {
            let mut plus = genome.clone();
            let mut minus = genome.clone();
            plus.0[k] += h;
            minus.0[k] -= h;
            (sample_loss(shape, &plus, x, y) - sample_loss(shape, &minus, x, y)) / (2.0 * h)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Indicator-based truncation, recomputed from scratch each step

/// Survivors (ids, ascending) of repeatedly dropping the member whose
/// ε-indicator fitness over the remaining set is lowest. Normalization uses
/// the whole pool; ties drop the smallest id.
pub fn ibea_truncation_oracle(pool: &[Individual], mask: &[usize], capacity: usize, kappa: f64) -> Vec<u64> {
    let mut members: Vec<&Individual> = pool.iter().collect();
    members.sort_by_key(|i| i.id);
    let lo: Vec<f64> = mask
        .iter()
        .map(|&k| members.iter().map(|i| i.objectives.0[k]).fold(f64::INFINITY, f64::min))
        .collect();
    let hi: Vec<f64> = mask
        .iter()
        .map(|&k| members.iter().map(|i| i.objectives.0[k]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let norm = |i: &Individual| -> Vec<f64> {
        mask.iter()
            .enumerate()
            .map(|(j, &k)| if hi[j] > lo[j] { (i.objectives.0[k] - lo[j]) / (hi[j] - lo[j]) } else { 0.0 })
            .collect()
    };
    let eps = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max);
    while members.len() > capacity {
        let pts: Vec<Vec<f64>> = members.iter().map(|i| norm(i)).collect();
        let fitness: Vec<f64> = (0..pts.len())
            .map(|k| {
                (0..pts.len())
                    .filter(|&j| j != k)
                    .map(|j| -(-eps(&pts[j], &pts[k]) / kappa).exp())
                    .sum()
            })
            .collect();
        let mut worst = 0;
        for k in 1..fitness.len() {
            if fitness[k] < fitness[worst] {
                worst = k;
            }
        }
        members.remove(worst);
    }
    members.iter().map(|i| i.id).collect()
}

pub fn individual(id: u64, objectives: &[f64]) -> Individual {
    let mut v = [0.0; N_OBJECTIVES];
    v[..objectives.len()].copy_from_slice(objectives);
    Individual::new(id, Genome(vec![0.0]), ObjectiveVector(v), ObjectiveVector(v))
}

// ---------------------------------------------------------------------------
// Synthetic data

/// A small separable problem with a group-correlated feature.
pub fn toy_splits(seed: u64, n_features: usize) -> SplitBundle {
    let mut rng = fairevo::rng::stream(seed, 0);
    let mut make = |n: usize| {
        let mut features = Vec::with_capacity(n * n_features);
        let mut labels = Vec::with_capacity(n);
        let mut groups = Vec::with_capacity(n);
        for i in 0..n {
            let g = if i % 3 == 0 { Group::Unprivileged } else { Group::Privileged };
            let row: Vec<f64> = (0..n_features).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let shift = if g == Group::Privileged { 0.3 } else { -0.3 };
            labels.push(u8::from(row[0] + 0.5 * row[1] + shift + 0.3 * (rng.random::<f64>() - 0.5) > 0.0));
            features.extend(row);
            groups.push(g);
        }
        EncodedDataset::new(features, n_features, labels, groups)
    };
    let train = make(80);
    let validation = make(40);
    let test = make(40);
    SplitBundle {
        train,
        validation,
        test,
        seed,
    }
}
