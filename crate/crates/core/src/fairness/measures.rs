//! The 25 group-fairness measures and their minimized transforms.

use super::confusion::{check_groups, check_lengths, GroupRates};
use super::{MetricsConfig, MetricsError, N_FAIRNESS};
use crate::data::Group;

/// Raw values Fair1..Fair25, index `k - 1` holds Fair`k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawMeasures(pub [f64; N_FAIRNESS]);

impl RawMeasures {
    pub fn get(&self, k: usize) -> f64 {
        self.0[k - 1]
    }
}

/// Measures reported as a difference; minimized as an absolute value.
pub const DIFFERENCE_MEASURES: [usize; 9] = [1, 2, 3, 4, 5, 6, 12, 13, 15];
/// Measures reported as a ratio; minimized as `1 - min(r, 1/r)`.
pub const RATIO_MEASURES: [usize; 6] = [7, 8, 9, 10, 11, 14];

/// `num / den` with 0/0 read as parity (1) and x/0 as unbounded.
pub fn parity_ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// `1 - min(r, 1/r)`, defined on `[0, inf]`.
pub fn ratio_objective(r: f64) -> f64 {
    if r == 0.0 || r.is_infinite() {
        1.0
    } else {
        1.0 - r.min(1.0 / r)
    }
}

/// Per-row benefit `ŷ - y + 1`.
pub fn benefit_vector(y: &[u8], yhat: &[u8]) -> Vec<f64> {
    y.iter()
        .zip(yhat)
        .map(|(&t, &p)| f64::from(p) - f64::from(t) + 1.0)
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn x_ln_x(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Theil index `(1/n) Σ (b/μ) ln(b/μ)`; zero for empty or all-zero input.
pub fn theil_index(b: &[f64]) -> f64 {
    let mu = mean(b);
    if mu == 0.0 {
        return 0.0;
    }
    b.iter().map(|&v| x_ln_x(v / mu)).sum::<f64>() / b.len() as f64
}

/// Generalized entropy index with exponent `alpha`.
pub fn generalized_entropy_index(b: &[f64], alpha: f64) -> f64 {
    let mu = mean(b);
    if mu == 0.0 {
        return 0.0;
    }
    let n = b.len() as f64;
    b.iter().map(|&v| (v / mu).powf(alpha) - 1.0).sum::<f64>() / (n * alpha * (alpha - 1.0))
}

fn between_group_ge(sizes_and_means: &[(f64, f64)], n: f64, mu: f64, alpha: f64) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    sizes_and_means
        .iter()
        .map(|&(n_g, mu_g)| n_g * ((mu_g / mu).powf(alpha) - 1.0))
        .sum::<f64>()
        / (n * alpha * (alpha - 1.0))
}

fn split_by_group(b: &[f64], groups: &[Group]) -> (Vec<f64>, Vec<f64>) {
    let mut unpriv = Vec::new();
    let mut priv_ = Vec::new();
    for (&v, &g) in b.iter().zip(groups) {
        match g {
            Group::Unprivileged => unpriv.push(v),
            Group::Privileged => priv_.push(v),
        }
    }
    (unpriv, priv_)
}

/// Smoothed empirical differential fairness of outcome vector `z`: the
/// largest absolute log-ratio of Dirichlet-smoothed outcome probabilities
/// between the two groups, over both outcomes.
pub fn differential_fairness(z: &[u8], groups: &[Group], concentration: f64) -> f64 {
    let mut counts = [[0usize; 2]; 2];
    for (&o, &g) in z.iter().zip(groups) {
        counts[g as usize][usize::from(o == 1)] += 1;
    }
    let smoothed = |g: usize, o: usize| {
        let n_g = (counts[g][0] + counts[g][1]) as f64;
        (counts[g][o] as f64 + concentration / 2.0) / (n_g + concentration)
    };
    (0..2)
        .map(|o| (smoothed(0, o).ln() - smoothed(1, o).ln()).abs())
        .fold(0.0, f64::max)
}

/// Fair25: differential fairness of the predictions minus that of the labels.
pub fn fair25_bias_amplification(
    y: &[u8],
    yhat: &[u8],
    groups: &[Group],
    cfg: &MetricsConfig,
) -> Result<f64, MetricsError> {
    check_lengths(y, yhat, groups)?;
    check_groups(groups)?;
    let c = cfg.dirichlet_concentration;
    Ok(differential_fairness(yhat, groups, c) - differential_fairness(y, groups, c))
}

pub fn raw_measures(
    rates: &GroupRates,
    y: &[u8],
    yhat: &[u8],
    groups: &[Group],
    cfg: &MetricsConfig,
) -> Result<RawMeasures, MetricsError> {
    check_lengths(y, yhat, groups)?;
    check_groups(groups)?;
    let u = &rates.unprivileged;
    let p = &rates.privileged;
    let alpha = cfg.alpha;

    let b = benefit_vector(y, yhat);
    let (b_u, b_p) = split_by_group(&b, groups);
    let n = b.len() as f64;
    let mu = mean(&b);
    let group_stats = [
        (b_u.len() as f64, mean(&b_u)),
        (b_p.len() as f64, mean(&b_p)),
    ];
    let theil_u = theil_index(&b_u);
    let theil_p = theil_index(&b_p);
    let cv = |t: f64| 2.0 * t.max(0.0).sqrt();
    let theil_all = theil_index(&b);

    let mut f = [0.0; N_FAIRNESS];
    f[0] = u.tpr() - p.tpr();
    f[1] = u.fpr() - p.fpr();
    f[2] = u.fnr() - p.fnr();
    f[3] = u.for_() - p.for_();
    f[4] = u.fdr() - p.fdr();
    f[5] = u.err() - p.err();
    f[6] = parity_ratio(u.fpr(), p.fpr());
    f[7] = parity_ratio(u.fnr(), p.fnr());
    f[8] = parity_ratio(u.for_(), p.for_());
    f[9] = parity_ratio(u.fdr(), p.fdr());
    f[10] = parity_ratio(u.err(), p.err());
    f[11] = 0.5 * (u.tpr() - p.tpr() + u.fpr() - p.fpr());
    f[12] = 0.5 * ((u.tpr() - p.tpr()).abs() + (u.fpr() - p.fpr()).abs());
    f[13] = parity_ratio(u.selection_rate(), p.selection_rate());
    f[14] = u.selection_rate() - p.selection_rate();
    f[15] = generalized_entropy_index(&b, alpha);
    // Fair17 sums over all groups, Fair18 names the two groups explicitly;
    // with a binary attribute they coincide.
    f[16] = between_group_ge(&group_stats, n, mu, alpha);
    f[17] = between_group_ge(&group_stats[..1], n, mu, alpha)
        + between_group_ge(&group_stats[1..], n, mu, alpha);
    f[18] = theil_all;
    f[19] = cv(theil_all);
    f[20] = theil_u + theil_p;
    f[21] = cv(theil_u) + cv(theil_p);
    f[22] = [theil_u, theil_p].iter().sum();
    f[23] = [theil_u, theil_p].iter().map(|&t| cv(t)).sum();
    f[24] = fair25_bias_amplification(y, yhat, groups, cfg)?;
    Ok(RawMeasures(f))
}

/// Minimized objectives f1..f25 from raw Fair1..Fair25.
pub fn transform(raw: &RawMeasures) -> [f64; N_FAIRNESS] {
    let mut out = [0.0; N_FAIRNESS];
    for k in 1..=N_FAIRNESS {
        let v = raw.get(k);
        out[k - 1] = if DIFFERENCE_MEASURES.contains(&k) || k == 25 {
            v.abs()
        } else if RATIO_MEASURES.contains(&k) {
            ratio_objective(v)
        } else {
            // Entropy family is nonnegative; clamp only absorbs round-off.
            v.max(0.0)
        };
    }
    out
}
