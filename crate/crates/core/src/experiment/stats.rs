//! Friedman rank test and per-dataset algorithm comparison.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::reduction::average_ranks;

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("{got} blocks, at least 2 needed")]
    TooFewBlocks { got: usize },
    #[error("{got} algorithms, at least 2 needed")]
    TooFewAlgorithms { got: usize },
    #[error("algorithm `{0}` has a different number of blocks")]
    RaggedSamples(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub significant: bool,
    /// Mean rank per algorithm; rank 1 is best.
    pub mean_ranks: Vec<f64>,
}

/// Friedman test on `samples[algorithm][block]`.
///
/// Within each block algorithms are ranked (1 = best, ties share the
/// average rank); the statistic `12 / (n k (k + 1)) Σ R_j² - 3 n (k + 1)`
/// is compared with a chi-squared distribution on `k - 1` degrees of freedom.
pub fn friedman_test(samples: &[Vec<f64>], higher_is_better: bool) -> Result<FriedmanResult, StatsError> {
    let k = samples.len();
    if k < 2 {
        return Err(StatsError::TooFewAlgorithms { got: k });
    }
    let n = samples[0].len();
    if let Some(j) = samples.iter().position(|s| s.len() != n) {
        return Err(StatsError::RaggedSamples(j.to_string()));
    }
    if n < 2 {
        return Err(StatsError::TooFewBlocks { got: n });
    }
    let mut rank_sums = vec![0.0; k];
    for b in 0..n {
        let block: Vec<f64> = samples
            .iter()
            .map(|s| if higher_is_better { -s[b] } else { s[b] })
            .collect();
        for (sum, r) in rank_sums.iter_mut().zip(average_ranks(&block)) {
            *sum += r;
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    let statistic = 12.0 / (nf * kf * (kf + 1.0)) * rank_sums.iter().map(|r| r * r).sum::<f64>()
        - 3.0 * nf * (kf + 1.0);
    let statistic = statistic.max(0.0);
    let df = k - 1;
    let p_value = ChiSquared::new(df as f64).expect("df >= 1").sf(statistic);
    Ok(FriedmanResult {
        statistic,
        df,
        p_value,
        significant: p_value < SIGNIFICANCE_LEVEL,
        mean_ranks: rank_sums.iter().map(|r| r / nf).collect(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct WinTieLoss {
    pub win: usize,
    pub tie: usize,
    pub loss: usize,
}

impl WinTieLoss {
    pub fn total(&self) -> usize {
        self.win + self.tie + self.loss
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetComparison {
    pub dataset: String,
    /// Per algorithm: (mean, standard deviation).
    pub summary: BTreeMap<String, (f64, f64)>,
    pub friedman: FriedmanResult,
    /// Outcome of each algorithm against the reference one.
    pub outcome: BTreeMap<String, Outcome>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Win,
    Tie,
    Loss,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub indicator: String,
    pub reference: String,
    pub higher_is_better: bool,
    pub datasets: Vec<DatasetComparison>,
    /// Totals per algorithm against the reference.
    pub totals: BTreeMap<String, WinTieLoss>,
}

/// Values of one indicator: `dataset -> algorithm -> per-trial values`.
pub type IndicatorSamples = BTreeMap<String, BTreeMap<String, Vec<f64>>>;

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Compare every algorithm with `reference` on each dataset: a pairwise
/// Friedman test over trials decides significance, the mean decides the
/// direction. Blocks are trials matched by position.
pub fn friedman_compare(
    samples: &IndicatorSamples,
    indicator: &str,
    reference: &str,
    higher_is_better: bool,
) -> Result<ComparisonReport, StatsError> {
    let mut totals: BTreeMap<String, WinTieLoss> = BTreeMap::new();
    let mut datasets = Vec::new();
    for (dataset, algs) in samples {
        let names: Vec<&String> = algs.keys().collect();
        let all: Vec<Vec<f64>> = algs.values().cloned().collect();
        let friedman = friedman_test(&all, higher_is_better)?;
        let summary: BTreeMap<String, (f64, f64)> =
            algs.iter().map(|(a, v)| (a.clone(), mean_std(v))).collect();
        let mut outcome = BTreeMap::new();
        if let Some(base) = algs.get(reference) {
            for name in names.iter().filter(|n| n.as_str() != reference) {
                let other = &algs[name.as_str()];
                let pair = friedman_test(&[other.clone(), base.clone()], higher_is_better)?;
                let (m_other, m_base) = (summary[name.as_str()].0, summary[reference].0);
                let better = if higher_is_better { m_other > m_base } else { m_other < m_base };
                let o = match (pair.significant, better) {
                    (false, _) => Outcome::Tie,
                    (true, true) => Outcome::Win,
                    (true, false) => Outcome::Loss,
                };
                let t = totals.entry((*name).clone()).or_default();
                match o {
                    Outcome::Win => t.win += 1,
                    Outcome::Tie => t.tie += 1,
                    Outcome::Loss => t.loss += 1,
                }
                outcome.insert((*name).clone(), o);
            }
        }
        datasets.push(DatasetComparison {
            dataset: dataset.clone(),
            summary,
            friedman,
            outcome,
        });
    }
    Ok(ComparisonReport {
        indicator: indicator.into(),
        reference: reference.into(),
        higher_is_better,
        datasets,
        totals,
    })
}
