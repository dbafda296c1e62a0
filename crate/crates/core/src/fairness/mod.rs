//! Group confusion matrices, the 25 fairness measures, and the 26-entry
//! objective vector `[CE, f1, ..., f25]` minimized during evolution.

mod confusion;
mod measures;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{EncodedDataset, Group};
use crate::model::{self, Genome, ModelError, Network, NetworkShape};

pub use confusion::{group_confusion, Confusion, GroupRates, Rate};
pub use measures::{
    benefit_vector, differential_fairness, fair25_bias_amplification,
    generalized_entropy_index, parity_ratio, ratio_objective, raw_measures, theil_index,
    transform, RawMeasures, DIFFERENCE_MEASURES, RATIO_MEASURES,
};

pub const N_FAIRNESS: usize = 25;
/// Cross-entropy plus the 25 fairness objectives.
pub const N_OBJECTIVES: usize = N_FAIRNESS + 1;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("group {0:?} has no rows")]
    MissingGroup(Group),
    #[error("length mismatch: {labels} labels, {predictions} predictions, {groups} groups")]
    LengthMismatch {
        labels: usize,
        predictions: usize,
        groups: usize,
    },
    #[error("invalid metrics config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// Exponent of the generalized entropy measures (Fair16-Fair18).
    pub alpha: f64,
    /// Dirichlet smoothing mass for Fair25.
    pub dirichlet_concentration: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            alpha: 2.0,
            dirichlet_concentration: 1.0,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.alpha > 0.0) || self.alpha == 1.0 {
            return Err(MetricsError::InvalidConfig(format!(
                "alpha must be positive and != 1, got {}",
                self.alpha
            )));
        }
        if !(self.dirichlet_concentration > 0.0) {
            return Err(MetricsError::InvalidConfig(format!(
                "dirichlet_concentration must be positive, got {}",
                self.dirichlet_concentration
            )));
        }
        Ok(())
    }
}

/// `[CE, f1, ..., f25]`, all minimized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector(pub [f64; N_OBJECTIVES]);

impl ObjectiveVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn ce(&self) -> f64 {
        self.0[0]
    }

    /// Objective `f_k`, `k` in 1..=25.
    pub fn fairness(&self, k: usize) -> f64 {
        self.0[k]
    }
}

/// Column names in objective-vector order.
pub fn objective_names() -> Vec<String> {
    std::iter::once("CE".to_owned())
        .chain((1..=N_FAIRNESS).map(|k| format!("f{k}")))
        .collect()
}

/// Parse an objective name (`CE`, `f1` .. `f25`) into its index.
pub fn objective_index(name: &str) -> Option<usize> {
    if name.eq_ignore_ascii_case("ce") {
        return Some(0);
    }
    let k: usize = name.strip_prefix(['f', 'F'])?.parse().ok()?;
    (1..=N_FAIRNESS).contains(&k).then_some(k)
}

/// Full evaluation of one classifier on a labelled set.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub objectives: ObjectiveVector,
    pub raw: RawMeasures,
    pub rates: GroupRates,
}

/// Objectives from predicted probabilities; labels are `p >= 0.5`.
pub fn evaluate_predictions(
    y: &[u8],
    proba: &[f64],
    groups: &[Group],
    cfg: &MetricsConfig,
) -> Result<Evaluation, MetricsError> {
    let yhat: Vec<u8> = proba.iter().map(|&p| u8::from(p >= 0.5)).collect();
    let ce = model::cross_entropy_from_proba(proba, y)?;
    evaluate_labels(y, &yhat, groups, ce, cfg)
}

/// Objectives from hard predictions with an externally supplied CE.
pub fn evaluate_labels(
    y: &[u8],
    yhat: &[u8],
    groups: &[Group],
    ce: f64,
    cfg: &MetricsConfig,
) -> Result<Evaluation, MetricsError> {
    let rates = group_confusion(y, yhat, groups)?;
    let raw = raw_measures(&rates, y, yhat, groups, cfg)?;
    let f = transform(&raw);
    let mut values = [0.0; N_OBJECTIVES];
    values[0] = ce;
    values[1..].copy_from_slice(&f);
    Ok(Evaluation {
        objectives: ObjectiveVector(values),
        raw,
        rates,
    })
}

/// Evaluate a genome on `data` (normally the validation split).
pub fn evaluate_individual(
    shape: &NetworkShape,
    genome: &Genome,
    data: &EncodedDataset,
    cfg: &MetricsConfig,
) -> Result<ObjectiveVector, MetricsError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset.into());
    }
    let proba = Network::new(shape, genome)?.predict_proba(data)?;
    Ok(evaluate_predictions(&data.labels, &proba, &data.groups, cfg)?.objectives)
}
