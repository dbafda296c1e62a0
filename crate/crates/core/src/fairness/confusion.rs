use serde::Serialize;

use super::MetricsError;
use crate::data::Group;

/// Confusion-matrix rates. Every rate is a ratio of two counts; a zero
/// denominator yields 0 and marks the rate degenerate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Rate {
    Tpr,
    Fpr,
    Fnr,
    For,
    Fdr,
    Ppv,
    Npv,
    Tnr,
    Err,
    /// P(ŷ = 1 | g)
    Selection,
}

impl Rate {
    pub const ALL: [Rate; 10] = [
        Rate::Tpr,
        Rate::Fpr,
        Rate::Fnr,
        Rate::For,
        Rate::Fdr,
        Rate::Ppv,
        Rate::Npv,
        Rate::Tnr,
        Rate::Err,
        Rate::Selection,
    ];
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    fn parts(&self, rate: Rate) -> (usize, usize) {
        let Confusion { tp, fp, fn_, tn } = *self;
        match rate {
            Rate::Tpr => (tp, tp + fn_),
            Rate::Fpr => (fp, fp + tn),
            Rate::Fnr => (fn_, tp + fn_),
            Rate::For => (fn_, tn + fn_),
            Rate::Fdr => (fp, tp + fp),
            Rate::Ppv => (tp, tp + fp),
            Rate::Npv => (tn, tn + fn_),
            Rate::Tnr => (tn, tn + fp),
            Rate::Err => (fn_ + fp, self.total()),
            Rate::Selection => (tp + fp, self.total()),
        }
    }

    pub fn rate(&self, rate: Rate) -> f64 {
        match self.parts(rate) {
            (_, 0) => 0.0,
            (num, den) => num as f64 / den as f64,
        }
    }

    pub fn is_degenerate(&self, rate: Rate) -> bool {
        self.parts(rate).1 == 0
    }

    pub fn tpr(&self) -> f64 {
        self.rate(Rate::Tpr)
    }
    pub fn fpr(&self) -> f64 {
        self.rate(Rate::Fpr)
    }
    pub fn fnr(&self) -> f64 {
        self.rate(Rate::Fnr)
    }
    pub fn for_(&self) -> f64 {
        self.rate(Rate::For)
    }
    pub fn fdr(&self) -> f64 {
        self.rate(Rate::Fdr)
    }
    pub fn ppv(&self) -> f64 {
        self.rate(Rate::Ppv)
    }
    pub fn npv(&self) -> f64 {
        self.rate(Rate::Npv)
    }
    pub fn tnr(&self) -> f64 {
        self.rate(Rate::Tnr)
    }
    pub fn err(&self) -> f64 {
        self.rate(Rate::Err)
    }
    pub fn selection_rate(&self) -> f64 {
        self.rate(Rate::Selection)
    }
}

/// Confusion matrices of the unprivileged and privileged groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GroupRates {
    pub unprivileged: Confusion,
    pub privileged: Confusion,
}

impl GroupRates {
    pub fn get(&self, g: Group) -> &Confusion {
        match g {
            Group::Unprivileged => &self.unprivileged,
            Group::Privileged => &self.privileged,
        }
    }

    /// Rates flagged degenerate, per group.
    pub fn degenerate(&self) -> Vec<(Group, Rate)> {
        [Group::Unprivileged, Group::Privileged]
            .into_iter()
            .flat_map(|g| {
                Rate::ALL
                    .into_iter()
                    .filter(move |r| self.get(g).is_degenerate(*r))
                    .map(move |r| (g, r))
            })
            .collect()
    }

    pub fn swapped(&self) -> GroupRates {
        GroupRates {
            unprivileged: self.privileged,
            privileged: self.unprivileged,
        }
    }
}

pub(crate) fn check_lengths(y: &[u8], yhat: &[u8], groups: &[Group]) -> Result<(), MetricsError> {
    if y.len() != yhat.len() || y.len() != groups.len() {
        return Err(MetricsError::LengthMismatch {
            labels: y.len(),
            predictions: yhat.len(),
            groups: groups.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_groups(groups: &[Group]) -> Result<(), MetricsError> {
    for g in [Group::Unprivileged, Group::Privileged] {
        if !groups.contains(&g) {
            return Err(MetricsError::MissingGroup(g));
        }
    }
    Ok(())
}

pub fn group_confusion(y: &[u8], yhat: &[u8], groups: &[Group]) -> Result<GroupRates, MetricsError> {
    check_lengths(y, yhat, groups)?;
    check_groups(groups)?;
    let mut rates = GroupRates {
        unprivileged: Confusion::default(),
        privileged: Confusion::default(),
    };
    for ((&t, &p), &g) in y.iter().zip(yhat).zip(groups) {
        let c = match g {
            Group::Unprivileged => &mut rates.unprivileged,
            Group::Privileged => &mut rates.privileged,
        };
        match (t, p) {
            (1, 1) => c.tp += 1,
            (0, 1) => c.fp += 1,
            (1, 0) => c.fn_ += 1,
            _ => c.tn += 1,
        }
    }
    Ok(rates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Group::{Privileged as P, Unprivileged as U};

    #[test]
    fn half_recall_in_unprivileged_group() {
        let r = group_confusion(&[1, 1, 1, 0], &[1, 0, 1, 0], &[U, U, P, P]).unwrap();
        assert_eq!(r.unprivileged.tpr(), 0.5);
        assert_eq!(r.unprivileged.fnr(), 0.5);
    }

    #[test]
    fn perfect_classifier_has_no_errors() {
        let y = [1, 0, 1, 0, 0, 1];
        let r = group_confusion(&y, &y, &[U, U, U, P, P, P]).unwrap();
        for c in [r.unprivileged, r.privileged] {
            assert_eq!(c.fpr(), 0.0);
            assert_eq!(c.fnr(), 0.0);
            assert_eq!(c.err(), 0.0);
        }
    }

    #[test]
    fn no_positives_flags_tpr() {
        let r = group_confusion(&[0, 0, 1], &[1, 0, 1], &[U, U, P]).unwrap();
        assert!(r.unprivileged.is_degenerate(Rate::Tpr));
        assert_eq!(r.unprivileged.tpr(), 0.0);
        assert!(r.degenerate().contains(&(U, Rate::Tpr)));
    }

    #[test]
    fn missing_group_is_an_error() {
        assert!(matches!(
            group_confusion(&[1, 0], &[1, 0], &[U, U]),
            Err(MetricsError::MissingGroup(Group::Privileged))
        ));
    }

    #[test]
    fn complementary_rates() {
        let r = group_confusion(
            &[1, 1, 0, 0, 1, 0, 1, 0],
            &[1, 0, 1, 0, 1, 1, 0, 0],
            &[U, U, U, U, P, P, P, P],
        )
        .unwrap();
        for c in [r.unprivileged, r.privileged] {
            assert_eq!(c.tpr() + c.fnr(), 1.0);
            assert_eq!(c.tnr() + c.fpr(), 1.0);
            assert_eq!(c.err(), (c.fn_ + c.fp) as f64 / c.total() as f64);
        }
    }
}
