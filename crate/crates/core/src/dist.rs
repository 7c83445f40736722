//! Match distributions over candidate partners.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{MatchError, Result};

/// A candidate partner: a Y index, or no partner at all.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Unmatched,
    Y(i64),
}

impl Label {
    /// Serialized code: the Y index, or `-1` for no partner. Only meaningful
    /// for non-negative Y indices.
    pub fn code(self) -> i64 {
        match self {
            Label::Unmatched => -1,
            Label::Y(j) => j,
        }
    }

    pub fn from_code(code: i64) -> Self {
        if code < 0 {
            Label::Unmatched
        } else {
            Label::Y(code)
        }
    }
}

impl From<Option<usize>> for Label {
    fn from(v: Option<usize>) -> Self {
        match v {
            Some(j) => Label::Y(j as i64),
            None => Label::Unmatched,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Unmatched => write!(f, "∅"),
            Label::Y(j) => write!(f, "{j}"),
        }
    }
}

/// Probability vector over distinct labels. Entries are kept sorted by label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchDistribution {
    entries: Vec<(Label, f64)>,
}

pub const NORMALIZATION_TOL: f64 = 1e-12;

impl MatchDistribution {
    /// Builds a distribution, merging nothing: labels must be distinct and
    /// probabilities nonnegative summing to one.
    pub fn new(entries: Vec<(Label, f64)>) -> Result<Self> {
        let d = Self::from_entries(entries);
        d.validate()?;
        Ok(d)
    }

    /// Builds without validation; entries are sorted by label.
    pub fn from_entries(mut entries: Vec<(Label, f64)>) -> Self {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        MatchDistribution { entries }
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(entries: Vec<(Label, f64)>) -> Result<Self> {
        let total: f64 = entries.iter().map(|e| e.1).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(MatchError::Numeric(format!("weights sum to {total}")));
        }
        Ok(Self::from_entries(
            entries.into_iter().map(|(l, w)| (l, w / total)).collect(),
        ))
    }

    pub fn point_mass(label: Label) -> Self {
        MatchDistribution {
            entries: vec![(label, 1.0)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(MatchError::Contract("duplicate labels in distribution".into()));
        }
        if self.entries.iter().any(|e| !(e.1 >= 0.0)) {
            return Err(MatchError::Contract("negative probability".into()));
        }
        let s = self.total();
        if (s - 1.0).abs() > NORMALIZATION_TOL {
            return Err(MatchError::Contract(format!("probabilities sum to {s}")));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn entries(&self) -> &[(Label, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Probability of `label`, zero if absent.
    pub fn prob(&self, label: Label) -> f64 {
        self.entries
            .binary_search_by(|e| e.0.cmp(&label))
            .map(|k| self.entries[k].1)
            .unwrap_or(0.0)
    }

    pub fn contains(&self, label: Label) -> bool {
        self.entries.binary_search_by(|e| e.0.cmp(&label)).is_ok()
    }

    /// Label of largest probability (first on ties).
    pub fn argmax(&self) -> Option<Label> {
        self.entries
            .iter()
            .fold(None, |best: Option<(Label, f64)>, &(l, p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((l, p)),
            })
            .map(|b| b.0)
    }

    /// Applies `f` to every label.
    pub fn relabel(&self, mut f: impl FnMut(Label) -> Label) -> Self {
        Self::from_entries(self.entries.iter().map(|&(l, p)| (f(l), p)).collect())
    }

    /// Drops entries with probability `<= floor`.
    pub fn pruned(&self, floor: f64) -> Self {
        MatchDistribution {
            entries: self.entries.iter().copied().filter(|e| e.1 > floor).collect(),
        }
    }
}

/// Total variation distance over the union of the two label sets.
pub fn tv_distance(p: &MatchDistribution, q: &MatchDistribution) -> f64 {
    let mut diff: BTreeMap<Label, f64> = BTreeMap::new();
    for &(l, v) in p.entries() {
        *diff.entry(l).or_default() += v;
    }
    for &(l, v) in q.entries() {
        *diff.entry(l).or_default() -= v;
    }
    0.5 * diff.values().map(|d| d.abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(v: &[(i64, f64)]) -> MatchDistribution {
        MatchDistribution::new(v.iter().map(|&(j, p)| (Label::from_code(j), p)).collect()).unwrap()
    }

    #[test]
    fn tv_examples() {
        let p = d(&[(0, 0.6), (1, 0.4)]);
        let q = d(&[(0, 0.4), (1, 0.6)]);
        assert_eq!(tv_distance(&p, &p), 0.0);
        assert!((tv_distance(&p, &q) - 0.2).abs() < 1e-15);
        let r = d(&[(-1, 1.0)]);
        assert!((tv_distance(&p, &r) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(MatchDistribution::new(vec![(Label::Y(0), 0.5)]).is_err());
        assert!(MatchDistribution::new(vec![(Label::Y(0), 0.5), (Label::Y(0), 0.5)]).is_err());
        assert!(MatchDistribution::new(vec![(Label::Y(0), 1.5), (Label::Y(1), -0.5)]).is_err());
    }

    #[test]
    fn lookup_and_codes() {
        let p = d(&[(-1, 0.25), (3, 0.75)]);
        assert_eq!(p.prob(Label::Unmatched), 0.25);
        assert_eq!(p.prob(Label::Y(7)), 0.0);
        assert_eq!(p.argmax(), Some(Label::Y(3)));
        assert_eq!(Label::Unmatched.code(), -1);
    }
}
