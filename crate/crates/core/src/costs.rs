//! Matching cost functionals `f(P, j*)` and their empirical averages.
//!
//! `∅` is an ordinary label throughout, so partial-model rows whose true
//! partner is `∅` are scored like any other.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{Label, MatchDistribution};
use crate::error::{MatchError, Result};
use crate::rng;

pub use crate::dist::tv_distance;

/// Slack when locating the boundary rank against `1 − α`.
const CUM_TOL: f64 = 1e-12;

/// Randomized credible set: `members ∪ {boundary}` with probability `xi`,
/// `members` alone otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CredibleSet {
    pub alpha: f64,
    /// Labels of ranks `1..k−1`.
    pub members: Vec<Label>,
    /// Label of rank `k`.
    pub boundary: Label,
    pub xi: f64,
    /// One draw of the randomized set.
    pub realized: Vec<Label>,
}

impl CredibleSet {
    /// `k`, the rank of the boundary label.
    pub fn k(&self) -> usize {
        self.members.len() + 1
    }

    pub fn expected_cardinality(&self) -> f64 {
        self.members.len() as f64 + self.xi
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(MatchError::Domain {
            what: "alpha",
            value: alpha,
            domain: "[0, 1)",
        })
    }
}

/// Boundary rank `k` (1-based) and `ξ` for values sorted descending.
fn boundary(sorted: &[f64], alpha: f64) -> Result<(usize, f64)> {
    let target = 1.0 - alpha;
    let mut cum = 0.0;
    for (r, &p) in sorted.iter().enumerate() {
        if cum + p >= target - CUM_TOL && p > 0.0 {
            // earlier ranks fell short, so target − cum > 0
            return Ok((r + 1, ((target - cum) / p).min(1.0)));
        }
        cum += p;
    }
    Err(MatchError::Numeric("distribution mass below the credible level".into()))
}

fn descending(p: &MatchDistribution) -> Vec<f64> {
    let mut v: Vec<f64> = p.entries().iter().map(|e| e.1).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Builds `C(P)`: probabilities sorted descending with ties in seeded
/// uniform random order; `k` minimal and `ξ ∈ (0, 1]` with
/// `P_s(1) + … + P_s(k−1) + ξ P_s(k) = 1 − α`.
pub fn credible_set(p: &MatchDistribution, alpha: f64, seed: u64) -> Result<CredibleSet> {
    check_alpha(alpha)?;
    let mut r = rng::stream(seed, 0);
    let mut entries: Vec<(Label, f64)> = p.entries().to_vec();
    entries.shuffle(&mut r);
    // stable sort keeps the shuffled order among ties
    entries.sort_by(|a, b| b.1.total_cmp(&a.1));
    let values: Vec<f64> = entries.iter().map(|e| e.1).collect();
    let (k, xi) = boundary(&values, alpha)?;
    let members: Vec<Label> = entries[..k - 1].iter().map(|e| e.0).collect();
    let boundary = entries[k - 1].0;
    let mut realized = members.clone();
    if r.random::<f64>() < xi {
        realized.push(boundary);
    }
    Ok(CredibleSet {
        alpha,
        members,
        boundary,
        xi,
        realized,
    })
}

/// `E|C(P)| = (k − 1) + ξ`; independent of the tie order.
pub fn expected_cardinality(p: &MatchDistribution, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let (k, xi) = boundary(&descending(p), alpha)?;
    Ok((k - 1) as f64 + xi)
}

/// `P(j* ∈ C(P))`, averaged exactly over the random order of labels tied
/// with `j*`. A `j*` outside the support has coverage 0.
pub fn expected_coverage(p: &MatchDistribution, j_star: Label, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let (k, xi) = boundary(&descending(p), alpha)?;
    let pj = p.prob(j_star);
    if !(pj > 0.0) {
        return Ok(0.0);
    }
    let above = p.entries().iter().filter(|e| e.1 > pj).count();
    let tied = p.entries().iter().filter(|e| e.1 == pj).count();
    let total: f64 = (above + 1..=above + tied)
        .map(|rank| match rank.cmp(&k) {
            std::cmp::Ordering::Less => 1.0,
            std::cmp::Ordering::Equal => xi,
            std::cmp::Ordering::Greater => 0.0,
        })
        .sum();
    Ok(total / tied as f64)
}

/// `P(j*)`, zero when absent.
pub fn cost_true_match(p: &MatchDistribution, j_star: Label) -> f64 {
    p.prob(j_star)
}

/// A named cost functional.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostSpec {
    TrueMatchProb,
    ExpectedCard { alpha: f64 },
    Coverage { alpha: f64 },
}

impl CostSpec {
    /// Parses `true_match_prob`, `expected_card:<α>` or `coverage:<α>`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || MatchError::InvalidParameter(format!("unknown cost '{s}'"));
        let alpha = |v: &str| -> Result<f64> {
            let a: f64 = v.parse().map_err(|_| bad())?;
            check_alpha(a)?;
            Ok(a)
        };
        match s.split_once(':') {
            None if s == "true_match_prob" => Ok(CostSpec::TrueMatchProb),
            Some(("expected_card", a)) => Ok(CostSpec::ExpectedCard { alpha: alpha(a)? }),
            Some(("coverage", a)) => Ok(CostSpec::Coverage { alpha: alpha(a)? }),
            _ => Err(bad()),
        }
    }

    pub fn eval(&self, p: &MatchDistribution, j_star: Label) -> Result<f64> {
        match *self {
            CostSpec::TrueMatchProb => Ok(cost_true_match(p, j_star)),
            CostSpec::ExpectedCard { alpha } => expected_cardinality(p, alpha),
            CostSpec::Coverage { alpha } => expected_coverage(p, j_star, alpha),
        }
    }
}

impl fmt::Display for CostSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostSpec::TrueMatchProb => write!(f, "true_match_prob"),
            CostSpec::ExpectedCard { alpha } => write!(f, "expected_card:{alpha}"),
            CostSpec::Coverage { alpha } => write!(f, "coverage:{alpha}"),
        }
    }
}

/// `(1/N) Σ_i f(P_i, π*(i))`.
pub fn empirical_cost_average(rows: &[MatchDistribution], truth: &[Label], spec: CostSpec) -> Result<f64> {
    if rows.len() != truth.len() {
        return Err(MatchError::Contract(format!(
            "{} rows but {} truth labels",
            rows.len(),
            truth.len()
        )));
    }
    if rows.is_empty() {
        return Err(MatchError::Contract("no rows to average".into()));
    }
    let mut s = 0.0;
    for (p, &j) in rows.iter().zip(truth) {
        s += spec.eval(p, j)?;
    }
    Ok(s / rows.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(v: &[(i64, f64)]) -> MatchDistribution {
        MatchDistribution::new(v.iter().map(|&(j, p)| (Label::from_code(j), p)).collect()).unwrap()
    }

    #[test]
    fn three_label_example() {
        let p = d(&[(0, 0.6), (1, 0.3), (2, 0.1)]);
        let c = credible_set(&p, 0.1, 0).unwrap();
        assert_eq!((c.k(), c.xi), (2, 1.0));
        assert_eq!(expected_cardinality(&p, 0.1).unwrap(), 2.0);
        assert_eq!(expected_coverage(&p, Label::Y(0), 0.1).unwrap(), 1.0);
        assert_eq!(expected_coverage(&p, Label::Y(2), 0.1).unwrap(), 0.0);
        assert_eq!(cost_true_match(&p, Label::Y(1)), 0.3);
    }

    #[test]
    fn uniform_full_coverage() {
        let p = d(&[(0, 0.25), (1, 0.25), (2, 0.25), (3, 0.25)]);
        assert_eq!(expected_cardinality(&p, 0.0).unwrap(), 4.0);
    }

    #[test]
    fn point_mass_boundary() {
        let p = MatchDistribution::point_mass(Label::Unmatched);
        let c = credible_set(&p, 0.3, 5).unwrap();
        assert_eq!(c.k(), 1);
        assert!((c.xi - 0.7).abs() < 1e-15);
    }

    #[test]
    fn tied_coverage_averages_ranks() {
        // k = 2 with ξ = 0.6; the two tied labels split ranks 1 and 2
        let p = d(&[(0, 0.5), (1, 0.5)]);
        let cov = expected_coverage(&p, Label::Y(1), 0.2).unwrap();
        assert!((cov - (1.0 + 0.6) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_domain() {
        let p = MatchDistribution::point_mass(Label::Y(0));
        assert!(credible_set(&p, 1.0, 0).is_err());
        assert!(credible_set(&p, -0.1, 0).is_err());
    }

    #[test]
    fn spec_round_trip() {
        for s in ["true_match_prob", "expected_card:0.1", "coverage:0.05"] {
            assert_eq!(CostSpec::parse(s).unwrap().to_string(), s);
        }
        assert!(CostSpec::parse("coverage").is_err());
        assert!(CostSpec::parse("coverage:2").is_err());
    }

    #[test]
    fn misaligned_lengths() {
        let p = MatchDistribution::point_mass(Label::Y(0));
        assert!(empirical_cost_average(&[p], &[], CostSpec::TrueMatchProb).is_err());
    }
}
