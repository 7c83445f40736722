//! Posterior over partial bijections for the partial matching model.
//!
//! Engines: enumeration of all partial bijections, a subset DP over used Y
//! points, and a position sweep whose state is the boundary variable.

pub mod enumerate;
pub mod problem;
pub mod subset_dp;
pub mod sweep;

use serde::{Deserialize, Serialize};

use crate::dist::{Label, MatchDistribution};
use crate::error::{MatchError, Result};

pub use enumerate::{count_partial_bijections, marginals_bruteforce_partial, DEFAULT_PARTIAL_ENUM_CAP};
pub use problem::{check_partial, PartialMarginalTable, PartialPosteriorProblem};
pub use subset_dp::{marginals_dp_partial, DEFAULT_SUBSET_CAP};
pub use sweep::marginals_sweep_partial;

/// `Auto` uses the subset DP while `N_Y` stays at or below this.
pub const AUTO_SUBSET_LIMIT: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartialEngine {
    Bruteforce,
    SubsetDp,
    Sweep,
    #[default]
    Auto,
}

impl PartialEngine {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "bruteforce" | "enum" => Ok(PartialEngine::Bruteforce),
            "dp" | "subset_dp" => Ok(PartialEngine::SubsetDp),
            "sweep" => Ok(PartialEngine::Sweep),
            "auto" => Ok(PartialEngine::Auto),
            other => Err(MatchError::InvalidParameter(format!("unknown partial engine '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PartialEngine::Bruteforce => "bruteforce",
            PartialEngine::SubsetDp => "subset_dp",
            PartialEngine::Sweep => "sweep",
            PartialEngine::Auto => "auto",
        }
    }

    /// The concrete engine `Auto` would pick for this problem.
    pub fn resolve(&self, problem: &PartialPosteriorProblem) -> PartialEngine {
        match self {
            PartialEngine::Auto if problem.n_y() <= AUTO_SUBSET_LIMIT => PartialEngine::SubsetDp,
            PartialEngine::Auto => PartialEngine::Sweep,
            e => *e,
        }
    }

    pub fn run(&self, problem: &PartialPosteriorProblem) -> Result<PartialMarginalTable> {
        match self.resolve(problem) {
            PartialEngine::Bruteforce => marginals_bruteforce_partial(problem),
            PartialEngine::SubsetDp => marginals_dp_partial(problem),
            _ => marginals_sweep_partial(problem),
        }
    }
}

/// Marginal table of the posterior restricted to points in `[lo, hi]`,
/// with the original X and Y indices of the retained points.
pub fn window_table(
    problem: &PartialPosteriorProblem,
    lo: f64,
    hi: f64,
    engine: PartialEngine,
) -> Result<(Vec<usize>, Vec<usize>, PartialMarginalTable)> {
    let inside = |v: f64| v >= lo && v <= hi;
    let xs: Vec<usize> = (0..problem.n_x()).filter(|&i| inside(problem.x[i])).collect();
    let ys: Vec<usize> = (0..problem.n_y()).filter(|&j| inside(problem.y[j])).collect();
    let table = engine.run(&problem.restrict(&xs, &ys))?;
    Ok((xs, ys, table))
}

/// Row of a window table for original X index `i`, relabeled to original
/// Y indices.
pub(crate) fn window_row(xs: &[usize], ys: &[usize], table: &PartialMarginalTable, i: usize) -> Option<MatchDistribution> {
    let k = xs.iter().position(|&a| a == i)?;
    Some(table.row(k).relabel(|l| match l {
        Label::Y(c) => Label::Y(ys[c as usize] as i64),
        Label::Unmatched => Label::Unmatched,
    }))
}

/// Local posterior law of the partner of `X_i` using only the points inside
/// `[lo, hi]`. Y points outside the window get probability zero.
pub fn conditional_marginals_window_partial(
    problem: &PartialPosteriorProblem,
    lo: f64,
    hi: f64,
    i: usize,
    engine: PartialEngine,
) -> Result<MatchDistribution> {
    if i >= problem.n_x() || !(problem.x[i] >= lo && problem.x[i] <= hi) {
        return Err(MatchError::Contract(format!("X_{i} is not inside [{lo}, {hi}]")));
    }
    let (xs, ys, table) = window_table(problem, lo, hi, engine)?;
    Ok(window_row(&xs, &ys, &table, i).expect("X_i lies in the window"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialV;

    fn problem() -> PartialPosteriorProblem {
        PartialPosteriorProblem::from_parts(
            vec![0.1, 0.35, 0.6, 0.9],
            vec![0.12, 0.4, 0.58, 0.7],
            6.0,
            PotentialV::gaussian(1.0).unwrap(),
            vec![0.0; 4],
            vec![0.0; 4],
        )
        .unwrap()
    }

    #[test]
    fn full_window_is_global() {
        let p = problem();
        let g = marginals_dp_partial(&p).unwrap();
        for i in 0..4 {
            let w = conditional_marginals_window_partial(&p, 0.0, 1.0, i, PartialEngine::Auto).unwrap();
            assert_eq!(w, g.row(i));
        }
    }

    #[test]
    fn isolated_point_is_unmatched() {
        let p = problem();
        let w = conditional_marginals_window_partial(&p, 0.85, 0.95, 3, PartialEngine::Auto).unwrap();
        assert_eq!(w, MatchDistribution::point_mass(Label::Unmatched));
    }

    #[test]
    fn outside_window_rejected() {
        assert!(conditional_marginals_window_partial(&problem(), 0.5, 0.7, 0, PartialEngine::Auto).is_err());
    }
}
