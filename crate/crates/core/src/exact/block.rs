use serde::{Deserialize, Serialize};

use crate::dist::{Label, MatchDistribution};
use crate::error::{MatchError, Result};

use super::bruteforce::block_row_by_enumeration;
use super::permanent::{block_row_by_permanent, DEFAULT_PERMANENT_CAP};
use super::problem::{sort_maps, ExactPosteriorProblem};

/// Blocks up to this size are enumerated; larger ones go to Ryser.
pub const BLOCK_ENUM_CAP: usize = 9;

/// Which engine produced a block marginal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockEngine {
    Enumeration,
    Permanent,
}

/// Marginal of `row` under the block posterior over bijections of a square
/// block of log-weights.
pub fn block_row_marginal(lw: &[Vec<f64>], row: usize) -> Result<(Vec<f64>, BlockEngine)> {
    let k = lw.len();
    if row >= k || lw.iter().any(|r| r.len() != k) {
        return Err(MatchError::Contract("block must be square and contain the row".into()));
    }
    if k <= BLOCK_ENUM_CAP {
        Ok((block_row_by_enumeration(lw, row)?, BlockEngine::Enumeration))
    } else if k <= DEFAULT_PERMANENT_CAP {
        Ok((block_row_by_permanent(lw, row, DEFAULT_PERMANENT_CAP)?, BlockEngine::Permanent))
    } else {
        Err(MatchError::SizeCap {
            engine: "block",
            size: k as u128,
            cap: DEFAULT_PERMANENT_CAP as u128,
        })
    }
}

/// Law of the partner of the X point of sorted rank `k` given that no pair
/// crosses the cuts at `k − m − ½` and `k + m + ½`: the block of sorted ranks
/// `[k − m, k + m]` (clipped) is matched onto itself. Labels are original Y
/// indices.
pub fn conditional_marginals_empty_boundary(
    problem: &ExactPosteriorProblem,
    k: usize,
    m: usize,
) -> Result<MatchDistribution> {
    let n = problem.n();
    if k >= n {
        return Err(MatchError::Contract(format!("sorted rank {k} outside [0, {n})")));
    }
    let maps = sort_maps(&problem.x, &problem.y);
    let lo = k.saturating_sub(m);
    let hi = (k + m).min(n - 1);
    let lw: Vec<Vec<f64>> = (lo..=hi)
        .map(|a| (lo..=hi).map(|c| problem.log_weight(maps.s[a], maps.t[c])).collect())
        .collect();
    let (row, _) = block_row_marginal(&lw, k - lo)?;
    Ok(MatchDistribution::from_entries(
        row.iter()
            .enumerate()
            .filter(|e| *e.1 > 0.0)
            .map(|(c, &p)| (Label::Y(maps.t[lo + c] as i64), p))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialV;

    #[test]
    fn singleton_block_is_same_rank() {
        let p = ExactPosteriorProblem::from_points(
            vec![0.2, 0.8, 0.5],
            vec![0.9, 0.1, 0.45],
            3.0,
            PotentialV::gaussian(1.0).unwrap(),
        )
        .unwrap();
        // X rank 1 is index 2; Y rank 1 is index 2
        let d = conditional_marginals_empty_boundary(&p, 1, 0).unwrap();
        assert_eq!(d, MatchDistribution::point_mass(Label::Y(2)));
    }

    #[test]
    fn enumeration_and_permanent_agree_on_blocks() {
        let lw: Vec<Vec<f64>> = (0..7)
            .map(|i| (0..7).map(|j| -0.5 * ((i as f64) - (j as f64) * 1.1).powi(2)).collect())
            .collect();
        for row in 0..7 {
            let a = block_row_by_enumeration(&lw, row).unwrap();
            let b = block_row_by_permanent(&lw, row, 20).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }
}
