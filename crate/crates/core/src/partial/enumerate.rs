use crate::error::{MatchError, Result};
use crate::exact::problem::argsort;
use crate::numeric::ScaledAccumulator;

use super::problem::{PartialMarginalTable, PartialPosteriorProblem};

/// Default cap on the number of partial bijections enumerated.
pub const DEFAULT_PARTIAL_ENUM_CAP: u128 = 10_000_000;

/// Number of partial bijections between sets of sizes `a` and `b`:
/// `Σ_k C(a,k) C(b,k) k!`. Errors on `u128` overflow.
pub fn count_partial_bijections(a: u64, b: u64) -> Result<u128> {
    let overflow = || MatchError::SizeCap {
        engine: "count_partial_bijections",
        size: u128::MAX,
        cap: u128::MAX,
    };
    let (a, b) = (a as u128, b as u128);
    let mut total: u128 = 0;
    // term_k = a!/(a-k)! · C(b,k)
    let mut falling: u128 = 1;
    let mut binom: u128 = 1;
    for k in 0..=a.min(b) {
        if k > 0 {
            falling = falling.checked_mul(a - k + 1).ok_or_else(overflow)?;
            binom = binom.checked_mul(b - k + 1).ok_or_else(overflow)? / k;
        }
        let term = falling.checked_mul(binom).ok_or_else(overflow)?;
        total = total.checked_add(term).ok_or_else(overflow)?;
    }
    Ok(total)
}

pub fn marginals_bruteforce_partial(problem: &PartialPosteriorProblem) -> Result<PartialMarginalTable> {
    marginals_bruteforce_partial_capped(problem, DEFAULT_PARTIAL_ENUM_CAP)
}

/// Exact marginals by visiting every partial bijection, X points taken in
/// sorted position order.
pub fn marginals_bruteforce_partial_capped(
    problem: &PartialPosteriorProblem,
    cap: u128,
) -> Result<PartialMarginalTable> {
    let (nx, ny) = (problem.n_x(), problem.n_y());
    let count = count_partial_bijections(nx as u64, ny as u64)?;
    if count > cap {
        return Err(MatchError::SizeCap {
            engine: "bruteforce_partial",
            size: count,
            cap,
        });
    }
    let order = argsort(&problem.x);
    let mut walk = Walk {
        problem,
        order: &order,
        ny,
        used: vec![false; ny],
        choice: vec![None; nx],
        acc: ScaledAccumulator::new(nx * (ny + 1)),
    };
    walk.visit(0, 0.0);
    let cells = walk.acc.cells();
    let matched = (0..nx)
        .map(|i| cells[i * (ny + 1)..i * (ny + 1) + ny].to_vec())
        .collect();
    let unmatched = (0..nx).map(|i| cells[i * (ny + 1) + ny]).collect();
    PartialMarginalTable::from_masses(matched, unmatched)
}

struct Walk<'a> {
    problem: &'a PartialPosteriorProblem,
    order: &'a [usize],
    ny: usize,
    used: Vec<bool>,
    choice: Vec<Option<usize>>,
    acc: ScaledAccumulator,
}

impl Walk<'_> {
    // `gain` is −H relative to the empty matching
    fn visit(&mut self, depth: usize, gain: f64) {
        if depth == self.order.len() {
            let w = self.acc.weight(gain);
            let stride = self.ny + 1;
            for (i, c) in self.choice.iter().enumerate() {
                self.acc.add(i * stride + c.unwrap_or(self.ny), w);
            }
            return;
        }
        let i = self.order[depth];
        self.choice[i] = None;
        self.visit(depth + 1, gain);
        for j in 0..self.ny {
            if !self.used[j] {
                self.used[j] = true;
                self.choice[i] = Some(j);
                self.visit(depth + 1, gain + self.problem.pair_gain(i, j));
                self.used[j] = false;
            }
        }
        self.choice[i] = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialV;

    #[test]
    fn small_counts() {
        assert_eq!(count_partial_bijections(1, 1).unwrap(), 2);
        assert_eq!(count_partial_bijections(0, 5).unwrap(), 1);
        assert_eq!(count_partial_bijections(2, 2).unwrap(), 7);
        assert_eq!(count_partial_bijections(3, 3).unwrap(), 34);
    }

    #[test]
    fn overflow_is_an_error() {
        assert!(count_partial_bijections(60, 60).is_err());
    }

    #[test]
    fn lone_x_is_unmatched() {
        let p = PartialPosteriorProblem::from_parts(
            vec![0.5],
            vec![],
            10.0,
            PotentialV::gaussian(1.0).unwrap(),
            vec![0.0],
            vec![],
        )
        .unwrap();
        let t = marginals_bruteforce_partial(&p).unwrap();
        assert_eq!(t.unmatched, vec![1.0]);
    }

    #[test]
    fn two_configuration_ratio() {
        let p = PartialPosteriorProblem::from_parts(
            vec![0.5],
            vec![0.53],
            10.0,
            PotentialV::gaussian(1.0).unwrap(),
            vec![0.2],
            vec![-0.1],
        )
        .unwrap();
        let t = marginals_bruteforce_partial(&p).unwrap();
        let dh = p.hamiltonian(&[Some(0)]).unwrap() - p.hamiltonian(&[None]).unwrap();
        assert!((t.matched[0][0] / t.unmatched[0] - (-dh).exp()).abs() < 1e-12);
    }
}
