//! Forward–backward over subsets of used Y points, X points processed in
//! sorted order. Work `O(N_X · N_Y · 2^N_Y)`.

use crate::error::{MatchError, Result};
use crate::exact::problem::argsort;

use super::problem::{PartialMarginalTable, PartialPosteriorProblem};

/// Default cap on `N_Y`.
pub const DEFAULT_SUBSET_CAP: usize = 22;

/// Largest `N_X · 2^N_Y` table kept in memory.
const MAX_CELLS: u128 = 1 << 25;

pub fn marginals_dp_partial(problem: &PartialPosteriorProblem) -> Result<PartialMarginalTable> {
    marginals_dp_partial_capped(problem, DEFAULT_SUBSET_CAP)
}

pub fn marginals_dp_partial_capped(
    problem: &PartialPosteriorProblem,
    cap: usize,
) -> Result<PartialMarginalTable> {
    let (nx, ny) = (problem.n_x(), problem.n_y());
    if ny > cap {
        return Err(MatchError::SizeCap {
            engine: "subset_dp",
            size: ny as u128,
            cap: cap as u128,
        });
    }
    let cells = (nx.max(1) as u128) << ny;
    if cells > MAX_CELLS {
        return Err(MatchError::SizeCap {
            engine: "subset_dp_memory",
            size: cells,
            cap: MAX_CELLS,
        });
    }
    if nx == 0 {
        return Ok(PartialMarginalTable {
            matched: Vec::new(),
            unmatched: Vec::new(),
        });
    }
    let order = argsort(&problem.x);
    let full = 1usize << ny;
    // Per-row shift keeps every factor ≤ 1; ∅ carries exp(−shift).
    let mut w = vec![vec![0.0; ny]; nx];
    let mut w_none = vec![0.0; nx];
    for (k, &i) in order.iter().enumerate() {
        let g: Vec<f64> = (0..ny).map(|j| problem.pair_gain(i, j)).collect();
        let shift = g.iter().copied().fold(0.0, f64::max);
        w[k] = g.iter().map(|v| (v - shift).exp()).collect();
        w_none[k] = (-shift).exp();
    }

    // forward[k][S]: mass of assignments of the first k rows using exactly S
    let mut forward: Vec<Vec<f64>> = Vec::with_capacity(nx);
    let mut cur = vec![0.0; full];
    cur[0] = 1.0;
    for k in 0..nx {
        let mut next = vec![0.0; full];
        for s in 0..full {
            let a = cur[s];
            if a == 0.0 {
                continue;
            }
            next[s] += a * w_none[k];
            let mut free = !s & (full - 1);
            while free != 0 {
                let j = free.trailing_zeros() as usize;
                next[s | 1 << j] += a * w[k][j];
                free &= free - 1;
            }
        }
        let top = next.iter().copied().fold(0.0, f64::max);
        next.iter_mut().for_each(|v| *v /= top);
        forward.push(cur);
        cur = next;
    }

    let mut matched = vec![vec![0.0; ny]; nx];
    let mut unmatched = vec![0.0; nx];
    // backward[S]: mass of completions of rows k.. given S already used
    let mut back = vec![1.0; full];
    for k in (0..nx).rev() {
        let i = order[k];
        let mut prev = vec![0.0; full];
        let f = &forward[k];
        for s in 0..full {
            let mut b = w_none[k] * back[s];
            if f[s] != 0.0 {
                unmatched[i] += f[s] * w_none[k] * back[s];
            }
            let mut free = !s & (full - 1);
            while free != 0 {
                let j = free.trailing_zeros() as usize;
                let t = w[k][j] * back[s | 1 << j];
                b += t;
                if f[s] != 0.0 {
                    matched[i][j] += f[s] * t;
                }
                free &= free - 1;
            }
            prev[s] = b;
        }
        let top = prev.iter().copied().fold(0.0, f64::max);
        prev.iter_mut().for_each(|v| *v /= top);
        back = prev;
    }
    PartialMarginalTable::from_masses(matched, unmatched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialV;
    use crate::partial::enumerate::marginals_bruteforce_partial;

    fn problem(x: Vec<f64>, y: Vec<f64>, u: f64) -> PartialPosteriorProblem {
        let (ux, uy) = (vec![u; x.len()], vec![u; y.len()]);
        PartialPosteriorProblem::from_parts(x, y, 5.0, PotentialV::gaussian(1.0).unwrap(), ux, uy).unwrap()
    }

    #[test]
    fn no_y_means_unmatched() {
        let t = marginals_dp_partial(&problem(vec![0.1, 0.7], vec![], 0.0)).unwrap();
        assert_eq!(t.unmatched, vec![1.0, 1.0]);
    }

    #[test]
    fn agrees_with_enumeration() {
        let p = problem(
            vec![0.12, 0.5, 0.33, 0.8, 0.41],
            vec![0.15, 0.46, 0.9, 0.3, 0.62],
            -0.3,
        );
        let a = marginals_dp_partial(&p).unwrap();
        let b = marginals_bruteforce_partial(&p).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn flat_weights_are_exchangeable() {
        let p = problem(vec![0.5; 3], vec![0.5; 4], 0.2);
        let t = marginals_dp_partial(&p).unwrap();
        assert!(t.unmatched.iter().all(|v| (v - t.unmatched[0]).abs() < 1e-14));
    }
}
