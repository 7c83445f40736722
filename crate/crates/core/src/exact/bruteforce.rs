use crate::error::{MatchError, Result};
use crate::numeric::ScaledAccumulator;

use super::problem::{ExactPosteriorProblem, MarginalTable};

/// Default cap on `n` for factorial enumeration.
pub const DEFAULT_ENUM_CAP: usize = 10;

/// Advances `p` to the next permutation in lexicographic order; returns
/// `false` after the last one.
pub fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Accumulates posterior mass of whole permutations into a marginal table.
#[derive(Clone, Debug)]
pub struct PermutationAccumulator {
    n: usize,
    acc: ScaledAccumulator,
}

impl PermutationAccumulator {
    pub fn new(n: usize) -> Self {
        PermutationAccumulator {
            n,
            acc: ScaledAccumulator::new(n * n),
        }
    }

    /// Adds permutation `pi` with log-weight `log_weight` (i.e. `−H(π)`).
    pub fn add(&mut self, pi: &[usize], log_weight: f64) {
        let w = self.acc.weight(log_weight);
        for (i, &j) in pi.iter().enumerate() {
            self.acc.add(i * self.n + j, w);
        }
    }

    pub fn finish(self) -> Result<MarginalTable> {
        let n = self.n;
        let cells = self.acc.cells();
        MarginalTable::normalize_rows((0..n).map(|i| cells[i * n..(i + 1) * n].to_vec()).collect())
    }
}

/// Exact marginals by summing over all `n!` bijections.
pub fn marginals_bruteforce_exact(problem: &ExactPosteriorProblem) -> Result<MarginalTable> {
    marginals_bruteforce_exact_capped(problem, DEFAULT_ENUM_CAP)
}

pub fn marginals_bruteforce_exact_capped(
    problem: &ExactPosteriorProblem,
    cap: usize,
) -> Result<MarginalTable> {
    let n = problem.n();
    if n > cap {
        return Err(MatchError::SizeCap {
            engine: "bruteforce",
            size: n as u128,
            cap: cap as u128,
        });
    }
    if n == 0 {
        return Ok(MarginalTable { probs: Vec::new() });
    }
    let lw = problem.log_weights();
    let mut acc = PermutationAccumulator::new(n);
    let mut pi: Vec<usize> = (0..n).collect();
    loop {
        let total: f64 = pi.iter().enumerate().map(|(i, &j)| lw[i][j]).sum();
        acc.add(&pi, total);
        if !next_permutation(&mut pi) {
            break;
        }
    }
    acc.finish()
}

/// Marginal row of `row` for a square block of log-weights, by enumeration.
pub(crate) fn block_row_by_enumeration(lw: &[Vec<f64>], row: usize) -> Result<Vec<f64>> {
    let n = lw.len();
    let mut acc = ScaledAccumulator::new(n);
    let mut pi: Vec<usize> = (0..n).collect();
    loop {
        let total: f64 = pi.iter().enumerate().map(|(i, &j)| lw[i][j]).sum();
        let w = acc.weight(total);
        acc.add(pi[row], w);
        if !next_permutation(&mut pi) {
            break;
        }
    }
    let s: f64 = acc.cells().iter().sum();
    if !(s > 0.0) {
        return Err(MatchError::Numeric("block has no feasible bijection".into()));
    }
    Ok(acc.cells().iter().map(|v| v / s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialV;

    #[test]
    fn counts_all_permutations() {
        let mut p: Vec<usize> = (0..5).collect();
        let mut k = 1;
        while next_permutation(&mut p) {
            k += 1;
        }
        assert_eq!(k, 120);
    }

    #[test]
    fn single_point() {
        let prob =
            ExactPosteriorProblem::from_points(vec![0.3], vec![0.9], 1.0, PotentialV::gaussian(1.0).unwrap())
                .unwrap();
        let t = marginals_bruteforce_exact(&prob).unwrap();
        assert_eq!(t.probs, vec![vec![1.0]]);
    }

    #[test]
    fn flat_weights_give_uniform_marginals() {
        // identical points make every W_ij equal
        let prob = ExactPosteriorProblem::from_points(
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            3.0,
            PotentialV::gaussian(1.0).unwrap(),
        )
        .unwrap();
        let t = marginals_bruteforce_exact(&prob).unwrap();
        for r in &t.probs {
            for &v in r {
                assert!((v - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cap_is_reported() {
        let prob = ExactPosteriorProblem::from_points(
            vec![0.0; 4],
            vec![0.0; 4],
            1.0,
            PotentialV::gaussian(1.0).unwrap(),
        )
        .unwrap();
        let err = marginals_bruteforce_exact_capped(&prob, 3).unwrap_err();
        assert!(matches!(err, MatchError::SizeCap { cap: 3, .. }));
    }
}
