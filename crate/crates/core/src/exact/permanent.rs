//! Ryser permanents and the minor identity
//! `P_i(j) = W_ij · perm(W without row i, column j) / perm(W)`.

use crate::error::{MatchError, Result};
use crate::numeric::{log_sum_exp, CompensatedSum};

use super::problem::{ExactPosteriorProblem, MarginalTable};

/// Default cap on `n` for the permanent engine (work is `O(2^n n^2)`).
pub const DEFAULT_PERMANENT_CAP: usize = 20;

/// Row sums of every column subset, split into a low and a high half so each
/// sum is formed from at most `ceil(n/2)` additions (no incremental drift).
struct SubsetRowSums {
    n: usize,
    low_bits: usize,
    low: Vec<f64>,
    high: Vec<f64>,
}

impl SubsetRowSums {
    fn new(a: &[Vec<f64>]) -> Self {
        let n = a.len();
        let low_bits = n / 2;
        let high_bits = n - low_bits;
        let table = |offset: usize, bits: usize| {
            let mut t = vec![0.0; (1usize << bits) * n];
            for mask in 1usize..(1 << bits) {
                let bit = mask.trailing_zeros() as usize;
                let prev = mask & (mask - 1);
                for i in 0..n {
                    t[mask * n + i] = t[prev * n + i] + a[i][offset + bit];
                }
            }
            t
        };
        SubsetRowSums {
            n,
            low_bits,
            low: table(0, low_bits),
            high: table(low_bits, high_bits),
        }
    }

    #[inline]
    fn fill(&self, mask: usize, out: &mut [f64]) {
        let lo = mask & ((1 << self.low_bits) - 1);
        let hi = mask >> self.low_bits;
        let n = self.n;
        for i in 0..n {
            out[i] = self.low[lo * n + i] + self.high[hi * n + i];
        }
    }
}

/// Permanent of a nonnegative square matrix by Ryser's formula, visiting
/// column subsets in Gray-code order.
pub fn permanent(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    if n == 0 {
        return 1.0;
    }
    let sums = SubsetRowSums::new(a);
    let mut r = vec![0.0; n];
    let mut total = CompensatedSum::default();
    for k in 1usize..(1 << n) {
        let mask = k ^ (k >> 1);
        sums.fill(mask, &mut r);
        let sign = if (n - mask.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
        total.add(sign * r.iter().product::<f64>());
    }
    total.value()
}

/// Sinkhorn scaling in log space, returning the rescaled linear matrix.
/// Marginals are invariant under row and column scaling.
pub(crate) fn balanced(lw: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = lw.len();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut buf = vec![0.0; n];
    for _ in 0..60 {
        for i in 0..n {
            for j in 0..n {
                buf[j] = lw[i][j] + b[j];
            }
            a[i] = -log_sum_exp(&buf);
        }
        for j in 0..n {
            for i in 0..n {
                buf[i] = lw[i][j] + a[i];
            }
            b[j] = -log_sum_exp(&buf);
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(MatchError::Numeric("weight matrix has an all-zero row or column".into()));
        }
        let worst = (0..n)
            .map(|i| {
                for j in 0..n {
                    buf[j] = lw[i][j] + a[i] + b[j];
                }
                log_sum_exp(&buf).abs()
            })
            .fold(0.0, f64::max);
        if worst < 1e-3 {
            break;
        }
    }
    Ok((0..n)
        .map(|i| (0..n).map(|j| (lw[i][j] + a[i] + b[j]).exp()).collect())
        .collect())
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap || n >= usize::BITS as usize - 1 {
        return Err(MatchError::SizeCap {
            engine: "permanent",
            size: n as u128,
            cap: cap as u128,
        });
    }
    Ok(())
}

/// `G_ij = ∂perm/∂a_ij` for all entries (or one row), by differentiating
/// Ryser's formula.
fn ryser_gradient(a: &[Vec<f64>], only_row: Option<usize>) -> Vec<Vec<f64>> {
    let n = a.len();
    let sums = SubsetRowSums::new(a);
    let rows: Vec<usize> = match only_row {
        Some(r) => vec![r],
        None => (0..n).collect(),
    };
    let mut g = vec![vec![CompensatedSum::default(); n]; rows.len()];
    let mut r = vec![0.0; n];
    let mut prefix = vec![1.0; n + 1];
    let mut suffix = vec![1.0; n + 1];
    for k in 1usize..(1 << n) {
        let mask = k ^ (k >> 1);
        sums.fill(mask, &mut r);
        let sign = if (n - mask.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
        for i in 0..n {
            prefix[i + 1] = prefix[i] * r[i];
        }
        for i in (0..n).rev() {
            suffix[i] = suffix[i + 1] * r[i];
        }
        for (slot, &i) in rows.iter().enumerate() {
            let e = sign * prefix[i] * suffix[i + 1];
            let mut m = mask;
            while m != 0 {
                let j = m.trailing_zeros() as usize;
                g[slot][j].add(e);
                m &= m - 1;
            }
        }
    }
    g.into_iter()
        .map(|row| row.into_iter().map(|c| c.value()).collect())
        .collect()
}

pub fn marginals_permanent_exact(problem: &ExactPosteriorProblem) -> Result<MarginalTable> {
    marginals_permanent_exact_capped(problem, DEFAULT_PERMANENT_CAP)
}

pub fn marginals_permanent_exact_capped(
    problem: &ExactPosteriorProblem,
    cap: usize,
) -> Result<MarginalTable> {
    let n = problem.n();
    check_cap(n, cap)?;
    if n == 0 {
        return Ok(MarginalTable { probs: Vec::new() });
    }
    let a = balanced(problem.log_weights())?;
    let g = ryser_gradient(&a, None);
    let probs = (0..n)
        .map(|i| (0..n).map(|j| a[i][j] * g[i][j]).collect())
        .collect();
    MarginalTable::normalize_rows(probs)
}

/// Marginal row of `row` for a square block of log-weights.
pub(crate) fn block_row_by_permanent(lw: &[Vec<f64>], row: usize, cap: usize) -> Result<Vec<f64>> {
    let n = lw.len();
    check_cap(n, cap)?;
    let a = balanced(lw)?;
    let g = ryser_gradient(&a, Some(row));
    let mut p: Vec<f64> = (0..n).map(|j| (a[row][j] * g[0][j]).max(0.0)).collect();
    let s: f64 = p.iter().sum();
    if !(s > 0.0) {
        return Err(MatchError::Numeric("block has no feasible bijection".into()));
    }
    p.iter_mut().for_each(|v| *v /= s);
    Ok(p)
}
