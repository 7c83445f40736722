//! Banded transfer-matrix engine.
//!
//! Restricts the posterior to bijections with `|π_st(k) − k| ≤ B` in sorted
//! coordinates and sweeps the sorted X ranks left to right. Before row `k`
//! the state records which sorted-Y columns in `[k − B, k + B)` are already
//! used; columns left of the window must be used and columns right of it
//! cannot be. This is the boundary variable at `k − ½` plus the partial
//! injection inside the band.

use std::collections::HashMap;

use crate::error::{MatchError, Result};
use crate::model::PotentialV;

use super::problem::{sort_maps, ExactPosteriorProblem, MarginalTable};

/// Band used when none is configured.
pub const DEFAULT_BAND: usize = 20;

/// Largest band representable in the 64-bit state encoding.
pub const MAX_BAND: usize = 31;

/// States whose optimistic log-mass falls this far below the best state of
/// their layer are dropped.
pub(crate) const PRUNE_LOG: f64 = 50.0;

/// Exact marginals of the band-restricted posterior.
pub fn marginals_banded_exact(problem: &ExactPosteriorProblem, band: usize) -> Result<MarginalTable> {
    let n = problem.n();
    if n == 0 {
        return Ok(MarginalTable { probs: Vec::new() });
    }
    let maps = sort_maps(&problem.x, &problem.y);
    let lw = problem.sorted_log_weights(&maps);
    let xs: Vec<f64> = maps.s.iter().map(|&i| problem.x[i]).collect();
    let ys: Vec<f64> = maps.t.iter().map(|&j| problem.y[j]).collect();
    let sorted = banded_sorted(&lw, &xs, &ys, problem.scale, &problem.potential, band, PRUNE_LOG)?;
    let mut probs = vec![vec![0.0; n]; n];
    for (k, row) in sorted.iter().enumerate() {
        for (c, &p) in row.iter().enumerate() {
            probs[maps.s[k]][maps.t[c]] = p;
        }
    }
    Ok(MarginalTable { probs })
}

/// Banded marginals for log-weights already in sorted order (`xs`, `ys`
/// ascending). Returns the table in sorted coordinates.
pub(crate) fn banded_sorted(
    lw: &[Vec<f64>],
    xs: &[f64],
    ys: &[f64],
    scale: f64,
    potential: &PotentialV,
    band: usize,
    prune_log: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = lw.len();
    let b = band.min(n.saturating_sub(1));
    if b > MAX_BAND {
        return Err(MatchError::SizeCap {
            engine: "banded",
            size: b as u128,
            cap: MAX_BAND as u128,
        });
    }
    let full: u64 = (1u64 << b) - 1;
    let col = |k: usize, bit: usize| -> Option<usize> {
        let c = k as i64 - b as i64 + bit as i64;
        (c >= 0 && (c as usize) < n).then_some(c as usize)
    };

    // linear row weights relative to the row maximum
    let row_w: Vec<Vec<f64>> = lw
        .iter()
        .map(|r| {
            let m = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            r.iter().map(|v| (v - m).exp()).collect()
        })
        .collect();
    // excess energy any future row must pay for an unused column left of k
    let hole_cost = |k: usize, c: usize| -> f64 {
        let d = scale * (xs[k] - ys[c]);
        if d > 0.0 {
            potential.tail_min(d)
        } else {
            0.0
        }
    };

    let mut forward: Vec<Vec<(u64, f64)>> = Vec::with_capacity(n + 1);
    forward.push(vec![(full, 1.0)]);
    for k in 0..n {
        let mut next: HashMap<u64, f64> = HashMap::new();
        for &(mask, a) in &forward[k] {
            for bit in 0..=2 * b {
                if mask >> bit & 1 == 1 {
                    continue;
                }
                let Some(c) = col(k, bit) else { continue };
                let m = mask | 1 << bit;
                if m & 1 == 0 {
                    continue;
                }
                let w = row_w[k][c];
                if w > 0.0 {
                    *next.entry(m >> 1).or_insert(0.0) += a * w;
                }
            }
        }
        let mut layer: Vec<(u64, f64)> = next.into_iter().collect();
        layer.sort_unstable_by_key(|e| e.0);
        if k + 1 < n {
            let scored: Vec<f64> = layer
                .iter()
                .map(|&(mask, a)| {
                    let mut h = 0.0;
                    for bit in 0..b {
                        if mask >> bit & 1 == 0 {
                            if let Some(c) = col(k + 1, bit) {
                                h += hole_cost(k + 1, c);
                            }
                        }
                    }
                    a.ln() - h
                })
                .collect();
            let best = scored.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            layer = layer
                .into_iter()
                .zip(scored)
                .filter(|(_, s)| *s >= best - prune_log)
                .map(|(e, _)| e)
                .collect();
        }
        let top = layer.iter().map(|e| e.1).fold(0.0, f64::max);
        if !(top > 0.0) {
            return Err(MatchError::Numeric("banded sweep lost all states".into()));
        }
        layer.iter_mut().for_each(|e| e.1 /= top);
        forward.push(layer);
    }
    if !forward[n].iter().any(|e| e.0 == full) {
        return Err(MatchError::Numeric("no feasible bijection within the band".into()));
    }

    let mut probs = vec![vec![0.0; n]; n];
    let mut beta: HashMap<u64, f64> = HashMap::from([(full, 1.0)]);
    for k in (0..n).rev() {
        let mut prev: HashMap<u64, f64> = HashMap::with_capacity(forward[k].len());
        for &(mask, a) in &forward[k] {
            let mut bsum = 0.0;
            for bit in 0..=2 * b {
                if mask >> bit & 1 == 1 {
                    continue;
                }
                let Some(c) = col(k, bit) else { continue };
                let m = mask | 1 << bit;
                if m & 1 == 0 {
                    continue;
                }
                let Some(&bn) = beta.get(&(m >> 1)) else { continue };
                let t = row_w[k][c] * bn;
                bsum += t;
                probs[k][c] += a * t;
            }
            if bsum > 0.0 {
                prev.insert(mask, bsum);
            }
        }
        let top = prev.values().copied().fold(0.0, f64::max);
        if !(top > 0.0) {
            return Err(MatchError::Numeric("banded backward pass lost all states".into()));
        }
        prev.values_mut().for_each(|v| *v /= top);
        beta = prev;
    }
    Ok(MarginalTable::normalize_rows(probs)?.probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::bruteforce::marginals_bruteforce_exact;

    fn problem(x: Vec<f64>, y: Vec<f64>, scale: f64) -> ExactPosteriorProblem {
        ExactPosteriorProblem::from_points(x, y, scale, PotentialV::gaussian(1.0).unwrap()).unwrap()
    }

    #[test]
    fn zero_band_forces_sorted_matching() {
        let p = problem(vec![0.3, 0.1, 0.2], vec![0.25, 0.05, 0.4], 5.0);
        let t = marginals_banded_exact(&p, 0).unwrap();
        // sorted ranks: X 1,2,0 ; Y 1,0,2
        assert_eq!(t.probs[1][1], 1.0);
        assert_eq!(t.probs[2][0], 1.0);
        assert_eq!(t.probs[0][2], 1.0);
    }

    #[test]
    fn full_band_is_exact() {
        let x = vec![0.11, 0.52, 0.33, 0.74, 0.05, 0.41];
        let y = vec![0.49, 0.13, 0.08, 0.37, 0.7, 0.29];
        let p = problem(x, y, 4.0);
        let a = marginals_banded_exact(&p, 5).unwrap();
        let e = marginals_bruteforce_exact(&p).unwrap();
        assert!(a.max_abs_diff(&e) < 1e-12);
    }
}
