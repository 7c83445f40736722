use serde::{Deserialize, Serialize};

use crate::dist::{Label, MatchDistribution};
use crate::error::{MatchError, Result};
use crate::model::PotentialV;
use crate::sampler::{is_permutation, ExactInstance};

/// Posterior over bijections `π` with energy `Σ_i V(scale · (X_i − Y_π(i)))`.
///
/// `scale` is `n` for a finite instance and `1` for point-process windows.
#[derive(Clone, Debug)]
pub struct ExactPosteriorProblem {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub scale: f64,
    pub potential: PotentialV,
    log_w: Vec<Vec<f64>>,
}

impl ExactPosteriorProblem {
    pub fn from_instance(inst: &ExactInstance) -> Result<Self> {
        Self::from_points(inst.x.clone(), inst.y.clone(), inst.n as f64, inst.potential.clone())
    }

    pub fn from_points(x: Vec<f64>, y: Vec<f64>, scale: f64, potential: PotentialV) -> Result<Self> {
        if x.len() != y.len() {
            return Err(MatchError::Contract(format!(
                "exact matching needs |X| = |Y|, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        let log_w = x
            .iter()
            .map(|&xi| y.iter().map(|&yj| -potential.value(scale * (xi - yj))).collect())
            .collect();
        Ok(ExactPosteriorProblem {
            x,
            y,
            scale,
            potential,
            log_w,
        })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// `log W_ij = −V(scale · (X_i − Y_j))`.
    #[inline]
    pub fn log_weight(&self, i: usize, j: usize) -> f64 {
        self.log_w[i][j]
    }

    pub fn log_weights(&self) -> &[Vec<f64>] {
        &self.log_w
    }

    /// Multiplies row `i` of `W` by `exp(log_factor)`; marginals are
    /// invariant under this.
    pub fn rescale_row(&mut self, i: usize, log_factor: f64) {
        self.log_w[i].iter_mut().for_each(|v| *v += log_factor);
    }

    /// `H(π) = Σ_i V(scale · (X_i − Y_π(i)))`, summed in index order.
    pub fn hamiltonian(&self, pi: &[usize]) -> Result<f64> {
        if pi.len() != self.n() || !is_permutation(pi) {
            return Err(MatchError::Contract("pi is not a bijection of [n]".into()));
        }
        Ok(pi
            .iter()
            .enumerate()
            .map(|(i, &j)| -self.log_w[i][j])
            .sum())
    }

    /// Energy change from swapping the partners of `a` and `b`.
    #[inline]
    pub fn swap_delta(&self, pi: &[usize], a: usize, b: usize) -> f64 {
        let (ja, jb) = (pi[a], pi[b]);
        -(self.log_w[a][jb] + self.log_w[b][ja]) + (self.log_w[a][ja] + self.log_w[b][jb])
    }
}

/// Posterior marginals `P_i(j)` for every X index `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalTable {
    pub probs: Vec<Vec<f64>>,
}

pub const ROW_TOL: f64 = 1e-12;
pub const COLUMN_TOL: f64 = 1e-9;

impl MarginalTable {
    pub fn n(&self) -> usize {
        self.probs.len()
    }

    pub fn row(&self, i: usize) -> MatchDistribution {
        MatchDistribution::from_entries(
            self.probs[i]
                .iter()
                .enumerate()
                .filter(|e| *e.1 > 0.0)
                .map(|(j, &p)| (Label::Y(j as i64), p))
                .collect(),
        )
    }

    pub fn rows(&self) -> Vec<MatchDistribution> {
        (0..self.n()).map(|i| self.row(i)).collect()
    }

    pub fn max_row_defect(&self) -> f64 {
        self.probs
            .iter()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_column_defect(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|j| (self.probs.iter().map(|r| r[j]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Checks row sums (1e-12) and column sums (1e-9).
    pub fn validate(&self) -> Result<()> {
        let r = self.max_row_defect();
        let c = self.max_column_defect();
        if r > ROW_TOL || c > COLUMN_TOL {
            return Err(MatchError::Numeric(format!(
                "marginal table not doubly stochastic: row defect {r:e}, column defect {c:e}"
            )));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &MarginalTable) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v).abs()))
            .fold(0.0, f64::max)
    }

    /// Largest per-row TV distance between two tables.
    pub fn max_row_tv(&self, other: &MarginalTable) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| 0.5 * a.iter().zip(b).map(|(u, v)| (u - v).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub(crate) fn normalize_rows(mut probs: Vec<Vec<f64>>) -> Result<Self> {
        for row in probs.iter_mut() {
            row.iter_mut().for_each(|v| *v = v.max(0.0));
            let s: f64 = row.iter().sum();
            if !(s > 0.0 && s.is_finite()) {
                return Err(MatchError::Numeric(format!("row mass {s}")));
            }
            row.iter_mut().for_each(|v| *v /= s);
        }
        Ok(MarginalTable { probs })
    }
}

/// Permutations sorting X and Y ascending; ties broken by original index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortMaps {
    /// `s[k]` is the index of the k-th smallest X.
    pub s: Vec<usize>,
    /// `t[k]` is the index of the k-th smallest Y.
    pub t: Vec<usize>,
    pub s_inv: Vec<usize>,
    pub t_inv: Vec<usize>,
}

pub fn argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    idx
}

fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (k, &i) in p.iter().enumerate() {
        inv[i] = k;
    }
    inv
}

pub fn sort_maps(x: &[f64], y: &[f64]) -> SortMaps {
    let s = argsort(x);
    let t = argsort(y);
    SortMaps {
        s_inv: invert(&s),
        t_inv: invert(&t),
        s,
        t,
    }
}

impl ExactPosteriorProblem {
    /// Log-weights with rows and columns in sorted order.
    pub fn sorted_log_weights(&self, maps: &SortMaps) -> Vec<Vec<f64>> {
        maps.s
            .iter()
            .map(|&i| maps.t.iter().map(|&j| self.log_w[i][j]).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ExactPosteriorProblem {
        ExactPosteriorProblem::from_points(
            vec![0.1, 0.5, 0.3],
            vec![0.45, 0.12, 0.33],
            10.0,
            PotentialV::gaussian(1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn hamiltonian_single_term() {
        let p = ExactPosteriorProblem::from_points(vec![0.2], vec![0.3], 1.0, PotentialV::gaussian(1.0).unwrap())
            .unwrap();
        let v = PotentialV::gaussian(1.0).unwrap().value(-0.1);
        assert!((p.hamiltonian(&[0]).unwrap() - v).abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_rejects_non_bijection() {
        assert!(toy().hamiltonian(&[0, 0, 1]).is_err());
        assert!(toy().hamiltonian(&[0, 1]).is_err());
    }

    #[test]
    fn swap_delta_matches_recomputation() {
        let p = toy();
        let pi = vec![1, 0, 2];
        let mut swapped = pi.clone();
        swapped.swap(0, 2);
        let direct = p.hamiltonian(&swapped).unwrap() - p.hamiltonian(&pi).unwrap();
        assert!((p.swap_delta(&pi, 0, 2) - direct).abs() < 1e-12);
    }

    #[test]
    fn sort_maps_examples() {
        let m = sort_maps(&[0.1, 0.2, 0.3], &[0.3, 0.2, 0.1]);
        assert_eq!(m.s, vec![0, 1, 2]);
        assert_eq!(m.t, vec![2, 1, 0]);
        let r = sort_maps(&[4.0, 3.0, 2.0, 1.0], &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(r.s, vec![3, 2, 1, 0]);
        // ties by index
        assert_eq!(r.t, vec![0, 1, 2, 3]);
    }
}
