use serde::{Deserialize, Serialize};

use crate::dist::{Label, MatchDistribution};
use crate::error::{MatchError, Result};
use crate::model::{PairModel, PotentialV};
use crate::sampler::PartialInstance;

/// Posterior over partial bijections with Hamiltonian
/// `Σ_matched V(scale·(X_i − Y_j)) − Σ_{unmatched X} u_x − Σ_{unmatched Y} u_y`.
///
/// For a finite instance `scale = n` and `u = U_n`; point-process windows use
/// `scale = 1` and a constant `u`.
#[derive(Clone, Debug)]
pub struct PartialPosteriorProblem {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub scale: f64,
    pub potential: PotentialV,
    pub u_x: Vec<f64>,
    pub u_y: Vec<f64>,
    log_w: Vec<Vec<f64>>,
}

impl PartialPosteriorProblem {
    /// Evaluates `U_n` once per observed point.
    pub fn from_instance(inst: &PartialInstance) -> Result<Self> {
        let model = PairModel::new(inst.potential.clone(), inst.density.clone(), inst.n)?;
        let u_x = inst.x.iter().map(|&v| model.u_n(v)).collect::<Result<_>>()?;
        let u_y = inst.y.iter().map(|&v| model.u_n(v)).collect::<Result<_>>()?;
        Self::from_parts(inst.x.clone(), inst.y.clone(), inst.n as f64, inst.potential.clone(), u_x, u_y)
    }

    pub fn from_parts(
        x: Vec<f64>,
        y: Vec<f64>,
        scale: f64,
        potential: PotentialV,
        u_x: Vec<f64>,
        u_y: Vec<f64>,
    ) -> Result<Self> {
        if u_x.len() != x.len() || u_y.len() != y.len() {
            return Err(MatchError::Contract("one U value per point required".into()));
        }
        if u_x.iter().chain(&u_y).any(|u| !u.is_finite()) {
            return Err(MatchError::Numeric("non-finite U value".into()));
        }
        let log_w = x
            .iter()
            .map(|&xi| y.iter().map(|&yj| -potential.value(scale * (xi - yj))).collect())
            .collect();
        Ok(PartialPosteriorProblem {
            x,
            y,
            scale,
            potential,
            u_x,
            u_y,
            log_w,
        })
    }

    pub fn n_x(&self) -> usize {
        self.x.len()
    }

    pub fn n_y(&self) -> usize {
        self.y.len()
    }

    /// `log W_ij = −V(scale · (X_i − Y_j))`.
    #[inline]
    pub fn log_weight(&self, i: usize, j: usize) -> f64 {
        self.log_w[i][j]
    }

    /// Log-weight of matching `i` with `j` relative to leaving both
    /// unmatched: `log W_ij − u_x(i) − u_y(j)`. The posterior weight of a
    /// partial bijection is proportional to the product of these over its
    /// pairs.
    #[inline]
    pub fn pair_gain(&self, i: usize, j: usize) -> f64 {
        self.log_w[i][j] - self.u_x[i] - self.u_y[j]
    }

    /// `H(π)`; `pi[i] = None` leaves `X_i` unmatched.
    pub fn hamiltonian(&self, pi: &[Option<usize>]) -> Result<f64> {
        check_partial(pi, self.n_x(), self.n_y())?;
        let mut used = vec![false; self.n_y()];
        let mut h = 0.0;
        for (i, t) in pi.iter().enumerate() {
            match *t {
                Some(j) => {
                    used[j] = true;
                    h -= self.log_w[i][j];
                }
                None => h -= self.u_x[i],
            }
        }
        for (j, &u) in used.iter().enumerate() {
            if !u {
                h -= self.u_y[j];
            }
        }
        Ok(h)
    }

    /// Sub-problem on the given X and Y indices (in the given order).
    pub fn restrict(&self, xs: &[usize], ys: &[usize]) -> Self {
        PartialPosteriorProblem {
            x: xs.iter().map(|&i| self.x[i]).collect(),
            y: ys.iter().map(|&j| self.y[j]).collect(),
            scale: self.scale,
            potential: self.potential.clone(),
            u_x: xs.iter().map(|&i| self.u_x[i]).collect(),
            u_y: ys.iter().map(|&j| self.u_y[j]).collect(),
            log_w: xs
                .iter()
                .map(|&i| ys.iter().map(|&j| self.log_w[i][j]).collect())
                .collect(),
        }
    }

    /// Same posterior with the roles of X and Y exchanged.
    pub fn swapped(&self) -> Self {
        PartialPosteriorProblem {
            x: self.y.clone(),
            y: self.x.clone(),
            scale: self.scale,
            potential: self.potential.clone(),
            u_x: self.u_y.clone(),
            u_y: self.u_x.clone(),
            log_w: (0..self.n_y())
                .map(|j| (0..self.n_x()).map(|i| self.log_w[i][j]).collect())
                .collect(),
        }
    }
}

/// Checks that `pi` is an injective partial map `[n_x] → [n_y]`.
pub fn check_partial(pi: &[Option<usize>], n_x: usize, n_y: usize) -> Result<()> {
    if pi.len() != n_x {
        return Err(MatchError::Contract(format!(
            "partial bijection has {} entries, expected {n_x}",
            pi.len()
        )));
    }
    let mut seen = vec![false; n_y];
    for &j in pi.iter().flatten() {
        if j >= n_y || seen[j] {
            return Err(MatchError::Contract("partial bijection not injective into [N_Y]".into()));
        }
        seen[j] = true;
    }
    Ok(())
}

/// Posterior marginals over `{∅} ∪ [N_Y]` for every X point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialMarginalTable {
    /// `matched[i][j] = P_i(j)`.
    pub matched: Vec<Vec<f64>>,
    /// `unmatched[i] = P_i(∅)`.
    pub unmatched: Vec<f64>,
}

impl PartialMarginalTable {
    pub fn n_x(&self) -> usize {
        self.unmatched.len()
    }

    pub fn row(&self, i: usize) -> MatchDistribution {
        let mut e: Vec<(Label, f64)> = Vec::with_capacity(self.matched[i].len() + 1);
        if self.unmatched[i] > 0.0 {
            e.push((Label::Unmatched, self.unmatched[i]));
        }
        e.extend(
            self.matched[i]
                .iter()
                .enumerate()
                .filter(|x| *x.1 > 0.0)
                .map(|(j, &p)| (Label::Y(j as i64), p)),
        );
        MatchDistribution::from_entries(e)
    }

    pub fn rows(&self) -> Vec<MatchDistribution> {
        (0..self.n_x()).map(|i| self.row(i)).collect()
    }

    /// Mass each Y point receives, `Σ_i P_i(j)`.
    pub fn column_mass(&self, j: usize) -> f64 {
        self.matched.iter().map(|r| r[j]).sum()
    }

    pub fn max_row_defect(&self) -> f64 {
        self.matched
            .iter()
            .zip(&self.unmatched)
            .map(|(r, u)| (r.iter().sum::<f64>() + u - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.max_row_defect();
        if d > 1e-12 {
            return Err(MatchError::Numeric(format!("partial table row defect {d:e}")));
        }
        for j in 0..self.matched.first().map_or(0, |r| r.len()) {
            if self.column_mass(j) > 1.0 + 1e-9 {
                return Err(MatchError::Numeric(format!("Y point {j} matched with mass > 1")));
            }
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &PartialMarginalTable) -> f64 {
        let m = self
            .matched
            .iter()
            .zip(&other.matched)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v).abs()))
            .fold(0.0, f64::max);
        self.unmatched
            .iter()
            .zip(&other.unmatched)
            .map(|(u, v)| (u - v).abs())
            .fold(m, f64::max)
    }

    /// Normalizes raw nonnegative masses row by row.
    pub(crate) fn from_masses(mut matched: Vec<Vec<f64>>, mut unmatched: Vec<f64>) -> Result<Self> {
        for (r, u) in matched.iter_mut().zip(unmatched.iter_mut()) {
            r.iter_mut().for_each(|v| *v = v.max(0.0));
            *u = u.max(0.0);
            let s: f64 = r.iter().sum::<f64>() + *u;
            if !(s > 0.0 && s.is_finite()) {
                return Err(MatchError::Numeric(format!("row mass {s}")));
            }
            r.iter_mut().for_each(|v| *v /= s);
            *u /= s;
        }
        Ok(PartialMarginalTable { matched, unmatched })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> PartialPosteriorProblem {
        PartialPosteriorProblem::from_parts(
            vec![0.2, 0.6],
            vec![0.25, 0.9, 0.5],
            10.0,
            PotentialV::gaussian(1.0).unwrap(),
            vec![0.1, -0.2],
            vec![0.05, 0.0, 0.3],
        )
        .unwrap()
    }

    #[test]
    fn empty_matching_energy() {
        let p = toy();
        let h = p.hamiltonian(&[None, None]).unwrap();
        assert!((h - -(0.1 - 0.2 + 0.05 + 0.0 + 0.3)).abs() < 1e-15);
    }

    #[test]
    fn single_pair_difference() {
        let p = toy();
        let d = p.hamiltonian(&[Some(0), None]).unwrap() - p.hamiltonian(&[None, None]).unwrap();
        let v = p.potential.value(10.0 * (0.2 - 0.25));
        assert!((d - (v + 0.1 + 0.05)).abs() < 1e-12);
        assert!((d + p.pair_gain(0, 0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_injective() {
        assert!(toy().hamiltonian(&[Some(1), Some(1)]).is_err());
        assert!(toy().hamiltonian(&[Some(3), None]).is_err());
        assert!(toy().hamiltonian(&[None]).is_err());
    }
}
