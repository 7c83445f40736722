//! Boundary variables: the matched pairs that cross a cut.

use serde::{Deserialize, Serialize};

use crate::error::{MatchError, Result};
use crate::exact::problem::{sort_maps, SortMaps};
use crate::partial::check_partial;
use crate::sampler::is_permutation;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryLocation {
    /// Cut between the first `l` sorted ranks and the rest (`l + ½` in
    /// 1-based rank notation).
    Sorted(usize),
    /// Cut at a real position.
    Position(f64),
}

/// Pairs crossing a cut. Exact kind: `(k, π_st(k))` in 0-based sorted
/// ranks. Partial kind: `(i, π(i))` in original indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryState {
    pub location: BoundaryLocation,
    pub crossing_pairs: Vec<(usize, usize)>,
}

impl BoundaryState {
    pub fn is_empty(&self) -> bool {
        self.crossing_pairs.is_empty()
    }
}

/// `π_st = t⁻¹ ∘ π ∘ s` for a bijection in original indices.
pub fn sorted_bijection(maps: &SortMaps, pi: &[usize]) -> Vec<usize> {
    maps.s.iter().map(|&i| maps.t_inv[pi[i]]).collect()
}

/// Crossing pairs of a sorted bijection at cut `l`.
pub fn boundary_sorted(pi_st: &[usize], l: usize) -> BoundaryState {
    let crossing_pairs = pi_st
        .iter()
        .enumerate()
        .filter(|&(k, &m)| (k < l) != (m < l))
        .map(|(k, &m)| (k, m))
        .collect();
    BoundaryState {
        location: BoundaryLocation::Sorted(l),
        crossing_pairs,
    }
}

/// `Γ_{l+½}(π)` for a bijection `pi` given in original indices. Empty for
/// `l = 0` and `l ≥ n`.
pub fn boundary_exact(x: &[f64], y: &[f64], pi: &[usize], l: usize) -> Result<BoundaryState> {
    if pi.len() != x.len() || x.len() != y.len() || !is_permutation(pi) {
        return Err(MatchError::Contract("pi is not a bijection of [n]".into()));
    }
    let maps = sort_maps(x, y);
    Ok(boundary_sorted(&sorted_bijection(&maps, pi), l))
}

/// `Γ_x(π)`: pairs with `X_i ≤ x < Y_π(i)` or `X_i > x ≥ Y_π(i)`.
pub fn boundary_partial(x: &[f64], y: &[f64], pi: &[Option<usize>], at: f64) -> Result<BoundaryState> {
    check_partial(pi, x.len(), y.len())?;
    let crossing_pairs = pi
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.map(|j| (i, j)))
        .filter(|&(i, j)| (x[i] <= at) != (y[j] <= at))
        .collect();
    Ok(BoundaryState {
        location: BoundaryLocation::Position(at),
        crossing_pairs,
    })
}
