//! Local approximations of posterior marginals.
//!
//! * [`local_marginals_partial`]: windowed local posterior for the partial
//!   model (Algorithm 1). Windows are unions of `2M + 1` grid cells of width
//!   `1/n`, so points sharing a cell share a window and one solve serves all.
//! * [`local_marginals_exact`]: sort, then match blocks of `2M + 1`
//!   consecutive sorted ranks (Algorithm 2).
//! * [`tilde_marginals_exact`]: the flow-and-reordering variant
//!   (Algorithm 3), which uses the truth only through the local flow
//!   estimate `F_n^D(i)`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{Label, MatchDistribution};
use crate::error::{MatchError, Result};
use crate::exact::block::{block_row_marginal, BlockEngine};
use crate::exact::problem::{sort_maps, ExactPosteriorProblem, SortMaps};
use crate::model::DensityLambda;
use crate::partial::{window_row, window_table, PartialEngine, PartialPosteriorProblem};
use crate::sampler::ExactInstance;

/// How a local row was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalFlag {
    /// Exact local computation by enumeration (or an exact DP/sweep for
    /// partial windows).
    Enum,
    /// Exact block marginal from permanent minors.
    Permanent,
    /// Algorithm 3 fallback: point mass at the true partner.
    Fallback,
    /// The local problem exceeded every engine cap; no estimate.
    Skipped,
}

impl LocalFlag {
    pub fn name(&self) -> &'static str {
        match self {
            LocalFlag::Enum => "enum",
            LocalFlag::Permanent => "permanent",
            LocalFlag::Fallback => "fallback",
            LocalFlag::Skipped => "skipped",
        }
    }
}

impl From<BlockEngine> for LocalFlag {
    fn from(e: BlockEngine) -> Self {
        match e {
            BlockEngine::Enumeration => LocalFlag::Enum,
            BlockEngine::Permanent => LocalFlag::Permanent,
        }
    }
}

/// One approximate marginal `P̂_i` together with how it was produced.
/// `dist` is `None` only for skipped rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalRow {
    pub dist: Option<MatchDistribution>,
    pub flag: LocalFlag,
}

impl LocalRow {
    fn new(dist: MatchDistribution, flag: LocalFlag) -> Self {
        LocalRow { dist: Some(dist), flag }
    }
}

// ---------------------------------------------------------------- Algorithm 1

/// Grid cell `⌊n x⌋` of a position.
pub fn grid_cell(n: usize, x: f64) -> i64 {
    (n as f64 * x).floor() as i64
}

/// Window `[max(0, (c − M)/n), min(1, (c + M)/n)]` for grid cell `c`.
pub fn partial_window(n: usize, m: usize, cell: i64) -> (f64, f64) {
    let (n, m) = (n as f64, m as f64);
    let c = cell as f64;
    (((c - m) / n).max(0.0), ((c + m) / n).min(1.0))
}

/// Algorithm 1 for every X point.
pub fn local_marginals_partial(
    problem: &PartialPosteriorProblem,
    n: usize,
    m: usize,
    engine: PartialEngine,
) -> Result<Vec<LocalRow>> {
    let all: Vec<usize> = (0..problem.n_x()).collect();
    local_marginals_partial_at(problem, n, m, &all, engine)
}

/// Algorithm 1 restricted to the X indices in `which` (rows returned in that
/// order). A window too large for the engine is recorded as skipped.
pub fn local_marginals_partial_at(
    problem: &PartialPosteriorProblem,
    n: usize,
    m: usize,
    which: &[usize],
    engine: PartialEngine,
) -> Result<Vec<LocalRow>> {
    if m < 1 || n < 1 {
        return Err(MatchError::InvalidParameter("Algorithm 1 needs M ≥ 1 and n ≥ 1".into()));
    }
    if let Some(&i) = which.iter().find(|&&i| i >= problem.n_x()) {
        return Err(MatchError::Contract(format!("X index {i} out of range")));
    }
    let mut cells: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for &i in which {
        cells.entry(grid_cell(n, problem.x[i])).or_default().push(i);
    }
    let cells: Vec<(i64, Vec<usize>)> = cells.into_iter().collect();
    let solved: Vec<Vec<(usize, LocalRow)>> = cells
        .par_iter()
        .map(|(cell, members)| {
            let (lo, hi) = partial_window(n, m, *cell);
            match window_table(problem, lo, hi, engine) {
                Ok((xs, ys, table)) => Ok(members
                    .iter()
                    .map(|&i| {
                        let d = window_row(&xs, &ys, &table, i).expect("point lies in its own window");
                        (i, LocalRow::new(d, LocalFlag::Enum))
                    })
                    .collect()),
                Err(MatchError::SizeCap { .. }) => Ok(members
                    .iter()
                    .map(|&i| (i, LocalRow { dist: None, flag: LocalFlag::Skipped }))
                    .collect()),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let by_index: BTreeMap<usize, LocalRow> = solved.into_iter().flatten().collect();
    Ok(which.iter().map(|i| by_index[i].clone()).collect())
}

// ------------------------------------------------------- Algorithms 2 and 3

/// Marginal of block row `center` for the block that matches the sorted X
/// ranks `xr` onto the sorted Y ranks `yr`, labeled by original Y indices.
/// Algorithms 2 and 3 both go through here, so equal blocks give
/// bit-identical rows.
fn sorted_block(
    problem: &ExactPosteriorProblem,
    maps: &SortMaps,
    xr: std::ops::RangeInclusive<usize>,
    yr: std::ops::RangeInclusive<usize>,
    center: usize,
) -> Result<LocalRow> {
    let lw: Vec<Vec<f64>> = xr
        .clone()
        .map(|a| yr.clone().map(|c| problem.log_weight(maps.s[a], maps.t[c])).collect())
        .collect();
    let (row, engine) = block_row_marginal(&lw, center)?;
    let y0 = *yr.start();
    let dist = MatchDistribution::from_entries(
        row.iter()
            .enumerate()
            .filter(|e| *e.1 > 0.0)
            .map(|(c, &p)| (Label::Y(maps.t[y0 + c] as i64), p))
            .collect(),
    );
    Ok(LocalRow::new(dist, engine.into()))
}

/// Algorithm 2: row `i` of the result approximates `P_i`, computed from the
/// block of sorted ranks `[a − M, a + M] ∩ [0, n)` where `a` is the rank of
/// `X_i`. Blocks beyond the permanent cap are an error.
pub fn local_marginals_exact(problem: &ExactPosteriorProblem, m: usize) -> Result<Vec<LocalRow>> {
    if m < 1 {
        return Err(MatchError::InvalidParameter("Algorithm 2 needs M ≥ 1".into()));
    }
    let n = problem.n();
    let maps = sort_maps(&problem.x, &problem.y);
    let sorted: Vec<LocalRow> = (0..n)
        .into_par_iter()
        .map(|a| {
            let lo = a.saturating_sub(m);
            let hi = (a + m).min(n - 1);
            sorted_block(problem, &maps, lo..=hi, lo..=hi, a - lo)
        })
        .collect::<Result<_>>()?;
    Ok((0..n).map(|i| sorted[maps.s_inv[i]].clone()).collect())
}

/// Flow counts of the truth at `X_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    pub i: usize,
    pub l: i64,
    pub r: i64,
    pub f: i64,
    pub l_d: i64,
    pub r_d: i64,
    pub f_d: i64,
    /// Locality radius in units of `1/n`.
    pub d: f64,
}

/// Default locality radius `D = 3M / (2 Λ_min) + M + 1`.
pub fn default_flow_radius(m: usize, density: &DensityLambda) -> f64 {
    let m = m as f64;
    3.0 * m / (2.0 * density.lambda_min()) + m + 1.0
}

/// Global counts
/// `L = #{j : X_j ≤ X_i, Y_{π*(j)} > Y_{π*(i)}}`,
/// `R = #{j : X_j > X_i, Y_{π*(j)} ≤ Y_{π*(i)}}`
/// and their restrictions to the window `[X_i − D/n, X_i + D/n]`.
/// Comparisons use sorted ranks, so ties follow the index tie-break.
pub fn flow_stats(inst: &ExactInstance, i: usize, d: f64) -> Result<FlowStats> {
    let maps = sort_maps(&inst.x, &inst.y);
    flow_stats_with(inst, &maps, i, d)
}

fn flow_stats_with(inst: &ExactInstance, maps: &SortMaps, i: usize, d: f64) -> Result<FlowStats> {
    let n = inst.n;
    if i >= n {
        return Err(MatchError::Contract(format!("index {i} outside [0, {n})")));
    }
    if !(d > 0.0) {
        return Err(MatchError::Domain {
            what: "D",
            value: d,
            domain: "(0, ∞)",
        });
    }
    let xi = inst.x[i];
    let (rx, ry) = (maps.s_inv[i], maps.t_inv[inst.pi_star[i]]);
    let (lo, hi) = (xi - d / n as f64, xi + d / n as f64);
    let (mut l, mut r, mut l_d, mut r_d) = (0, 0, 0, 0);
    for j in 0..n {
        let (xj, yj) = (inst.x[j], inst.y[inst.pi_star[j]]);
        let (sx, sy) = (maps.s_inv[j], maps.t_inv[inst.pi_star[j]]);
        if sx <= rx && sy > ry {
            l += 1;
            if xj >= lo && yj <= hi {
                l_d += 1;
            }
        }
        if sx > rx && sy <= ry {
            r += 1;
            if xj <= hi && yj >= lo {
                r_d += 1;
            }
        }
    }
    Ok(FlowStats {
        i,
        l,
        r,
        f: l - r,
        l_d,
        r_d,
        f_d: l_d - r_d,
        d,
    })
}

/// Algorithm 3 output for one index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TildeRow {
    pub row: LocalRow,
    pub flow: FlowStats,
}

/// Algorithm 3 (a validation device, not an estimator for real data: it
/// reads the truth). For `X_i` of sorted rank `a`, the X block is ranks
/// `a − M ..= a + M`; the Y block is the `M − F^D` ranks left and `M + F^D`
/// ranks right of `Y_{π*(i)}`. If any of these points is missing or leaves
/// `[X_i − D/n, X_i + D/n]`, the row falls back to a point mass at `π*(i)`.
pub fn tilde_marginals_exact(inst: &ExactInstance, m: usize, d: f64) -> Result<Vec<TildeRow>> {
    if m < 1 {
        return Err(MatchError::InvalidParameter("Algorithm 3 needs M ≥ 1".into()));
    }
    let problem = ExactPosteriorProblem::from_instance(inst)?;
    let maps = sort_maps(&inst.x, &inst.y);
    let n = inst.n as i64;
    let m_i = m as i64;
    (0..inst.n)
        .into_par_iter()
        .map(|i| {
            let flow = flow_stats_with(inst, &maps, i, d)?;
            let a = maps.s_inv[i] as i64;
            let r = maps.t_inv[inst.pi_star[i]] as i64;
            let (x_lo, x_hi) = (a - m_i, a + m_i);
            let (y_lo, y_hi) = (r - m_i + flow.f_d, r + m_i + flow.f_d);
            let half = d / inst.n as f64;
            let inside = |v: f64| v >= inst.x[i] - half && v <= inst.x[i] + half;
            let ok = x_lo >= 0
                && y_lo >= 0
                && x_hi < n
                && y_hi < n
                && (x_lo..=x_hi).all(|k| inside(inst.x[maps.s[k as usize]]))
                && (y_lo..=y_hi).all(|k| inside(inst.y[maps.t[k as usize]]));
            let row = if ok {
                sorted_block(
                    &problem,
                    &maps,
                    x_lo as usize..=x_hi as usize,
                    y_lo as usize..=y_hi as usize,
                    m,
                )?
            } else {
                LocalRow::new(
                    MatchDistribution::point_mass(Label::Y(inst.pi_star[i] as i64)),
                    LocalFlag::Fallback,
                )
            };
            Ok(TildeRow { row, flow })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::tv_distance;
    use crate::exact::marginals_bruteforce_exact;
    use crate::model::PotentialV;
    use crate::partial::marginals_dp_partial;
    use crate::sampler::sample_exact_instance;

    fn gauss() -> PotentialV {
        PotentialV::gaussian(1.0).unwrap()
    }

    #[test]
    fn full_block_is_exact() {
        let inst = sample_exact_instance(&gauss(), &DensityLambda::Uniform, 6, 3).unwrap();
        let p = ExactPosteriorProblem::from_instance(&inst).unwrap();
        let g = marginals_bruteforce_exact(&p).unwrap();
        for (i, r) in local_marginals_exact(&p, 6).unwrap().iter().enumerate() {
            assert!(tv_distance(r.dist.as_ref().unwrap(), &g.row(i)) < 1e-12);
        }
    }

    #[test]
    fn single_point_is_point_mass() {
        let inst = sample_exact_instance(&gauss(), &DensityLambda::Uniform, 1, 0).unwrap();
        let p = ExactPosteriorProblem::from_instance(&inst).unwrap();
        let rows = local_marginals_exact(&p, 1).unwrap();
        assert_eq!(rows[0].dist, Some(MatchDistribution::point_mass(Label::Y(0))));
    }

    #[test]
    fn flow_matches_rank_difference() {
        let inst = sample_exact_instance(&gauss(), &DensityLambda::Uniform, 30, 9).unwrap();
        let maps = sort_maps(&inst.x, &inst.y);
        for i in 0..30 {
            let f = flow_stats(&inst, i, 5.0).unwrap();
            assert_eq!(f.f, maps.s_inv[i] as i64 - maps.t_inv[inst.pi_star[i]] as i64);
        }
    }

    #[test]
    fn two_point_crossing() {
        let inst = ExactInstance::from_data(vec![0.2, 0.3], vec![0.31, 0.19], vec![0, 1], gauss(), DensityLambda::Uniform)
            .unwrap();
        // X_0 < X_1 but Y_{π*(0)} > Y_{π*(1)}
        let f0 = flow_stats(&inst, 0, 100.0).unwrap();
        let f1 = flow_stats(&inst, 1, 100.0).unwrap();
        assert_eq!((f0.l, f0.r, f0.f), (0, 1, -1));
        assert_eq!((f1.l, f1.r, f1.f), (1, 0, 1));
        assert_eq!((f0.f_d, f1.f_d), (-1, 1));
    }

    #[test]
    fn partial_full_window_is_global() {
        let p = PartialPosteriorProblem::from_parts(
            vec![0.1, 0.35, 0.6, 0.9],
            vec![0.12, 0.4, 0.58],
            4.0,
            gauss(),
            vec![0.1; 4],
            vec![-0.1; 3],
        )
        .unwrap();
        let g = marginals_dp_partial(&p).unwrap();
        let rows = local_marginals_partial(&p, 4, 8, PartialEngine::Auto).unwrap();
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.dist.as_ref().unwrap(), &g.row(i));
        }
    }

    #[test]
    fn shared_cells_share_windows() {
        assert_eq!(grid_cell(10, 0.31), grid_cell(10, 0.39));
        assert_eq!(partial_window(10, 2, 3), (0.1, 0.5));
        assert_eq!(partial_window(10, 5, 1), (0.0, 0.6));
    }
}
