//! Local Gibbs measures `Q_K` on windows of the limiting point processes
//! and the origin marginal `Q_K^0`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{tv_distance, Label, MatchDistribution};
use crate::error::{MatchError, Result};
use crate::exact::banded::{banded_sorted, DEFAULT_BAND};
use crate::exact::block::block_row_marginal;
use crate::exact::permanent::DEFAULT_PERMANENT_CAP;
use crate::model::{DensityLambda, PotentialV};
use crate::partial::{PartialEngine, PartialPosteriorProblem};
use crate::ppp::{sample_ppp_exact, sample_ppp_partial, PPPConfiguration, PppKind};
use crate::rng::derive_seed;

/// A partial map between integer X and Y indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexedBijection {
    pub pairs: BTreeMap<i64, i64>,
}

impl IndexedBijection {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (i64, i64)>) -> Result<Self> {
        let pairs: BTreeMap<i64, i64> = pairs.into_iter().collect();
        let mut seen = std::collections::BTreeSet::new();
        if !pairs.values().all(|j| seen.insert(*j)) {
            return Err(MatchError::Contract("indexed bijection is not injective".into()));
        }
        Ok(IndexedBijection { pairs })
    }

    /// The truth of a configuration in index coordinates.
    pub fn truth(config: &PPPConfiguration) -> Self {
        IndexedBijection {
            pairs: config
                .truth
                .iter()
                .enumerate()
                .filter_map(|(a, b)| b.map(|b| (config.x_index(a), config.y_index(b))))
                .collect(),
        }
    }
}

/// Crossing counts at cut `a`: `L = #{i ≤ a : π(i) > a}`,
/// `R = #{i > a : π(i) ≤ a}`, and `F = L − R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flow {
    pub l: i64,
    pub r: i64,
    pub f: i64,
}

pub fn flow_of_bijection(config: &PPPConfiguration, pi: &IndexedBijection, a: i64) -> Result<Flow> {
    let (lo, hi) = config.x_index_range();
    if a < lo || a > hi {
        return Err(MatchError::Domain {
            what: "cut index",
            value: a as f64,
            domain: "X index range of the window",
        });
    }
    let (mut l, mut r) = (0, 0);
    for (&i, &j) in &pi.pairs {
        if i <= a && j > a {
            l += 1;
        } else if i > a && j <= a {
            r += 1;
        }
    }
    Ok(Flow { l, r, f: l - r })
}

/// Cut indices whose X and Y points both lie inside `[−K, K]`.
pub fn interior_cuts(config: &PPPConfiguration) -> Vec<i64> {
    let k = config.halfwidth;
    let (lo, hi) = config.x_index_range();
    (lo..=hi)
        .filter(|&a| {
            let x = config.x_pos(a).map(|p| config.x_points[p]);
            let y = config.y_pos(a).map(|p| config.y_points[p]);
            matches!((x, y), (Some(x), Some(y)) if x.abs() <= k && y.abs() <= k)
        })
        .collect()
}

/// Convention for the unmatched-point reward `U` in the partial limit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UConvention {
    /// `U = log √Λ(x)`, the pointwise limit of `U_n`.
    #[default]
    LogSqrtLambda,
    /// `U = √Λ(x)` taken literally.
    SqrtLambda,
}

impl UConvention {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "log_sqrt_lambda" => Ok(UConvention::LogSqrtLambda),
            "sqrt_lambda" => Ok(UConvention::SqrtLambda),
            other => Err(MatchError::InvalidParameter(format!("unknown u_convention '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            UConvention::LogSqrtLambda => "log_sqrt_lambda",
            UConvention::SqrtLambda => "sqrt_lambda",
        }
    }

    pub fn value(&self, lambda: f64) -> f64 {
        match self {
            UConvention::LogSqrtLambda => 0.5 * lambda.ln(),
            UConvention::SqrtLambda => lambda.sqrt(),
        }
    }
}

/// Pruning depth of the banded DP for blocks past the permanent cap.
pub const QK_PRUNE_LOG: f64 = 30.0;

/// `Q_K^0` with the truth flow `F*` of the configuration (0 for the partial
/// kind).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QkMarginal {
    pub k: f64,
    pub f_star: i64,
    pub probs: MatchDistribution,
}

/// Exact-limit `Q_K^0`: bijections `{−K..K} → {−K+F*..K+F*}` weighted by
/// `exp(−Σ V(X_i − Y_π(i)))`. Blocks up to the permanent cap are exact;
/// larger ones use the banded transfer DP with the default band.
pub fn qk_marginal_exact(config: &PPPConfiguration, potential: &PotentialV, k: usize) -> Result<QkMarginal> {
    if config.kind != PppKind::Exact {
        return Err(MatchError::Contract("qk_marginal_exact needs an exact-kind configuration".into()));
    }
    let truth = IndexedBijection::truth(config);
    let f_star = flow_of_bijection(config, &truth, 0)?.f;
    let ki = k as i64;
    let w = config.halfwidth;
    let fetch = |pos: Option<usize>, pts: &[f64]| pos.map(|p| pts[p]).filter(|v| v.abs() <= w);
    let xs: Option<Vec<f64>> = (-ki..=ki).map(|i| fetch(config.x_pos(i), &config.x_points)).collect();
    let ys: Option<Vec<f64>> = (-ki + f_star..=ki + f_star)
        .map(|j| fetch(config.y_pos(j), &config.y_points))
        .collect();
    let (Some(xs), Some(ys)) = (xs, ys) else {
        return Err(MatchError::WindowTooSmall(format!(
            "indices −{k}..{k} (shift {f_star}) not all inside the halfwidth-{w} window"
        )));
    };
    let lw: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| ys.iter().map(|&y| -potential.value(x - y)).collect())
        .collect();
    let row = if lw.len() <= DEFAULT_PERMANENT_CAP {
        block_row_marginal(&lw, k)?.0
    } else {
        banded_sorted(&lw, &xs, &ys, 1.0, potential, DEFAULT_BAND, QK_PRUNE_LOG)?.swap_remove(k)
    };
    let probs = MatchDistribution::from_entries(
        row.iter()
            .enumerate()
            .filter(|e| *e.1 > 0.0)
            .map(|(c, &p)| (Label::Y(c as i64 - ki + f_star), p))
            .collect(),
    );
    Ok(QkMarginal {
        k: k as f64,
        f_star,
        probs,
    })
}

/// Partial-limit `Q_K^0` over `{∅} ∪ Y_K`: partial bijections between the
/// points in `[−K, K]` weighted by
/// `exp(−Σ_matched V + Σ_unmatched X U + Σ_unmatched Y U)`.
pub fn qk_marginal_partial(
    config: &PPPConfiguration,
    potential: &PotentialV,
    k: f64,
    u: UConvention,
    engine: PartialEngine,
) -> Result<QkMarginal> {
    if config.kind != PppKind::Partial {
        return Err(MatchError::Contract("qk_marginal_partial needs a partial-kind configuration".into()));
    }
    if !(k >= 0.0) || k > config.halfwidth {
        return Err(MatchError::WindowTooSmall(format!(
            "K = {k} exceeds the sampled halfwidth {}",
            config.halfwidth
        )));
    }
    let inside = |v: &f64| v.abs() <= k;
    let x_sel: Vec<usize> = (0..config.x_points.len()).filter(|&a| inside(&config.x_points[a])).collect();
    let y_sel: Vec<usize> = (0..config.y_points.len()).filter(|&b| inside(&config.y_points[b])).collect();
    let uval = u.value(config.lambda_at_x);
    let problem = PartialPosteriorProblem::from_parts(
        x_sel.iter().map(|&a| config.x_points[a]).collect(),
        y_sel.iter().map(|&b| config.y_points[b]).collect(),
        1.0,
        potential.clone(),
        vec![uval; x_sel.len()],
        vec![uval; y_sel.len()],
    )?;
    let table = engine.run(&problem)?;
    let row = x_sel.iter().position(|&a| a == config.x_origin).expect("origin inside every window");
    let probs = table.row(row).relabel(|l| match l {
        Label::Y(c) => Label::Y(config.y_index(y_sel[c as usize])),
        Label::Unmatched => Label::Unmatched,
    });
    Ok(QkMarginal { k, f_star: 0, probs })
}

/// Settings for [`check_qk_cauchy`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchySpec {
    pub density: DensityLambda,
    pub potential: PotentialV,
    /// `None` for the exact limit.
    pub p: Option<f64>,
    pub k_list: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub u_convention: UConvention,
}

/// Mean TV between consecutive entries of the K ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyRow {
    pub k: usize,
    pub k_next: usize,
    pub mean_tv: f64,
    pub se: f64,
    pub reps: usize,
    pub skip_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyTable {
    pub rows: Vec<CauchyRow>,
    /// Per replicate: TVs between consecutive K, or `None` if skipped.
    pub per_rep: Vec<Option<Vec<f64>>>,
}

/// Sample halfwidth that holds `k` points on each side of the origin with
/// high probability.
fn exact_halfwidth(k: usize, density: &DensityLambda) -> f64 {
    let k = k as f64 + 6.0;
    (k + 5.0 * k.sqrt()) / density.lambda_min()
}

/// True label of the origin: its anchored partner `Y(0)`, or `∅`.
pub fn origin_truth(config: &PPPConfiguration) -> Label {
    config.origin_partner().map_or(Label::Unmatched, Label::Y)
}

/// One sample wide enough for the largest K, with its origin marginals
/// along the K ladder.
pub fn qk_ladder_config(spec: &CauchySpec, seed: u64) -> Result<(PPPConfiguration, Vec<QkMarginal>)> {
    let k_max = *spec.k_list.iter().max().ok_or_else(|| MatchError::InvalidParameter("empty K list".into()))?;
    match spec.p {
        None => {
            let cfg = sample_ppp_exact(&spec.density, &spec.potential, exact_halfwidth(k_max, &spec.density), seed)?;
            let q = spec.k_list.iter().map(|&k| qk_marginal_exact(&cfg, &spec.potential, k)).collect::<Result<_>>()?;
            Ok((cfg, q))
        }
        Some(p) => {
            let cfg = sample_ppp_partial(&spec.density, p, &spec.potential, k_max as f64, seed)?;
            let q = spec
                .k_list
                .iter()
                .map(|&k| qk_marginal_partial(&cfg, &spec.potential, k as f64, spec.u_convention, PartialEngine::Auto))
                .collect::<Result<_>>()?;
            Ok((cfg, q))
        }
    }
}

/// Origin marginals along the K ladder, all computed on one sample.
pub fn qk_ladder(spec: &CauchySpec, seed: u64) -> Result<Vec<QkMarginal>> {
    Ok(qk_ladder_config(spec, seed)?.1)
}

/// Coupled Cauchy check: each replicate samples one configuration wide
/// enough for the largest K and reports `TV(Q_K^0, Q_K'^0)` for consecutive
/// ladder entries. Replicates hitting a size cap or a too-small window are
/// skipped and counted.
pub fn check_qk_cauchy(spec: &CauchySpec) -> Result<CauchyTable> {
    if spec.k_list.is_empty() || spec.k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MatchError::InvalidParameter("K list must be nonempty and strictly ascending".into()));
    }
    if spec.reps == 0 {
        return Err(MatchError::InvalidParameter("reps must be at least 1".into()));
    }
    let per_rep: Vec<Option<Vec<f64>>> = (0..spec.reps)
        .into_par_iter()
        .map(|r| match qk_ladder(spec, derive_seed(spec.seed, 0x51, r as u64)) {
            Ok(q) => Ok(Some(q.windows(2).map(|w| tv_distance(&w[0].probs, &w[1].probs)).collect())),
            Err(MatchError::SizeCap { .. } | MatchError::WindowTooSmall(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let ok: Vec<&Vec<f64>> = per_rep.iter().flatten().collect();
    let skip_rate = 1.0 - ok.len() as f64 / spec.reps as f64;
    let rows = spec
        .k_list
        .windows(2)
        .enumerate()
        .map(|(c, w)| {
            let vals: Vec<f64> = ok.iter().map(|v| v[c]).collect();
            let (mean_tv, se) = mean_se(&vals);
            CauchyRow {
                k: w[0],
                k_next: w[1],
                mean_tv,
                se,
                reps: vals.len(),
                skip_rate,
            }
        })
        .collect();
    Ok(CauchyTable { rows, per_rep })
}

/// Sample mean and standard error (`NaN` mean for empty input).
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
