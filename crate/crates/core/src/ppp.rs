//! Finite windows of the coupled Poisson point processes that describe the
//! local limit around a typical X point.
//!
//! Points are generated on `[−K − Mq, K + Mq]`, where `Mq` is the
//! `1 − 10⁻⁹` radius of `q`, so the Y side inside `[−K, K]` is complete up
//! to probability `10⁻⁹`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{MatchError, Result};
use crate::model::{DensityLambda, PotentialV};
use crate::rng;

/// Tail mass left outside the generation margin.
pub const MARGIN_TAIL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PppKind {
    Exact,
    Partial,
}

/// A sampled window. Positions are sorted; integer indices are positions in
/// the vectors shifted so that index 0 is `x_points[x_origin]` (the point at
/// 0) and `y_points[y_origin]`: the partner of the origin when it has one,
/// otherwise the first Y point at or right of 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PPPConfiguration {
    pub kind: PppKind,
    pub halfwidth: f64,
    pub margin: f64,
    /// The sampled location `x ~ Λ`.
    pub anchor: f64,
    pub lambda_at_x: f64,
    pub p: Option<f64>,
    pub x_points: Vec<f64>,
    pub y_points: Vec<f64>,
    pub x_origin: usize,
    pub y_origin: usize,
    /// `truth[a] = Some(b)`: `x_points[a] ↔ y_points[b]`.
    pub truth: Vec<Option<usize>>,
    pub seed: u64,
}

impl PPPConfiguration {
    pub fn x_index(&self, pos: usize) -> i64 {
        pos as i64 - self.x_origin as i64
    }

    pub fn y_index(&self, pos: usize) -> i64 {
        pos as i64 - self.y_origin as i64
    }

    pub fn x_pos(&self, index: i64) -> Option<usize> {
        let p = index + self.x_origin as i64;
        (p >= 0 && (p as usize) < self.x_points.len()).then_some(p as usize)
    }

    pub fn y_pos(&self, index: i64) -> Option<usize> {
        let p = index + self.y_origin as i64;
        (p >= 0 && (p as usize) < self.y_points.len()).then_some(p as usize)
    }

    /// Inclusive index ranges of the generated X and Y points.
    pub fn x_index_range(&self) -> (i64, i64) {
        (self.x_index(0), self.x_index(self.x_points.len()) - 1)
    }

    pub fn y_index_range(&self) -> (i64, i64) {
        (self.y_index(0), self.y_index(self.y_points.len()) - 1)
    }

    /// True partner index of the origin.
    pub fn origin_partner(&self) -> Option<i64> {
        self.truth[self.x_origin].map(|b| self.y_index(b))
    }

    /// Number of X and Y points in `[−w, w]`.
    pub fn counts_within(&self, w: f64) -> (usize, usize) {
        let c = |v: &[f64]| v.iter().filter(|p| p.abs() <= w).count();
        (c(&self.x_points), c(&self.y_points))
    }

    pub fn validate(&self) -> Result<()> {
        let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1]);
        if !sorted(&self.x_points) || !sorted(&self.y_points) {
            return Err(MatchError::Contract("PPP points must be sorted".into()));
        }
        if self.x_points.get(self.x_origin) != Some(&0.0) {
            return Err(MatchError::Contract("origin missing from X points".into()));
        }
        if self.truth.len() != self.x_points.len() {
            return Err(MatchError::Contract("one truth entry per X point required".into()));
        }
        let mut seen = vec![false; self.y_points.len()];
        for &b in self.truth.iter().flatten() {
            if b >= seen.len() || seen[b] {
                return Err(MatchError::Contract("PPP truth is not injective".into()));
            }
            seen[b] = true;
        }
        if self.kind == PppKind::Exact && (seen.iter().any(|s| !s) || self.truth.iter().any(Option::is_none)) {
            return Err(MatchError::Contract("exact PPP truth must be a bijection".into()));
        }
        Ok(())
    }
}

fn check_halfwidth(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(MatchError::Domain {
            what: "K",
            value: k,
            domain: "(0, ∞)",
        })
    }
}

/// Homogeneous Poisson points on `[lo, hi]`, unsorted.
fn poisson_points<R: Rng>(rng: &mut R, rate: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mean = rate * (hi - lo);
    let count = if mean > 0.0 {
        Poisson::new(mean).expect("positive mean").sample(rng) as usize
    } else {
        0
    };
    (0..count).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()
}

/// Sorts `(position, tag)` pairs and returns positions plus the new slot of
/// each original entry.
fn sort_tagged(v: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let mut slot = vec![0; v.len()];
    for (k, &i) in idx.iter().enumerate() {
        slot[i] = k;
    }
    (idx.iter().map(|&i| v[i]).collect(), slot)
}

/// Exact-limit window: `X = {0} ∪ PPP(Λ(x))`, each `Y = X + ε`.
pub fn sample_ppp_exact(density: &DensityLambda, potential: &PotentialV, k: f64, seed: u64) -> Result<PPPConfiguration> {
    check_halfwidth(k)?;
    let mut main = rng::stream(seed, 0);
    let anchor = density.sample(&mut main);
    let rate = density.eval(anchor);
    let margin = potential.tail_radius(MARGIN_TAIL);
    let w = k + margin;
    // generation order: origin first
    let mut xs = vec![0.0];
    xs.extend(poisson_points(&mut main, rate, -w, w));
    let mut noise = rng::stream(seed, 1);
    let ys: Vec<f64> = xs.iter().map(|&x| x + potential.sample(&mut noise)).collect();
    let (x_points, x_slot) = sort_tagged(&xs);
    let (y_points, y_slot) = sort_tagged(&ys);
    let mut truth = vec![None; xs.len()];
    for g in 0..xs.len() {
        truth[x_slot[g]] = Some(y_slot[g]);
    }
    let cfg = PPPConfiguration {
        kind: PppKind::Exact,
        halfwidth: k,
        margin,
        anchor,
        lambda_at_x: rate,
        p: None,
        x_origin: x_slot[0],
        y_origin: y_slot[0],
        x_points,
        y_points,
        truth,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Partial-limit window: `X = {0} ∪ PPP(Λ(x) p/(1−p)²)`; each X is matched
/// with probability `p` to `X + ε`; independent unmatched Y points arrive
/// at rate `Λ(x) p/(1−p)`.
pub fn sample_ppp_partial(
    density: &DensityLambda,
    p: f64,
    potential: &PotentialV,
    k: f64,
    seed: u64,
) -> Result<PPPConfiguration> {
    check_halfwidth(k)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(MatchError::Domain {
            what: "p",
            value: p,
            domain: "(0, 1)",
        });
    }
    let mut main = rng::stream(seed, 0);
    let anchor = density.sample(&mut main);
    let lam = density.eval(anchor);
    let margin = potential.tail_radius(MARGIN_TAIL);
    let w = k + margin;
    let mut xs = vec![0.0];
    xs.extend(poisson_points(&mut main, lam * p / ((1.0 - p) * (1.0 - p)), -w, w));
    let mut marks = rng::stream(seed, 1);
    let mut noise = rng::stream(seed, 2);
    let mut ys = Vec::new();
    let mut partner = vec![None; xs.len()];
    for (g, &x) in xs.iter().enumerate() {
        if marks.random::<f64>() < p {
            partner[g] = Some(ys.len());
            ys.push(x + potential.sample(&mut noise));
        }
    }
    let mut extra = rng::stream(seed, 3);
    ys.extend(poisson_points(&mut extra, lam * p / (1.0 - p), -w, w));

    let (x_points, x_slot) = sort_tagged(&xs);
    let (y_points, y_slot) = sort_tagged(&ys);
    let mut truth = vec![None; xs.len()];
    for g in 0..xs.len() {
        truth[x_slot[g]] = partner[g].map(|h| y_slot[h]);
    }
    let y_origin = match partner[0] {
        Some(h) => y_slot[h],
        None => y_points.partition_point(|&v| v < 0.0),
    };
    let cfg = PPPConfiguration {
        kind: PppKind::Partial,
        halfwidth: k,
        margin,
        anchor,
        lambda_at_x: lam,
        p: Some(p),
        x_origin: x_slot[0],
        y_origin,
        x_points,
        y_points,
        truth,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_truth_is_bijection_anchored_at_origin() {
        let g = PotentialV::gaussian(1.0).unwrap();
        let c = sample_ppp_exact(&DensityLambda::Uniform, &g, 5.0, 4).unwrap();
        assert_eq!(c.x_points[c.x_origin], 0.0);
        assert_eq!(c.origin_partner(), Some(0));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn degenerate_noise_copies_points() {
        let c = sample_ppp_exact(&DensityLambda::Uniform, &PotentialV::degenerate(), 3.0, 1).unwrap();
        assert_eq!(c.x_points, c.y_points);
    }

    #[test]
    fn partial_keeps_origin() {
        let g = PotentialV::gaussian(1.0).unwrap();
        for s in 0..20 {
            let c = sample_ppp_partial(&DensityLambda::Uniform, 0.4, &g, 2.0, s).unwrap();
            assert_eq!(c.x_points[c.x_origin], 0.0);
        }
    }

    #[test]
    fn deterministic() {
        let g = PotentialV::gaussian(1.0).unwrap();
        let a = sample_ppp_partial(&DensityLambda::Uniform, 0.5, &g, 4.0, 77).unwrap();
        let b = sample_ppp_partial(&DensityLambda::Uniform, 0.5, &g, 4.0, 77).unwrap();
        assert_eq!(a, b);
    }
}
