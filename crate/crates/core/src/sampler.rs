//! Generative samplers for the exact and partial matching models.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{MatchError, Result};
use crate::model::{DensityLambda, PairModel, PotentialV};
use crate::rng;

/// Rejection budget per latent pair.
pub const MAX_ATTEMPTS: u64 = 1_000_000;

/// Draws one pair from `p_n` by rejection: propose `x` uniform and
/// `eps ~ q`, set `y = x + eps/n`, accept with probability
/// `sqrt(Λ(x) Λ(y)) / Λ_max` when `y ∈ [0,1]`.
pub fn sample_pair<R: Rng + ?Sized>(model: &PairModel, rng: &mut R) -> Result<(f64, f64)> {
    let lmax = model.density.lambda_max();
    let n = model.n as f64;
    for _ in 0..MAX_ATTEMPTS {
        let x: f64 = rng.random();
        let eps = model.potential.sample(rng);
        let y = x + eps / n;
        if !(0.0..=1.0).contains(&y) {
            continue;
        }
        let accept = (model.density.eval(x) * model.density.eval(y)).sqrt() / lmax;
        if rng.random::<f64>() <= accept {
            return Ok((x, y));
        }
    }
    Err(MatchError::SamplingBudget {
        attempts: MAX_ATTEMPTS,
    })
}

fn latent_pairs(model: &PairModel, count: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    (0..count)
        .map(|k| sample_pair(model, &mut rng::stream(seed, k as u64 + 1)))
        .collect()
}

/// Observed data of the exact matching model: `X_i ↔ Y_{pi_star[i]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactInstance {
    pub n: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub pi_star: Vec<usize>,
    pub seed: u64,
    pub potential: PotentialV,
    pub density: DensityLambda,
}

impl ExactInstance {
    /// Builds an instance from explicit data.
    pub fn from_data(
        x: Vec<f64>,
        y: Vec<f64>,
        pi_star: Vec<usize>,
        potential: PotentialV,
        density: DensityLambda,
    ) -> Result<Self> {
        let inst = ExactInstance {
            n: x.len(),
            x,
            y,
            pi_star,
            seed: 0,
            potential,
            density,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.n || self.y.len() != self.n || self.pi_star.len() != self.n {
            return Err(MatchError::Contract("exact instance lengths differ from n".into()));
        }
        if !is_permutation(&self.pi_star) {
            return Err(MatchError::Contract("pi_star is not a bijection of [n]".into()));
        }
        Ok(())
    }

    /// Noise of the true pairs, `n (Y_{π*(i)} − X_i)`.
    pub fn true_noise(&self) -> Vec<f64> {
        let n = self.n as f64;
        (0..self.n)
            .map(|i| n * (self.y[self.pi_star[i]] - self.x[i]))
            .collect()
    }
}

pub fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    for &j in p {
        if j >= p.len() || seen[j] {
            return false;
        }
        seen[j] = true;
    }
    true
}

/// Samples the exact matching model at scale `n`.
pub fn sample_exact_instance(
    potential: &PotentialV,
    density: &DensityLambda,
    n: usize,
    seed: u64,
) -> Result<ExactInstance> {
    let model = PairModel::new(potential.clone(), density.clone(), n)?;
    let pairs = latent_pairs(&model, n, seed)?;
    let mut pi_star: Vec<usize> = (0..n).collect();
    pi_star.shuffle(&mut rng::stream(seed, 0));
    let x = pi_star.iter().map(|&k| pairs[k].0).collect();
    let y = pairs.iter().map(|p| p.1).collect();
    Ok(ExactInstance {
        n,
        x,
        y,
        pi_star,
        seed,
        potential: potential.clone(),
        density: density.clone(),
    })
}

/// Partition of the latent indices by which coordinates were observed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Marks {
    pub both: Vec<usize>,
    pub x_only: Vec<usize>,
    pub y_only: Vec<usize>,
    pub neither: Vec<usize>,
}

/// Observed data of the partial matching model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialInstance {
    pub n: usize,
    pub p: f64,
    /// Latent pair count `N`.
    pub latent_count: usize,
    pub marks: Marks,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Latent index of each observed X (`π*_X`).
    pub pi_x: Vec<usize>,
    /// Latent index of each observed Y (`π*_Y`).
    pub pi_y: Vec<usize>,
    /// `pi_star[i] = Some(j)` when `X_i ↔ Y_j`, `None` when `X_i` is unmatched.
    pub pi_star: Vec<Option<usize>>,
    pub seed: u64,
    pub potential: PotentialV,
    pub density: DensityLambda,
}

impl PartialInstance {
    pub fn n_x(&self) -> usize {
        self.x.len()
    }

    pub fn n_y(&self) -> usize {
        self.y.len()
    }

    /// Builds an instance from explicit observed data without latent
    /// bookkeeping.
    pub fn from_data(
        n: usize,
        p: f64,
        x: Vec<f64>,
        y: Vec<f64>,
        pi_star: Vec<Option<usize>>,
        potential: PotentialV,
        density: DensityLambda,
    ) -> Result<Self> {
        let matched = pi_star.iter().flatten().count();
        let marks = Marks {
            both: (0..matched).collect(),
            x_only: (matched..x.len()).collect(),
            y_only: (x.len()..x.len() + y.len() - matched).collect(),
            neither: Vec::new(),
        };
        // latent labels: matched pairs first, then X-only, then Y-only
        let mut pi_x = vec![0; x.len()];
        let mut pi_y = vec![0; y.len()];
        let mut next = 0;
        for (i, t) in pi_star.iter().enumerate() {
            if let Some(j) = *t {
                pi_x[i] = next;
                if j < pi_y.len() {
                    pi_y[j] = next;
                }
                next += 1;
            }
        }
        for (i, t) in pi_star.iter().enumerate() {
            if t.is_none() {
                pi_x[i] = next;
                next += 1;
            }
        }
        let mut hit = vec![false; y.len()];
        pi_star.iter().flatten().for_each(|&j| {
            if j < hit.len() {
                hit[j] = true
            }
        });
        for j in 0..y.len() {
            if !hit[j] {
                pi_y[j] = next;
                next += 1;
            }
        }
        let inst = PartialInstance {
            n,
            p,
            latent_count: next,
            marks,
            x,
            y,
            pi_x,
            pi_y,
            pi_star,
            seed: 0,
            potential,
            density,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.marks;
        if self.n_x() != m.both.len() + m.x_only.len() || self.n_y() != m.both.len() + m.y_only.len() {
            return Err(MatchError::Contract("observed counts disagree with marks".into()));
        }
        if self.pi_star.len() != self.n_x() {
            return Err(MatchError::Contract("pi_star length differs from N_X".into()));
        }
        let mut seen = vec![false; self.n_y()];
        for &j in self.pi_star.iter().flatten() {
            if j >= self.n_y() || seen[j] {
                return Err(MatchError::Contract("pi_star not injective into [N_Y]".into()));
            }
            seen[j] = true;
        }
        if self.pi_star.iter().flatten().count() != m.both.len() {
            return Err(MatchError::Contract("|dom(pi_star)| differs from |S_XY|".into()));
        }
        Ok(())
    }
}

/// Poisson mean of the latent count, `(1-p)^{-2} / Z_n`.
pub fn latent_count_mean(model: &PairModel, p: f64) -> Result<f64> {
    Ok(1.0 / ((1.0 - p) * (1.0 - p) * model.z_n()?))
}

/// Samples the partial matching model with observation probability `p`.
pub fn sample_partial_instance(
    potential: &PotentialV,
    density: &DensityLambda,
    n: usize,
    p: f64,
    seed: u64,
) -> Result<PartialInstance> {
    if !(p > 0.0 && p < 1.0) {
        return Err(MatchError::Domain {
            what: "p",
            value: p,
            domain: "(0, 1)",
        });
    }
    let model = PairModel::new(potential.clone(), density.clone(), n)?;
    let mean = latent_count_mean(&model, p)?;
    let mut global = rng::stream(seed, 0);
    let count = Poisson::new(mean)
        .map_err(|e| MatchError::InvalidParameter(e.to_string()))?
        .sample(&mut global) as usize;
    let pairs = latent_pairs(&model, count, seed)?;

    let mut marks = Marks::default();
    for k in 0..count {
        let sx = global.random::<f64>() < p;
        let sy = global.random::<f64>() < p;
        match (sx, sy) {
            (true, true) => marks.both.push(k),
            (true, false) => marks.x_only.push(k),
            (false, true) => marks.y_only.push(k),
            (false, false) => marks.neither.push(k),
        }
    }

    let mut pi_x: Vec<usize> = marks.both.iter().chain(&marks.x_only).copied().collect();
    let mut pi_y: Vec<usize> = marks.both.iter().chain(&marks.y_only).copied().collect();
    pi_x.sort_unstable();
    pi_y.sort_unstable();
    pi_x.shuffle(&mut global);
    pi_y.shuffle(&mut global);

    let mut y_of_latent = vec![usize::MAX; count];
    for (j, &k) in pi_y.iter().enumerate() {
        y_of_latent[k] = j;
    }
    let pi_star = pi_x
        .iter()
        .map(|&k| (y_of_latent[k] != usize::MAX).then_some(y_of_latent[k]))
        .collect();
    let x = pi_x.iter().map(|&k| pairs[k].0).collect();
    let y = pi_y.iter().map(|&k| pairs[k].1).collect();

    let inst = PartialInstance {
        n,
        p,
        latent_count: count,
        marks,
        x,
        y,
        pi_x,
        pi_y,
        pi_star,
        seed,
        potential: potential.clone(),
        density: density.clone(),
    };
    inst.validate()?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss() -> PotentialV {
        PotentialV::gaussian(1.0).unwrap()
    }

    #[test]
    fn single_pair_instance() {
        let inst = sample_exact_instance(&gauss(), &DensityLambda::Uniform, 1, 3).unwrap();
        assert_eq!(inst.pi_star, vec![0]);
        assert!((0.0..=1.0).contains(&inst.x[0]) && (0.0..=1.0).contains(&inst.y[0]));
    }

    #[test]
    fn exact_is_deterministic() {
        let a = sample_exact_instance(&gauss(), &DensityLambda::Uniform, 20, 11).unwrap();
        let b = sample_exact_instance(&gauss(), &DensityLambda::Uniform, 20, 11).unwrap();
        let c = sample_exact_instance(&gauss(), &DensityLambda::Uniform, 20, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        a.validate().unwrap();
    }

    #[test]
    fn partial_invariants_hold() {
        for seed in 0..20 {
            let inst = sample_partial_instance(&gauss(), &DensityLambda::Uniform, 15, 0.5, seed).unwrap();
            inst.validate().unwrap();
            let m = &inst.marks;
            assert_eq!(
                m.both.len() + m.x_only.len() + m.y_only.len() + m.neither.len(),
                inst.latent_count
            );
        }
    }

    #[test]
    fn partial_rejects_bad_p() {
        assert!(sample_partial_instance(&gauss(), &DensityLambda::Uniform, 5, 1.0, 0).is_err());
    }

    #[test]
    fn degenerate_noise_gives_coincident_pairs() {
        let inst =
            sample_exact_instance(&PotentialV::degenerate(), &DensityLambda::Uniform, 10, 4).unwrap();
        for i in 0..10 {
            assert_eq!(inst.x[i], inst.y[inst.pi_star[i]]);
        }
    }

    #[test]
    fn from_data_builds_consistent_latents() {
        let inst = PartialInstance::from_data(
            10,
            0.5,
            vec![0.1, 0.2, 0.3],
            vec![0.15, 0.9],
            vec![Some(1), None, Some(0)],
            gauss(),
            DensityLambda::Uniform,
        )
        .unwrap();
        assert_eq!(inst.latent_count, 3);
        assert_eq!(inst.pi_x[0], inst.pi_y[1]);
        assert_eq!(inst.pi_x[2], inst.pi_y[0]);
    }
}
