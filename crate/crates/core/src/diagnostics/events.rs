//! Empirical rates of the regularity events `𝒜_l`, `𝒞_l(π)`, `ℒ_l(π)` and
//! `𝒢_i(π)` on exact instances.
//!
//! Sites are cut indices `l = 1..=n`: cut `l` separates the first `l`
//! sorted ranks from the rest (`l + ½` in 1-based rank notation). Row `i`
//! of the report carries the cut events at `l = i` and `𝒢` at point `i`.
//! The outer cut `l = n` never has crossings and, like every site outside
//! `1..n−1`, counts as holding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::boundary::{boundary_sorted, sorted_bijection};
use super::mcmc::{mcmc_sample_exact, ChainOptions};
use crate::error::{MatchError, Result};
use crate::exact::bruteforce::next_permutation;
use crate::exact::problem::{sort_maps, ExactPosteriorProblem, SortMaps};
use crate::numeric::log_sum_exp;
use crate::rng;
use crate::sampler::ExactInstance;

/// Largest `n` for the enumeration sampler.
pub const ENUMERATION_SAMPLER_CAP: usize = 9;

/// Source of posterior bijections.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PosteriorSampler {
    /// Exact i.i.d. draws by full enumeration (`n ≤ 9`).
    Enumeration { samples: usize },
    /// Thinned transposition chain.
    Mcmc(ChainOptions),
}

/// I.i.d. draws from the exact posterior by enumerating all `n!` bijections.
pub fn sample_posterior_enumeration(problem: &ExactPosteriorProblem, samples: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = problem.n();
    if n > ENUMERATION_SAMPLER_CAP {
        return Err(MatchError::SizeCap {
            engine: "enumeration_sampler",
            size: n as u128,
            cap: ENUMERATION_SAMPLER_CAP as u128,
        });
    }
    let mut perms = Vec::new();
    let mut logw = Vec::new();
    let mut pi: Vec<usize> = (0..n).collect();
    loop {
        let lw: f64 = pi.iter().enumerate().map(|(i, &j)| problem.log_weight(i, j)).sum();
        if lw > f64::NEG_INFINITY {
            perms.push(pi.clone());
            logw.push(lw);
        }
        if !next_permutation(&mut pi) {
            break;
        }
    }
    let z = log_sum_exp(&logw);
    if !z.is_finite() {
        return Err(MatchError::Numeric("posterior has no mass".into()));
    }
    let mut cdf = Vec::with_capacity(logw.len());
    let mut acc = 0.0;
    for lw in &logw {
        acc += (lw - z).exp();
        cdf.push(acc);
    }
    let mut r = rng::stream(seed, 0);
    Ok((0..samples)
        .map(|_| {
            let u = r.random::<f64>() * acc;
            perms[cdf.partition_point(|&c| c <= u).min(perms.len() - 1)].clone()
        })
        .collect())
}

impl PosteriorSampler {
    pub fn draw(&self, problem: &ExactPosteriorProblem, seed: u64) -> Result<Vec<Vec<usize>>> {
        match *self {
            PosteriorSampler::Enumeration { samples } => sample_posterior_enumeration(problem, samples, seed),
            PosteriorSampler::Mcmc(opts) => mcmc_sample_exact(problem, opts, seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteRates {
    pub site: usize,
    /// `𝒜_l`, a function of the data alone.
    pub a: bool,
    pub c_frequency: f64,
    pub l_frequency: f64,
    /// Frequency of `𝒢_i` at point `i = site`.
    pub g_frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRates {
    pub k: usize,
    pub l: usize,
    pub samples: usize,
    pub sites: Vec<SiteRates>,
    pub a_fraction: f64,
    pub c_fraction: f64,
    pub l_fraction: f64,
    pub g_fraction: f64,
    /// `(1/n) Σ_i P̂(𝒢_i^c)`.
    pub g_complement_mean: f64,
    /// Frequency of `Γ_{l+½} = ∅` over (sample, interior site) pairs where
    /// `ℒ_l` holds; `None` if it never holds.
    pub iota: Option<f64>,
}

/// `𝒜_l` for cuts `0..=n`; entries outside `1..n−1` are `true`.
pub fn a_events(x: &[f64], y: &[f64], maps: &SortMaps, lambda_min: f64, l: usize) -> Vec<bool> {
    let n = x.len();
    let nf = n as f64;
    let spread = 3.0 * l as f64 / (2.0 * lambda_min);
    let xs: Vec<f64> = maps.s.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = maps.t.iter().map(|&j| y[j]).collect();
    (0..=n)
        .map(|site| {
            if site == 0 || site >= n {
                return true;
            }
            // 1-based rank `site` is 0-based `site − 1`; |j − (site + ½)| ≤ L
            let r = site - 1;
            let lo = site.saturating_sub(l);
            let hi = (site + l).min(n) - 1;
            let near = (lo..=hi).all(|j| nf * (xs[j] - xs[r]).abs() <= spread && nf * (ys[j] - ys[r]).abs() <= spread);
            near && nf * (xs[r] - ys[r]).abs() <= l as f64
        })
        .collect()
}

/// `𝒞_l(π)` for cuts `0..=n` of a sorted bijection.
pub fn c_events(pi_st: &[usize], l: usize) -> Vec<bool> {
    (0..=pi_st.len())
        .map(|site| {
            boundary_sorted(pi_st, site)
                .crossing_pairs
                .iter()
                .all(|&(k, m)| k.abs_diff(m) <= l)
        })
        .collect()
}

/// `𝒢_i` for points `i = 1..=n` given `ℒ` over cuts `0..=n`.
pub fn g_events(l_ev: &[bool], kl: usize) -> Vec<bool> {
    let n = l_ev.len() - 1;
    let holds = |s: i64| s < 0 || s as usize > n || l_ev[s as usize];
    let need = 2.0 * kl as f64 / 3.0;
    (1..=n as i64)
        .map(|i| {
            let left = (1..=kl as i64).filter(|&k| holds(i - k)).count() as f64;
            let right = (0..kl as i64).filter(|&k| holds(i + k)).count() as f64;
            left >= need && right >= need
        })
        .collect()
}

/// Event rates at window parameters `(K, L)` over posterior draws.
pub fn event_rates(inst: &ExactInstance, k: usize, l: usize, sampler: &PosteriorSampler, seed: u64) -> Result<EventRates> {
    if k == 0 || l == 0 {
        return Err(MatchError::InvalidParameter("K and L must be ≥ 1".into()));
    }
    let n = inst.n;
    let problem = ExactPosteriorProblem::from_instance(inst)?;
    let maps = sort_maps(&inst.x, &inst.y);
    let a = a_events(&inst.x, &inst.y, &maps, inst.density.lambda_min(), l);
    let draws = sampler.draw(&problem, seed)?;
    if draws.is_empty() {
        return Err(MatchError::InvalidParameter("chain too short to yield a thinned draw".into()));
    }
    let mut c_cnt = vec![0usize; n + 1];
    let mut l_cnt = vec![0usize; n + 1];
    let mut g_cnt = vec![0usize; n];
    let (mut l_sites, mut empty_sites) = (0usize, 0usize);
    for pi in &draws {
        let pi_st = sorted_bijection(&maps, pi);
        let c = c_events(&pi_st, l);
        let lev: Vec<bool> = a.iter().zip(&c).map(|(&x, &y)| x && y).collect();
        for s in 0..=n {
            c_cnt[s] += c[s] as usize;
            l_cnt[s] += lev[s] as usize;
            if lev[s] && s > 0 && s < n {
                l_sites += 1;
                empty_sites += boundary_sorted(&pi_st, s).is_empty() as usize;
            }
        }
        for (i, g) in g_events(&lev, k * l).into_iter().enumerate() {
            g_cnt[i] += g as usize;
        }
    }
    let m = draws.len() as f64;
    let sites: Vec<SiteRates> = (1..=n)
        .map(|s| SiteRates {
            site: s,
            a: a[s],
            c_frequency: c_cnt[s] as f64 / m,
            l_frequency: l_cnt[s] as f64 / m,
            g_frequency: g_cnt[s - 1] as f64 / m,
        })
        .collect();
    let mean = |f: &dyn Fn(&SiteRates) -> f64| sites.iter().map(f).sum::<f64>() / n.max(1) as f64;
    let g_fraction = mean(&|r| r.g_frequency);
    Ok(EventRates {
        k,
        l,
        samples: draws.len(),
        a_fraction: mean(&|r| r.a as u8 as f64),
        c_fraction: mean(&|r| r.c_frequency),
        l_fraction: mean(&|r| r.l_frequency),
        g_fraction,
        g_complement_mean: 1.0 - g_fraction,
        iota: (l_sites > 0).then(|| empty_sites as f64 / l_sites as f64),
        sites,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DensityLambda, PotentialV};
    use crate::sampler::sample_exact_instance;

    #[test]
    fn degenerate_posterior_all_regular() {
        let inst = sample_exact_instance(&PotentialV::degenerate(), &DensityLambda::Uniform, 8, 3).unwrap();
        let r = event_rates(&inst, 1, 8, &PosteriorSampler::Enumeration { samples: 50 }, 1).unwrap();
        assert_eq!(r.c_fraction, 1.0);
        assert!(r.sites.iter().all(|s| s.a));
        assert_eq!(r.g_fraction, 1.0);
        assert_eq!(r.iota, Some(1.0));
    }

    #[test]
    fn large_l_makes_a_hold() {
        let inst = sample_exact_instance(&PotentialV::gaussian(1.0).unwrap(), &DensityLambda::Uniform, 30, 2).unwrap();
        let maps = sort_maps(&inst.x, &inst.y);
        assert!(a_events(&inst.x, &inst.y, &maps, 1.0, 40).iter().all(|&v| v));
    }

    #[test]
    fn fractions_in_unit_interval_and_reproducible() {
        let inst = sample_exact_instance(&PotentialV::gaussian(1.0).unwrap(), &DensityLambda::Uniform, 12, 5).unwrap();
        let s = PosteriorSampler::Mcmc(ChainOptions::steps(5_000));
        let a = event_rates(&inst, 2, 2, &s, 9).unwrap();
        let b = event_rates(&inst, 2, 2, &s, 9).unwrap();
        assert_eq!(a, b);
        for f in [a.a_fraction, a.c_fraction, a.l_fraction, a.g_fraction] {
            assert!((0.0..=1.0).contains(&f));
        }
    }

    #[test]
    fn crossings_are_rank_balanced() {
        let pi_st = vec![2, 0, 4, 1, 3];
        for l in 0..=5 {
            let b = boundary_sorted(&pi_st, l);
            let right = b.crossing_pairs.iter().filter(|p| p.0 < l).count();
            assert_eq!(2 * right, b.crossing_pairs.len());
        }
        assert_eq!(c_events(&pi_st, 1), vec![true, false, false, false, false, true]);
    }
}
