//! Metropolis samplers over bijections and partial bijections.
//!
//! Marginal estimates count every post-burn-in state; the thinned sample
//! streams are for downstream observables (boundary variables, events).

use rand::Rng;

use crate::error::{MatchError, Result};
use crate::exact::problem::{sort_maps, ExactPosteriorProblem, MarginalTable};
use crate::partial::{check_partial, PartialMarginalTable, PartialPosteriorProblem};
use crate::rng::{self, StreamRng};
use crate::sampler::is_permutation;

/// `⌈10 · m · ln m⌉`, at least `m`.
pub fn default_burn_in(m: usize) -> u64 {
    let m = m.max(1) as f64;
    (10.0 * m * m.ln()).ceil().max(m) as u64
}

/// Chain length settings. `None` selects the size-based default.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainOptions {
    pub steps: u64,
    pub burn_in: Option<u64>,
    pub thin: Option<u64>,
}

impl ChainOptions {
    pub fn steps(steps: u64) -> Self {
        ChainOptions {
            steps,
            burn_in: None,
            thin: None,
        }
    }

    fn check(&self) -> Result<()> {
        if self.steps == 0 || self.thin == Some(0) {
            return Err(MatchError::InvalidParameter("chain steps and thinning must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[inline]
fn metropolis(rng: &mut StreamRng, log_ratio: f64) -> bool {
    // NaN (−∞ + ∞ under a degenerate potential) rejects
    log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp()
}

/// Transposition chain targeting `exp(−H(π))`, started at the sorted
/// matching `π = t ∘ s⁻¹`.
pub struct ExactChain<'a> {
    problem: &'a ExactPosteriorProblem,
    state: Vec<usize>,
    rng: StreamRng,
    pub accepted: u64,
    pub proposed: u64,
}

impl<'a> ExactChain<'a> {
    pub fn new(problem: &'a ExactPosteriorProblem, seed: u64) -> Self {
        let maps = sort_maps(&problem.x, &problem.y);
        let mut state = vec![0; problem.n()];
        for (k, &i) in maps.s.iter().enumerate() {
            state[i] = maps.t[k];
        }
        Self::from_state(problem, state, seed)
    }

    pub fn from_state(problem: &'a ExactPosteriorProblem, state: Vec<usize>, seed: u64) -> Self {
        ExactChain {
            problem,
            state,
            rng: rng::stream(seed, 0),
            accepted: 0,
            proposed: 0,
        }
    }

    pub fn state(&self) -> &[usize] {
        &self.state
    }

    /// One uniform transposition proposal; returns whether it was accepted.
    pub fn step(&mut self) -> bool {
        let n = self.state.len();
        if n < 2 {
            return false;
        }
        self.proposed += 1;
        let a = self.rng.random_range(0..n);
        let mut b = self.rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let delta = self.problem.swap_delta(&self.state, a, b);
        if metropolis(&mut self.rng, -delta) {
            self.state.swap(a, b);
            self.accepted += 1;
            debug_assert!(is_permutation(&self.state));
            true
        } else {
            false
        }
    }
}

/// Thinned post-burn-in bijections.
pub fn mcmc_sample_exact(problem: &ExactPosteriorProblem, opts: ChainOptions, seed: u64) -> Result<Vec<Vec<usize>>> {
    opts.check()?;
    let n = problem.n();
    let mut chain = ExactChain::new(problem, seed);
    for _ in 0..opts.burn_in.unwrap_or_else(|| default_burn_in(n)) {
        chain.step();
    }
    let thin = opts.thin.unwrap_or(n.max(1) as u64);
    let mut out = Vec::with_capacity((opts.steps / thin) as usize);
    for t in 1..=opts.steps {
        chain.step();
        if t % thin == 0 {
            out.push(chain.state.clone());
        }
    }
    Ok(out)
}

/// Occupation-frequency estimate of the marginal table.
pub fn mcmc_marginals_exact(problem: &ExactPosteriorProblem, opts: ChainOptions, seed: u64) -> Result<MarginalTable> {
    opts.check()?;
    let n = problem.n();
    let mut chain = ExactChain::new(problem, seed);
    for _ in 0..opts.burn_in.unwrap_or_else(|| default_burn_in(n)) {
        chain.step();
    }
    let mut counts = vec![vec![0u64; n]; n];
    for _ in 0..opts.steps {
        chain.step();
        for (i, &j) in chain.state.iter().enumerate() {
            counts[i][j] += 1;
        }
    }
    let total = opts.steps as f64;
    Ok(MarginalTable {
        probs: counts
            .into_iter()
            .map(|r| r.into_iter().map(|c| c as f64 / total).collect())
            .collect(),
    })
}

/// Index set with O(1) insert, remove and uniform access.
#[derive(Clone, Debug)]
struct IndexSet {
    items: Vec<usize>,
    pos: Vec<usize>,
}

impl IndexSet {
    const ABSENT: usize = usize::MAX;

    fn new(universe: usize) -> Self {
        IndexSet {
            items: Vec::new(),
            pos: vec![Self::ABSENT; universe],
        }
    }

    fn insert(&mut self, v: usize) {
        debug_assert_eq!(self.pos[v], Self::ABSENT);
        self.pos[v] = self.items.len();
        self.items.push(v);
    }

    fn remove(&mut self, v: usize) {
        let k = self.pos[v];
        self.items.swap_remove(k);
        if let Some(&moved) = self.items.get(k) {
            self.pos[moved] = k;
        }
        self.pos[v] = Self::ABSENT;
    }

    fn len(&self) -> usize {
        self.items.len()
    }
}

/// A proposal of the partial chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartialMove {
    /// Match unmatched `X_i` with unmatched `Y_j`.
    Add(usize, usize),
    /// Unmatch `X_i`.
    Remove(usize),
    /// Exchange the partners of matched `X_a` and `X_b`.
    Swap(usize, usize),
}

/// Add/remove/swap chain targeting the partial posterior; each step picks
/// uniformly among the `T(π)` valid moves and accepts with
/// `min(1, w(π')/w(π) · T(π)/T(π'))`. Starts from the empty matching.
pub struct PartialChain<'a> {
    problem: &'a PartialPosteriorProblem,
    pi_x: Vec<Option<usize>>,
    pi_y: Vec<Option<usize>>,
    free_x: IndexSet,
    free_y: IndexSet,
    matched: IndexSet,
    rng: StreamRng,
    pub accepted: u64,
    pub proposed: u64,
}

fn move_count(free_x: usize, free_y: usize, matched: usize) -> u64 {
    let m = matched as u64;
    (free_x * free_y) as u64 + m + m * m.saturating_sub(1) / 2
}

impl<'a> PartialChain<'a> {
    pub fn new(problem: &'a PartialPosteriorProblem, seed: u64) -> Self {
        let (nx, ny) = (problem.n_x(), problem.n_y());
        let mut free_x = IndexSet::new(nx);
        let mut free_y = IndexSet::new(ny);
        (0..nx).for_each(|i| free_x.insert(i));
        (0..ny).for_each(|j| free_y.insert(j));
        PartialChain {
            problem,
            pi_x: vec![None; nx],
            pi_y: vec![None; ny],
            free_x,
            free_y,
            matched: IndexSet::new(nx),
            rng: rng::stream(seed, 0),
            accepted: 0,
            proposed: 0,
        }
    }

    pub fn state(&self) -> &[Option<usize>] {
        &self.pi_x
    }

    /// `T(π)`, the number of valid moves from the current state.
    pub fn move_count(&self) -> u64 {
        move_count(self.free_x.len(), self.free_y.len(), self.matched.len())
    }

    /// `ln[w(π')/w(π) · T(π)/T(π')]` for a valid move.
    pub fn log_acceptance(&self, mv: PartialMove) -> f64 {
        let p = self.problem;
        let (fx, fy, m) = (self.free_x.len(), self.free_y.len(), self.matched.len());
        let (log_w, t_after) = match mv {
            PartialMove::Add(i, j) => (p.pair_gain(i, j), move_count(fx - 1, fy - 1, m + 1)),
            PartialMove::Remove(i) => {
                let j = self.pi_x[i].expect("remove needs a matched X");
                (-p.pair_gain(i, j), move_count(fx + 1, fy + 1, m - 1))
            }
            PartialMove::Swap(a, b) => {
                let (ja, jb) = (self.pi_x[a].unwrap(), self.pi_x[b].unwrap());
                (
                    p.log_weight(a, jb) + p.log_weight(b, ja) - p.log_weight(a, ja) - p.log_weight(b, jb),
                    move_count(fx, fy, m),
                )
            }
        };
        log_w + (self.move_count() as f64).ln() - (t_after as f64).ln()
    }

    pub fn apply(&mut self, mv: PartialMove) {
        match mv {
            PartialMove::Add(i, j) => {
                self.pi_x[i] = Some(j);
                self.pi_y[j] = Some(i);
                self.free_x.remove(i);
                self.free_y.remove(j);
                self.matched.insert(i);
            }
            PartialMove::Remove(i) => {
                let j = self.pi_x[i].take().expect("remove needs a matched X");
                self.pi_y[j] = None;
                self.free_x.insert(i);
                self.free_y.insert(j);
                self.matched.remove(i);
            }
            PartialMove::Swap(a, b) => {
                let (ja, jb) = (self.pi_x[a].unwrap(), self.pi_x[b].unwrap());
                self.pi_x[a] = Some(jb);
                self.pi_x[b] = Some(ja);
                self.pi_y[ja] = Some(b);
                self.pi_y[jb] = Some(a);
            }
        }
        debug_assert!(check_partial(&self.pi_x, self.pi_x.len(), self.pi_y.len()).is_ok());
    }

    fn propose(&mut self) -> Option<PartialMove> {
        let total = self.move_count();
        if total == 0 {
            return None;
        }
        let (fx, fy, m) = (self.free_x.len(), self.free_y.len(), self.matched.len());
        let mut r = self.rng.random_range(0..total);
        let adds = (fx * fy) as u64;
        if r < adds {
            let (a, b) = ((r / fy as u64) as usize, (r % fy as u64) as usize);
            return Some(PartialMove::Add(self.free_x.items[a], self.free_y.items[b]));
        }
        r -= adds;
        if r < m as u64 {
            return Some(PartialMove::Remove(self.matched.items[r as usize]));
        }
        let a = self.rng.random_range(0..m);
        let mut b = self.rng.random_range(0..m - 1);
        if b >= a {
            b += 1;
        }
        Some(PartialMove::Swap(self.matched.items[a], self.matched.items[b]))
    }

    pub fn step(&mut self) -> bool {
        let Some(mv) = self.propose() else {
            return false;
        };
        self.proposed += 1;
        let lr = self.log_acceptance(mv);
        if metropolis(&mut self.rng, lr) {
            self.apply(mv);
            self.accepted += 1;
            true
        } else {
            false
        }
    }
}

fn partial_defaults(problem: &PartialPosteriorProblem, opts: ChainOptions) -> (u64, u64) {
    let size = problem.n_x() + problem.n_y();
    (
        opts.burn_in.unwrap_or_else(|| default_burn_in(size)),
        opts.thin.unwrap_or(problem.n_x().max(problem.n_y()).max(1) as u64),
    )
}

/// Thinned post-burn-in partial bijections.
pub fn mcmc_sample_partial(
    problem: &PartialPosteriorProblem,
    opts: ChainOptions,
    seed: u64,
) -> Result<Vec<Vec<Option<usize>>>> {
    opts.check()?;
    let (burn, thin) = partial_defaults(problem, opts);
    let mut chain = PartialChain::new(problem, seed);
    for _ in 0..burn {
        chain.step();
    }
    let mut out = Vec::with_capacity((opts.steps / thin) as usize);
    for t in 1..=opts.steps {
        chain.step();
        if t % thin == 0 {
            out.push(chain.pi_x.clone());
        }
    }
    Ok(out)
}

pub fn mcmc_marginals_partial(
    problem: &PartialPosteriorProblem,
    opts: ChainOptions,
    seed: u64,
) -> Result<PartialMarginalTable> {
    opts.check()?;
    let (burn, _) = partial_defaults(problem, opts);
    let (nx, ny) = (problem.n_x(), problem.n_y());
    let mut chain = PartialChain::new(problem, seed);
    for _ in 0..burn {
        chain.step();
    }
    let mut matched = vec![vec![0u64; ny]; nx];
    let mut unmatched = vec![0u64; nx];
    for _ in 0..opts.steps {
        chain.step();
        for (i, t) in chain.pi_x.iter().enumerate() {
            match *t {
                Some(j) => matched[i][j] += 1,
                None => unmatched[i] += 1,
            }
        }
    }
    let total = opts.steps as f64;
    Ok(PartialMarginalTable {
        matched: matched
            .into_iter()
            .map(|r| r.into_iter().map(|c| c as f64 / total).collect())
            .collect(),
        unmatched: unmatched.into_iter().map(|c| c as f64 / total).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::marginals_bruteforce_exact;
    use crate::model::PotentialV;
    use crate::partial::marginals_dp_partial;

    fn exact_problem(n: usize, seed: u64) -> ExactPosteriorProblem {
        let mut r = rng::stream(seed, 9);
        let x: Vec<f64> = (0..n).map(|_| r.random()).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 0.3 * (r.random::<f64>() - 0.5) / n as f64).collect();
        ExactPosteriorProblem::from_points(x, y, n as f64, PotentialV::gaussian(1.0).unwrap()).unwrap()
    }

    #[test]
    fn flat_weights_always_accept() {
        let p = ExactPosteriorProblem::from_points(vec![0.0; 4], vec![0.0; 4], 1.0, PotentialV::gaussian(1.0).unwrap()).unwrap();
        let mut c = ExactChain::new(&p, 1);
        for _ in 0..1000 {
            assert!(c.step());
        }
    }

    #[test]
    fn detailed_balance_symmetric_proposal() {
        let p = exact_problem(5, 3);
        let mut c = ExactChain::new(&p, 2);
        for _ in 0..200 {
            c.step();
            let pi = c.state().to_vec();
            let mut pj = pi.clone();
            pj.swap(0, 3);
            let (h, hp) = (p.hamiltonian(&pi).unwrap(), p.hamiltonian(&pj).unwrap());
            let acc = |d: f64| (-d).exp().min(1.0);
            let fwd = (-h).exp() * acc(hp - h);
            let bwd = (-hp).exp() * acc(h - hp);
            assert!((fwd - bwd).abs() <= 1e-12 * fwd.max(bwd));
            assert!((p.swap_delta(&pi, 0, 3) - (hp - h)).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_chain_matches_bruteforce() {
        let p = exact_problem(5, 11);
        let truth = marginals_bruteforce_exact(&p).unwrap();
        let est = mcmc_marginals_exact(&p, ChainOptions::steps(400_000), 5).unwrap();
        assert!(est.max_row_tv(&truth) < 0.03, "{}", est.max_row_tv(&truth));
    }

    fn partial_problem(nx: usize, ny: usize, seed: u64) -> PartialPosteriorProblem {
        let mut r = rng::stream(seed, 4);
        let x: Vec<f64> = (0..nx).map(|_| r.random::<f64>() * 3.0).collect();
        let y: Vec<f64> = (0..ny).map(|_| r.random::<f64>() * 3.0).collect();
        PartialPosteriorProblem::from_parts(x, y, 1.0, PotentialV::gaussian(1.0).unwrap(), vec![0.7; nx], vec![0.4; ny]).unwrap()
    }

    #[test]
    fn two_state_chain() {
        let p = partial_problem(1, 1, 0);
        let g = p.pair_gain(0, 0);
        let on = g.exp() / (1.0 + g.exp());
        let est = mcmc_marginals_partial(&p, ChainOptions::steps(100_000), 7).unwrap();
        assert!((est.matched[0][0] - on).abs() < 0.01);
    }

    #[test]
    fn remove_add_reciprocal() {
        let p = partial_problem(3, 4, 1);
        let mut c = PartialChain::new(&p, 0);
        c.apply(PartialMove::Add(1, 2));
        c.apply(PartialMove::Add(0, 0));
        let rem = c.log_acceptance(PartialMove::Remove(1));
        c.apply(PartialMove::Remove(1));
        let add = c.log_acceptance(PartialMove::Add(1, 2));
        assert!((rem + add).abs() < 1e-12);
    }

    #[test]
    fn partial_chain_matches_dp() {
        let p = partial_problem(4, 4, 2);
        let truth = marginals_dp_partial(&p).unwrap();
        let est = mcmc_marginals_partial(&p, ChainOptions::steps(400_000), 3).unwrap();
        for i in 0..4 {
            assert!((est.unmatched[i] - truth.unmatched[i]).abs() < 0.02);
        }
        assert!(est.max_abs_diff(&truth) < 0.02);
    }

    #[test]
    fn thinned_samples_are_valid() {
        let p = partial_problem(3, 3, 5);
        let s = mcmc_sample_partial(&p, ChainOptions::steps(300), 1).unwrap();
        assert_eq!(s.len(), 100);
        assert!(s.iter().all(|pi| check_partial(pi, 3, 3).is_ok()));
        let e = exact_problem(4, 1);
        assert!(mcmc_sample_exact(&e, ChainOptions::steps(40), 1).unwrap().iter().all(|pi| is_permutation(pi)));
        assert!(mcmc_sample_exact(&e, ChainOptions::steps(0), 1).is_err());
    }
}
