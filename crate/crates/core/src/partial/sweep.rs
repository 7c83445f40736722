//! Position sweep for large partial problems.
//!
//! All X and Y points are visited in order of position. The state between
//! two consecutive points is the set of already visited points that will be
//! matched to a point further right, i.e. the boundary variable at that
//! location. Each point is either left unmatched, opened (its partner lies
//! ahead), or closes an open point of the other kind.
//!
//! Two truncations keep the state space finite. Pairs whose gain over
//! leaving both points unmatched is below `exp(-cutoff_log)` are never
//! formed, which bounds how long a point may stay open. States whose
//! optimistic mass (current mass times the best possible closing factor of
//! every open point) is `exp(-prune_log)` below the best state of the layer
//! are dropped. On small problems the result agrees with the subset DP to
//! round-off.
//!
//! States are bitmasks over the most recent points (bit `k` is the point
//! `k + 1` places back). Forward layers are checkpointed every `√m` points
//! and recomputed during the backward pass.

use rustc_hash::FxHashMap;

use crate::error::{MatchError, Result};
use crate::numeric::log_add;

use super::problem::{PartialMarginalTable, PartialPosteriorProblem};

/// Truncation controls for the sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    /// Pairs with log-gain below `-cutoff_log` are never formed.
    pub cutoff_log: f64,
    /// States this many nats below the best optimistic score are dropped.
    pub prune_log: f64,
    /// Hard cap on states per layer.
    pub state_cap: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            cutoff_log: 30.0,
            prune_log: 18.0,
            state_cap: 4_000_000,
        }
    }
}

impl SweepOptions {
    /// Settings tight enough to match the exact engines to ~1e-12.
    pub fn precise() -> Self {
        SweepOptions {
            cutoff_log: 45.0,
            prune_log: 45.0,
            state_cap: 4_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Point {
    X(usize),
    Y(usize),
}

type Layer = Vec<(u128, f64)>;

struct Sweep<'a> {
    problem: &'a PartialPosteriorProblem,
    opts: SweepOptions,
    pos: Vec<f64>,
    kind: Vec<Point>,
    /// Largest lag still within reach of each point.
    lag_max: Vec<usize>,
    /// Whether a point of the other kind lies ahead within reach.
    can_open: Vec<bool>,
    /// `future[o][t]`: log of the summed closing factors of `o` against
    /// partners at index `o + 1 + t` or later.
    future: Vec<Vec<f64>>,
}

impl<'a> Sweep<'a> {
    fn new(problem: &'a PartialPosteriorProblem, opts: SweepOptions) -> Result<Self> {
        let mut pts: Vec<(f64, Point)> = problem
            .x
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, Point::X(i)))
            .chain(problem.y.iter().enumerate().map(|(j, &v)| (v, Point::Y(j))))
            .collect();
        let rank = |p: &Point| match *p {
            Point::X(i) => (0, i),
            Point::Y(j) => (1, j),
        };
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(rank(&a.1).cmp(&rank(&b.1))));
        let pos: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let kind: Vec<Point> = pts.iter().map(|p| p.1).collect();

        let pot = &problem.potential;
        let umin_x = problem.u_x.iter().copied().fold(f64::INFINITY, f64::min);
        let umin_y = problem.u_y.iter().copied().fold(f64::INFINITY, f64::min);
        let target = opts.cutoff_log - pot.v_min() - umin_x.min(0.0) - umin_y.min(0.0);
        let reach = reach_for(|d| pot.tail_min(d), target) / problem.scale;

        let m = pos.len();
        let mut lag_max = vec![0; m];
        for e in 0..m {
            let mut k = 0;
            while k < e && pos[e] - pos[e - 1 - k] <= reach {
                k += 1;
            }
            lag_max[e] = k;
            if k >= 127 {
                return Err(MatchError::SizeCap {
                    engine: "sweep_partial_density",
                    size: k as u128,
                    cap: 126,
                });
            }
        }
        let mut can_open = vec![false; m];
        for a in 0..m {
            for b in a + 1..m {
                if pos[b] - pos[a] > reach {
                    break;
                }
                if std::mem::discriminant(&kind[a]) != std::mem::discriminant(&kind[b]) {
                    can_open[a] = true;
                    break;
                }
            }
        }
        let mut sweep = Sweep {
            problem,
            opts,
            pos,
            kind,
            lag_max,
            can_open,
            future: Vec::new(),
        };
        sweep.future = (0..m)
            .map(|o| {
                let mut acc = Vec::new();
                let mut b = o + 1;
                while b < m && sweep.pos[b] - sweep.pos[o] <= reach {
                    acc.push(sweep.gain(o, b).unwrap_or(f64::NEG_INFINITY));
                    b += 1;
                }
                let mut run = f64::NEG_INFINITY;
                for v in acc.iter_mut().rev() {
                    run = log_add(run, *v);
                    *v = run;
                }
                acc
            })
            .collect();
        Ok(sweep)
    }

    fn len(&self) -> usize {
        self.pos.len()
    }

    fn gain(&self, a: usize, b: usize) -> Option<f64> {
        let g = match (self.kind[a], self.kind[b]) {
            (Point::X(i), Point::Y(j)) | (Point::Y(j), Point::X(i)) => self.problem.pair_gain(i, j),
            _ => return None,
        };
        (g >= -self.opts.cutoff_log).then_some(g)
    }

    /// Visits every admissible move out of `state` at point `e` as
    /// `(closed partner, next state, factor)`.
    #[inline]
    fn moves(&self, e: usize, state: u128, close_w: &[f64], mut visit: impl FnMut(Option<usize>, u128, f64)) {
        let alive = self.lag_max[e];
        if state >> alive != 0 {
            return;
        }
        visit(None, state << 1, 1.0);
        if self.can_open[e] {
            visit(None, state << 1 | 1, 1.0);
        }
        let mut bits = state;
        while bits != 0 {
            let k = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let w = close_w[k];
            if w > 0.0 {
                visit(Some(e - 1 - k), (state & !(1u128 << k)) << 1, w);
            }
        }
    }

    /// Closing factors `exp(gain)` of point `e` against each live lag.
    fn close_weights(&self, e: usize) -> Vec<f64> {
        (0..self.lag_max[e])
            .map(|k| self.gain(e - 1 - k, e).map_or(0.0, f64::exp))
            .collect()
    }

    /// Advances one point; returns the normalized next layer and the log of
    /// the factor removed.
    fn forward_step(&self, e: usize, layer: &Layer) -> Result<(Layer, f64)> {
        let close_w = self.close_weights(e);
        let mut next: FxHashMap<u128, f64> = FxHashMap::default();
        next.reserve(layer.len() * 2);
        for &(s, a) in layer {
            self.moves(e, s, &close_w, |_, t, f| {
                *next.entry(t).or_insert(0.0) += a * f;
            });
        }
        let mut out: Layer = next.into_iter().filter(|x| x.1 > 0.0).collect();
        out.sort_unstable_by_key(|x| x.0);
        let m = self.len();
        if e + 1 < m {
            // available closing mass of the point `k` places back
            let pen: Vec<f64> = (0..=e.min(127))
                .map(|k| {
                    let o = e - k;
                    self.future[o].get(e - o).copied().unwrap_or(f64::NEG_INFINITY)
                })
                .collect();
            let score = |s: u128, a: f64| {
                let mut v = a.ln();
                let mut bits = s;
                while bits != 0 {
                    let k = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    v += pen[k];
                }
                v
            };
            let best = out.iter().map(|&(s, a)| score(s, a)).fold(f64::NEG_INFINITY, f64::max);
            let floor = best - self.opts.prune_log;
            out.retain(|&(s, a)| score(s, a) >= floor);
        } else {
            out.retain(|x| x.0 == 0);
        }
        if out.len() > self.opts.state_cap {
            return Err(MatchError::SizeCap {
                engine: "sweep_partial",
                size: out.len() as u128,
                cap: self.opts.state_cap as u128,
            });
        }
        let top = out.iter().map(|x| x.1).fold(0.0, f64::max);
        if !(top > 0.0) {
            return Err(MatchError::Numeric("partial sweep lost all states".into()));
        }
        out.iter_mut().for_each(|x| x.1 /= top);
        Ok((out, top.ln()))
    }
}

/// Smallest distance `d` with `tail(d) ≥ target`, for nondecreasing `tail`.
fn reach_for(tail: impl Fn(f64) -> f64, target: f64) -> f64 {
    if tail(0.0) >= target {
        return 0.0;
    }
    let mut hi = 1.0;
    while tail(hi) < target {
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn marginals_sweep_partial(problem: &PartialPosteriorProblem) -> Result<PartialMarginalTable> {
    marginals_sweep_partial_with(problem, &SweepOptions::default())
}

pub fn marginals_sweep_partial_with(
    problem: &PartialPosteriorProblem,
    opts: &SweepOptions,
) -> Result<PartialMarginalTable> {
    let (nx, ny) = (problem.n_x(), problem.n_y());
    if nx == 0 {
        return Ok(PartialMarginalTable {
            matched: Vec::new(),
            unmatched: Vec::new(),
        });
    }
    let sweep = Sweep::new(problem, *opts)?;
    let m = sweep.len();
    let stride = ((m as f64).sqrt().ceil() as usize).max(1);

    // forward pass keeping checkpoints and cumulative log-scales
    let mut checkpoints: Vec<Layer> = Vec::with_capacity(m / stride + 1);
    let mut log_a = vec![0.0; m + 1];
    let mut layer: Layer = vec![(0, 1.0)];
    for e in 0..m {
        if e % stride == 0 {
            checkpoints.push(layer.clone());
        }
        let (next, shift) = sweep.forward_step(e, &layer)?;
        log_a[e + 1] = log_a[e] + shift;
        layer = next;
    }
    let log_z = log_a[m];

    let mut matched = vec![vec![0.0; ny]; nx];
    let mut unmatched = vec![0.0; nx];
    let mut beta: FxHashMap<u128, f64> = FxHashMap::default();
    beta.insert(0, 1.0);
    let mut log_b = 0.0;
    for block in (0..checkpoints.len()).rev() {
        let start = block * stride;
        let end = (start + stride).min(m);
        let mut layers: Vec<Layer> = Vec::with_capacity(end - start);
        layers.push(checkpoints[block].clone());
        for e in start..end - 1 {
            let (next, _) = sweep.forward_step(e, &layers[e - start])?;
            layers.push(next);
        }
        for e in (start..end).rev() {
            let close_w = sweep.close_weights(e);
            let here = sweep.kind[e];
            // contributions recorded at different points must share one scale
            let layer_scale = (log_a[e] + log_b - log_z).exp();
            let mut prev: FxHashMap<u128, f64> = FxHashMap::default();
            prev.reserve(layers[e - start].len());
            for &(s, a) in &layers[e - start] {
                let a = a * layer_scale;
                let mut b = 0.0;
                sweep.moves(e, s, &close_w, |closed, t, f| {
                    let Some(&bn) = beta.get(&t) else { return };
                    let w = f * bn;
                    b += w;
                    match (closed, here) {
                        (None, Point::X(i)) if t & 1 == 0 => unmatched[i] += a * w,
                        (Some(o), Point::X(i)) => {
                            if let Point::Y(j) = sweep.kind[o] {
                                matched[i][j] += a * w;
                            }
                        }
                        (Some(o), Point::Y(j)) => {
                            if let Point::X(i) = sweep.kind[o] {
                                matched[i][j] += a * w;
                            }
                        }
                        _ => {}
                    }
                });
                if b > 0.0 {
                    prev.insert(s, b);
                }
            }
            let top = prev.values().copied().fold(0.0, f64::max);
            if !(top > 0.0) {
                return Err(MatchError::Numeric("partial sweep backward pass lost all states".into()));
            }
            prev.values_mut().for_each(|v| *v /= top);
            log_b += top.ln();
            beta = prev;
        }
    }
    PartialMarginalTable::from_masses(matched, unmatched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialV;
    use crate::partial::subset_dp::marginals_dp_partial;

    #[test]
    fn agrees_with_subset_dp() {
        let p = PartialPosteriorProblem::from_parts(
            vec![0.12, 0.5, 0.33, 0.8, 0.41, 0.43],
            vec![0.15, 0.46, 0.9, 0.3, 0.62, 0.44, 0.52],
            8.0,
            PotentialV::gaussian(1.0).unwrap(),
            vec![-0.1, 0.0, 0.2, 0.05, -0.3, 0.1],
            vec![0.0, -0.2, 0.1, 0.3, 0.0, 0.05, -0.05],
        )
        .unwrap();
        let a = marginals_sweep_partial_with(&p, &SweepOptions::precise()).unwrap();
        let b = marginals_dp_partial(&p).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12, "{}", a.max_abs_diff(&b));
    }

    #[test]
    fn reach_bisection() {
        let r = reach_for(|d| d * d, 4.0);
        assert!((r - 2.0).abs() < 1e-9);
        assert_eq!(reach_for(|_| 5.0, 4.0), 0.0);
    }
}
