//! Noise potential, intensity density and the pair model built from them.
//!
//! A latent pair `(x, y)` on `[0,1]^2` has density proportional to
//! `sqrt(Λ(x) Λ(y)) · exp(-V(n (x - y)))`. Everything here is deterministic
//! quadrature; the normalizer is memoized process-wide, keyed by a content
//! hash of the model.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::{OnceLock, RwLock};

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{MatchError, Result};
use crate::quadrature::integrate;

/// Log-density below which `exp(-V)` is treated as zero when truncating
/// supports.
const NEGLIGIBLE_LOG_Q: f64 = 72.0;

pub const DEFAULT_QUADRATURE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// `V(e) = e^2 / (2 sigma^2) + log(sigma sqrt(2 pi))`.
    Gaussian { sigma: f64 },
    /// `V(e) = c |e|^(1+delta) + const`, the constant fixing `∫ exp(-V) = 1`.
    Power { c: f64, delta: f64 },
    /// Values of `V` on a symmetric grid, linearly interpolated. `V` is
    /// infinite (zero density) outside the grid.
    Tabulated { eps: Vec<f64>, values: Vec<f64> },
    /// Point mass at zero: `V(0) = 0`, `V(e) = +inf` elsewhere. Only the
    /// samplers and the enumeration engines accept it.
    Degenerate,
}

/// Lower envelope `f(t) = lower_c · t^(1 + lower_delta)` and upper envelope
/// `g(t) = upper_c · (1 + t^upper_c)` for `V - V_min`. Stored for
/// diagnostics; the library never relies on them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub lower_c: f64,
    pub lower_delta: f64,
    pub upper_c: f64,
}

impl Envelope {
    pub fn lower(&self, t: f64) -> f64 {
        self.lower_c * t.powf(1.0 + self.lower_delta)
    }

    pub fn upper(&self, t: f64) -> f64 {
        self.upper_c * (1.0 + t.powf(self.upper_c))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialV {
    #[serde(flatten)]
    pub kind: PotentialKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<Envelope>,
}

impl PotentialV {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(PotentialKind::Gaussian { sigma })
    }

    pub fn power(c: f64, delta: f64) -> Result<Self> {
        Self::new(PotentialKind::Power { c, delta })
    }

    pub fn tabulated(eps: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(PotentialKind::Tabulated { eps, values })
    }

    pub fn degenerate() -> Self {
        PotentialV {
            kind: PotentialKind::Degenerate,
            envelope: None,
        }
    }

    pub fn new(kind: PotentialKind) -> Result<Self> {
        let v = PotentialV {
            kind,
            envelope: None,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn with_envelope(mut self, envelope: Envelope) -> Self {
        self.envelope = Some(envelope);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            PotentialKind::Gaussian { sigma } => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(MatchError::InvalidParameter(format!(
                        "gaussian sigma must be positive, got {sigma}"
                    )));
                }
            }
            PotentialKind::Power { c, delta } => {
                if !(*c > 0.0 && *delta > 0.0 && c.is_finite() && delta.is_finite()) {
                    return Err(MatchError::InvalidParameter(format!(
                        "power potential needs c > 0 and delta > 0, got c={c}, delta={delta}"
                    )));
                }
            }
            PotentialKind::Tabulated { eps, values } => {
                if eps.len() != values.len() || eps.len() < 3 {
                    return Err(MatchError::InvalidParameter(
                        "tabulated potential needs matching grids of length >= 3".into(),
                    ));
                }
                if eps.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(MatchError::InvalidParameter(
                        "tabulated grid must be strictly increasing".into(),
                    ));
                }
                let m = eps.len();
                for k in 0..m {
                    let (a, b) = (eps[k], eps[m - 1 - k]);
                    if (a + b).abs() > 1e-12 * (1.0 + a.abs())
                        || (values[k] - values[m - 1 - k]).abs() > 1e-12 * (1.0 + values[k].abs())
                    {
                        return Err(MatchError::InvalidParameter(
                            "tabulated potential must be symmetric about zero".into(),
                        ));
                    }
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(MatchError::InvalidParameter(
                        "tabulated potential values must be finite".into(),
                    ));
                }
            }
            PotentialKind::Degenerate => {}
        }
        Ok(())
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self.kind, PotentialKind::Degenerate)
    }

    fn power_const(c: f64, delta: f64) -> f64 {
        let a = 1.0 + delta;
        // ∫_R exp(-c|e|^a) de = 2 Γ(1/a) / (a c^(1/a))
        (2.0f64).ln() + ln_gamma(1.0 / a) - a.ln() - c.ln() / a
    }

    /// `V(eps)`, with the out-of-support error for tabulated potentials.
    pub fn eval(&self, eps: f64) -> Result<f64> {
        if let PotentialKind::Tabulated { eps: grid, .. } = &self.kind {
            let (lo, hi) = (grid[0], grid[grid.len() - 1]);
            if eps < lo || eps > hi {
                return Err(MatchError::OutOfSupport { eps, lo, hi });
            }
        }
        Ok(self.value(eps))
    }

    /// `V(eps)`, returning `+inf` where the noise density vanishes.
    pub fn value(&self, eps: f64) -> f64 {
        match &self.kind {
            PotentialKind::Gaussian { sigma } => {
                let z = eps / sigma;
                0.5 * z * z + (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln()
            }
            PotentialKind::Power { c, delta } => {
                c * eps.abs().powf(1.0 + delta) + Self::power_const(*c, *delta)
            }
            PotentialKind::Tabulated { eps: grid, values } => {
                let m = grid.len();
                if eps < grid[0] || eps > grid[m - 1] {
                    return f64::INFINITY;
                }
                let k = match grid.binary_search_by(|g| g.partial_cmp(&eps).unwrap()) {
                    Ok(k) => return values[k],
                    Err(k) => k,
                };
                let (e0, e1) = (grid[k - 1], grid[k]);
                let t = (eps - e0) / (e1 - e0);
                values[k - 1] * (1.0 - t) + values[k] * t
            }
            PotentialKind::Degenerate => {
                if eps == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Noise density `q(eps) = exp(-V(eps))`.
    pub fn density(&self, eps: f64) -> f64 {
        (-self.value(eps)).exp()
    }

    /// Infimum of `V`.
    pub fn v_min(&self) -> f64 {
        match &self.kind {
            PotentialKind::Gaussian { .. } | PotentialKind::Power { .. } => self.value(0.0),
            PotentialKind::Tabulated { values, .. } => {
                values.iter().copied().fold(f64::INFINITY, f64::min)
            }
            PotentialKind::Degenerate => 0.0,
        }
    }

    /// Radius beyond which `exp(-V)` is below `exp(-72)` relative to its peak
    /// (`12 sigma` for the Gaussian).
    pub fn support_radius(&self) -> f64 {
        match &self.kind {
            PotentialKind::Gaussian { sigma } => 12.0 * sigma,
            PotentialKind::Power { c, delta } => (NEGLIGIBLE_LOG_Q / c).powf(1.0 / (1.0 + delta)),
            PotentialKind::Tabulated { eps, .. } => eps[eps.len() - 1],
            PotentialKind::Degenerate => 0.0,
        }
    }

    /// Smallest `r` with `P(|eps| > r) <= prob` under `q`.
    pub fn tail_radius(&self, prob: f64) -> f64 {
        match &self.kind {
            PotentialKind::Gaussian { sigma } => {
                let normal = Normal::new(0.0, 1.0).unwrap();
                sigma * normal.inverse_cdf(1.0 - prob / 2.0)
            }
            PotentialKind::Power { c, delta } => {
                let a = 1.0 + delta;
                // P(|eps| > r) = Q(1/a, c r^a)
                let tail = |r: f64| gamma_ur(1.0 / a, c * r.powf(a));
                let mut hi = 1.0;
                while tail(hi) > prob {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if tail(mid) > prob {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
            PotentialKind::Tabulated { eps, .. } => {
                let cells = self.tabulated_cells();
                let total: f64 = cells.iter().map(|c| c.2).sum();
                // walk inward from the right edge, doubling for symmetry
                let mut outside = 0.0;
                for k in (0..cells.len()).rev() {
                    let (lo, _, mass) = cells[k];
                    if lo < 0.0 {
                        break;
                    }
                    if 2.0 * (outside + mass) / total > prob {
                        return cells[k].1;
                    }
                    outside += mass;
                }
                eps[eps.len() - 1]
            }
            PotentialKind::Degenerate => 0.0,
        }
    }

    /// `inf_{|e| >= d} V(e) - V_min`: a lower bound on the excess energy of
    /// any pair at distance at least `d`. Nondecreasing in `d`.
    pub fn tail_min(&self, d: f64) -> f64 {
        let d = d.abs();
        match &self.kind {
            PotentialKind::Gaussian { .. } | PotentialKind::Power { .. } => {
                self.value(d) - self.v_min()
            }
            PotentialKind::Tabulated { eps, values } => {
                let here = self.value(d).min(self.value(-d));
                let beyond = eps
                    .iter()
                    .zip(values)
                    .filter(|(e, _)| e.abs() >= d)
                    .map(|(_, &v)| v)
                    .fold(here, f64::min);
                beyond - self.v_min()
            }
            PotentialKind::Degenerate => {
                if d == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Interior points where `V` is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match &self.kind {
            PotentialKind::Gaussian { .. } | PotentialKind::Degenerate => Vec::new(),
            PotentialKind::Power { .. } => vec![0.0],
            PotentialKind::Tabulated { eps, .. } => eps.clone(),
        }
    }

    /// `(lo, hi, mass)` per grid cell of a tabulated potential.
    fn tabulated_cells(&self) -> Vec<(f64, f64, f64)> {
        let PotentialKind::Tabulated { eps, values } = &self.kind else {
            return Vec::new();
        };
        eps.windows(2)
            .zip(values.windows(2))
            .map(|(e, v)| {
                let h = e[1] - e[0];
                let s = (v[1] - v[0]) / h;
                let mass = if (s * h).abs() < 1e-12 {
                    h * (-v[0]).exp()
                } else {
                    (-v[0]).exp() * (-(-s * h).exp_m1()) / s
                };
                (e[0], e[1], mass)
            })
            .collect()
    }

    /// Draws `eps ~ q`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            PotentialKind::Gaussian { sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            }
            PotentialKind::Power { c, delta } => {
                let a = 1.0 + delta;
                // c |eps|^a ~ Gamma(1/a, 1)
                let g = Gamma::new(1.0 / a, 1.0).unwrap().sample(rng);
                let r = (g / c).powf(1.0 / a);
                if rng.random::<bool>() {
                    r
                } else {
                    -r
                }
            }
            PotentialKind::Tabulated { values, .. } => {
                let cells = self.tabulated_cells();
                let total: f64 = cells.iter().map(|c| c.2).sum();
                let mut u = rng.random::<f64>() * total;
                let mut k = 0;
                while k + 1 < cells.len() && u > cells[k].2 {
                    u -= cells[k].2;
                    k += 1;
                }
                let (lo, hi, mass) = cells[k];
                let h = hi - lo;
                let s = (values[k + 1] - values[k]) / h;
                let frac = (u / mass).clamp(0.0, 1.0);
                if (s * h).abs() < 1e-12 {
                    lo + frac * h
                } else {
                    // invert ∫_0^t exp(-s τ) dτ / ∫_0^h exp(-s τ) dτ = frac
                    let t = -(-frac * (-(-s * h).exp_m1())).ln_1p() / s;
                    lo + t.clamp(0.0, h)
                }
            }
            PotentialKind::Degenerate => 0.0,
        }
    }

    /// Quadrature of `exp(-V)` over the support window.
    pub fn normalization(&self, tol: f64) -> Result<f64> {
        if self.is_degenerate() {
            return Ok(1.0);
        }
        let r = self.support_radius();
        integrate(|e| self.density(e), -r, r, &self.kinks(), tol)
    }

    /// Largest `|V(e) - V(-e)|` over `grid`.
    pub fn symmetry_defect(&self, grid: &[f64]) -> f64 {
        grid.iter()
            .map(|&e| {
                let (a, b) = (self.value(e), self.value(-e));
                if a == b {
                    0.0
                } else {
                    (a - b).abs()
                }
            })
            .fold(0.0, f64::max)
    }

    /// Whether `V(e) - V_min >= f(|e|)` holds on `grid` for the stored
    /// envelope. `None` when no envelope is attached.
    pub fn satisfies_lower_envelope(&self, grid: &[f64]) -> Option<bool> {
        let env = self.envelope?;
        let vmin = self.v_min();
        Some(
            grid.iter()
                .all(|&e| self.value(e) - vmin >= env.lower(e.abs()) - 1e-12),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityLambda {
    Uniform,
    /// Linear interpolation of `values` at `knots`, with `knots[0] = 0` and
    /// `knots[last] = 1`.
    PiecewiseLinear { knots: Vec<f64>, values: Vec<f64> },
}

impl DensityLambda {
    pub fn piecewise_linear(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let d = DensityLambda::PiecewiseLinear { knots, values };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let DensityLambda::PiecewiseLinear { knots, values } = self else {
            return Ok(());
        };
        if knots.len() != values.len() || knots.len() < 2 {
            return Err(MatchError::InvalidParameter(
                "piecewise-linear density needs matching grids of length >= 2".into(),
            ));
        }
        if knots[0] != 0.0 || knots[knots.len() - 1] != 1.0 {
            return Err(MatchError::InvalidParameter(
                "density knots must start at 0 and end at 1".into(),
            ));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(MatchError::InvalidParameter(
                "density knots must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(MatchError::InvalidParameter(
                "density values must be positive (Λ_min > 0)".into(),
            ));
        }
        let mass = self.total_mass();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(MatchError::InvalidParameter(format!(
                "density integrates to {mass}, expected 1"
            )));
        }
        Ok(())
    }

    /// Exact integral of the interpolant over `[0,1]`.
    pub fn total_mass(&self) -> f64 {
        match self {
            DensityLambda::Uniform => 1.0,
            DensityLambda::PiecewiseLinear { knots, values } => knots
                .windows(2)
                .zip(values.windows(2))
                .map(|(k, v)| 0.5 * (k[1] - k[0]) * (v[0] + v[1]))
                .sum(),
        }
    }

    /// `Λ(x)` for `x ∈ [0,1]`, zero outside.
    pub fn eval(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match self {
            DensityLambda::Uniform => 1.0,
            DensityLambda::PiecewiseLinear { knots, values } => {
                let k = match knots.binary_search_by(|g| g.partial_cmp(&x).unwrap()) {
                    Ok(k) => return values[k],
                    Err(k) => k,
                };
                let t = (x - knots[k - 1]) / (knots[k] - knots[k - 1]);
                values[k - 1] * (1.0 - t) + values[k] * t
            }
        }
    }

    pub fn lambda_min(&self) -> f64 {
        match self {
            DensityLambda::Uniform => 1.0,
            DensityLambda::PiecewiseLinear { values, .. } => {
                values.iter().copied().fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn lambda_max(&self) -> f64 {
        match self {
            DensityLambda::Uniform => 1.0,
            DensityLambda::PiecewiseLinear { values, .. } => {
                values.iter().copied().fold(0.0, f64::max)
            }
        }
    }

    pub fn knots(&self) -> &[f64] {
        match self {
            DensityLambda::Uniform => &[],
            DensityLambda::PiecewiseLinear { knots, .. } => knots,
        }
    }

    /// Draws `x ~ Λ` by thinning uniform proposals.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let max = self.lambda_max();
        loop {
            let x: f64 = rng.random();
            if rng.random::<f64>() * max <= self.eval(x) {
                return x;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    /// Observation probability; only used by the partial model.
    pub p: Option<f64>,
    pub quadrature_tol: f64,
}

impl ModelParams {
    pub fn new(n: usize, p: Option<f64>) -> Result<Self> {
        let params = ModelParams {
            n,
            p,
            quadrature_tol: DEFAULT_QUADRATURE_TOL,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(MatchError::InvalidParameter("n must be >= 1".into()));
        }
        if let Some(p) = self.p {
            if !(p > 0.0 && p < 1.0) {
                return Err(MatchError::Domain {
                    what: "p",
                    value: p,
                    domain: "(0, 1)",
                });
            }
        }
        if !(self.quadrature_tol > 0.0) {
            return Err(MatchError::InvalidParameter(
                "quadrature_tol must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn zn_cache() -> &'static RwLock<HashMap<u64, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<u64, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// The pair density `p_n(x, y)` for fixed `(V, Λ, n)` with memoized
/// normalizer and marginal.
#[derive(Debug)]
pub struct PairModel {
    pub potential: PotentialV,
    pub density: DensityLambda,
    pub n: usize,
    pub tol: f64,
    key: u64,
    marginal_memo: RwLock<HashMap<u64, f64>>,
}

impl Clone for PairModel {
    fn clone(&self) -> Self {
        PairModel {
            potential: self.potential.clone(),
            density: self.density.clone(),
            n: self.n,
            tol: self.tol,
            key: self.key,
            marginal_memo: RwLock::new(self.marginal_memo.read().unwrap().clone()),
        }
    }
}

impl PairModel {
    pub fn new(potential: PotentialV, density: DensityLambda, n: usize) -> Result<Self> {
        Self::with_tol(potential, density, n, DEFAULT_QUADRATURE_TOL)
    }

    pub fn with_tol(potential: PotentialV, density: DensityLambda, n: usize, tol: f64) -> Result<Self> {
        potential.validate()?;
        density.validate()?;
        ModelParams {
            n,
            p: None,
            quadrature_tol: tol,
        }
        .validate()?;
        let mut h = std::collections::hash_map::DefaultHasher::new();
        serde_json::to_string(&potential)?.hash(&mut h);
        serde_json::to_string(&density)?.hash(&mut h);
        n.hash(&mut h);
        tol.to_bits().hash(&mut h);
        Ok(PairModel {
            potential,
            density,
            n,
            tol,
            key: h.finish(),
            marginal_memo: RwLock::new(HashMap::new()),
        })
    }

    /// Content hash used as the memo key.
    pub fn content_key(&self) -> u64 {
        self.key
    }

    /// `∫ sqrt(Λ(x + e/n)) q(e) de` over `e` with `x + e/n ∈ [0,1]`.
    fn inner(&self, x: f64) -> Result<f64> {
        if self.potential.is_degenerate() {
            return Ok(self.density.eval(x).sqrt());
        }
        let n = self.n as f64;
        let r = self.potential.support_radius();
        let lo = (-n * x).max(-r);
        let hi = (n * (1.0 - x)).min(r);
        if !(hi > lo) {
            return Ok(0.0);
        }
        let mut breaks = self.potential.kinks();
        breaks.extend(self.density.knots().iter().map(|k| n * (k - x)));
        integrate(
            // clamp: x + lo/n can round just outside [0, 1]
            |e| self.density.eval((x + e / n).clamp(0.0, 1.0)).sqrt() * self.potential.density(e),
            lo,
            hi,
            &breaks,
            self.tol,
        )
    }

    /// `n · Z_n`.
    pub fn scaled_normalizer(&self) -> Result<f64> {
        if let Some(v) = zn_cache().read().unwrap().get(&self.key) {
            return Ok(*v);
        }
        let value = if self.potential.is_degenerate() {
            self.density.total_mass()
        } else {
            let n = self.n as f64;
            let r = self.potential.support_radius() / n;
            let mut breaks = vec![r, 1.0 - r];
            for &k in self.density.knots() {
                breaks.extend([k, k - r, k + r]);
            }
            let mut err = None;
            let v = integrate(
                |x| match self.inner(x) {
                    Ok(v) => self.density.eval(x).sqrt() * v,
                    Err(e) => {
                        err.get_or_insert(e);
                        f64::NAN
                    }
                },
                0.0,
                1.0,
                &breaks,
                self.tol,
            );
            if let Some(e) = err {
                return Err(e);
            }
            v?
        };
        if !(value > 0.0) {
            return Err(MatchError::Numeric(format!("non-positive normalizer {value}")));
        }
        zn_cache().write().unwrap().insert(self.key, value);
        Ok(value)
    }

    /// `Z_n = ∫∫ sqrt(Λ(x)Λ(y)) exp(-V(n(x-y))) dx dy`.
    pub fn z_n(&self) -> Result<f64> {
        Ok(self.scaled_normalizer()? / self.n as f64)
    }

    /// Marginal density of the first coordinate of a pair.
    pub fn p_n(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(MatchError::Domain {
                what: "x",
                value: x,
                domain: "[0, 1]",
            });
        }
        if let Some(v) = self.marginal_memo.read().unwrap().get(&x.to_bits()) {
            return Ok(*v);
        }
        let v = self.density.eval(x).sqrt() * self.inner(x)? / self.scaled_normalizer()?;
        self.marginal_memo.write().unwrap().insert(x.to_bits(), v);
        Ok(v)
    }

    /// `U_n(x) = log(p_n(x) / sqrt(Λ(x)))`.
    pub fn u_n(&self, x: f64) -> Result<f64> {
        let p = self.p_n(x)?;
        let u = (p / self.density.eval(x).sqrt()).ln();
        if !u.is_finite() {
            return Err(MatchError::Numeric(format!("U_n({x}) = {u}")));
        }
        Ok(u)
    }
}
