//! Experiment configuration: one JSON document, overridden by CLI flags.
//!
//! Precedence: built-in defaults < config file < command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::costs::CostSpec;
use crate::error::{MatchError, Result};
use crate::exact::{ExactEngine, ExactPosteriorProblem, DEFAULT_BAND, DEFAULT_ENUM_CAP, DEFAULT_PERMANENT_CAP};
use crate::local::default_flow_radius;
use crate::model::{DensityLambda, PotentialV};
use crate::partial::PartialEngine;
use crate::ppp_gibbs::UConvention;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Exact,
    Partial,
}

/// Local algorithm for exact instances (partial instances always use
/// Algorithm 1).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactLocal {
    #[default]
    Algorithm2,
    Algorithm3,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSampler {
    /// Enumeration up to `n = 9`, MCMC beyond.
    #[default]
    Auto,
    Enumeration,
    Mcmc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventsConfig {
    pub k: usize,
    pub l: Vec<usize>,
    pub sampler: EventSampler,
    /// Draws for the enumeration sampler.
    pub samples: usize,
    /// Post-burn-in steps for the MCMC sampler.
    pub steps: u64,
}

impl Default for EventsConfig {
    fn default() -> Self {
        EventsConfig {
            k: 2,
            l: vec![1, 2, 3],
            sampler: EventSampler::Auto,
            samples: 2000,
            steps: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ModelKind,
    pub potential: PotentialV,
    pub density: DensityLambda,
    pub n: Vec<usize>,
    /// Observation probability (partial kind).
    pub p: f64,
    pub m: Vec<usize>,
    pub algorithm: ExactLocal,
    /// Algorithm 3 radius `D`; `None` selects `3M/(2Λ_min) + M + 1`.
    pub d: Option<f64>,
    /// PPP window sizes for the limit experiment.
    pub k: Vec<usize>,
    pub reps: usize,
    /// Required; there is no ambient entropy.
    pub seed: Option<u64>,
    /// `auto`, or an exact (`bruteforce`, `permanent`, `banded`) or partial
    /// (`bruteforce`, `subset_dp`, `sweep`) engine name.
    pub engine: String,
    pub band: usize,
    /// Second band for the banded self-consistency check.
    pub check_band: Option<usize>,
    pub out: PathBuf,
    pub costs: Vec<String>,
    pub u_convention: UConvention,
    /// Explicit instance files; overrides sampling from `n` × `reps`.
    pub instances: Option<Vec<PathBuf>>,
    pub events: EventsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: ModelKind::Exact,
            potential: PotentialV::gaussian(1.0).expect("valid sigma"),
            density: DensityLambda::Uniform,
            n: vec![20],
            p: 0.5,
            m: vec![1, 2, 4],
            algorithm: ExactLocal::Algorithm2,
            d: None,
            k: vec![4, 8, 12],
            reps: 10,
            seed: None,
            engine: "auto".into(),
            band: DEFAULT_BAND,
            check_band: None,
            out: PathBuf::from("out"),
            costs: vec!["true_match_prob".into(), "expected_card:0.1".into(), "coverage:0.1".into()],
            u_convention: UConvention::LogSqrtLambda,
            instances: None,
            events: EventsConfig::default(),
        }
    }
}

/// Command-line overrides.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub engine: Option<String>,
    pub reps: Option<usize>,
}

/// Exact engine after resolving `auto` for a problem size.
pub fn exact_engine_for(name: &str, band: usize, n: usize) -> Result<ExactEngine> {
    match name {
        "auto" if n <= DEFAULT_ENUM_CAP - 2 => Ok(ExactEngine::Bruteforce),
        "auto" if n <= DEFAULT_PERMANENT_CAP => Ok(ExactEngine::Permanent),
        "auto" => Ok(ExactEngine::Banded { band }),
        other => ExactEngine::parse(other, band),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(e) = &o.engine {
            self.engine = e.clone();
        }
        if let Some(r) = o.reps {
            self.reps = r;
        }
    }

    /// Canonical bytes of the effective configuration; their hash is the
    /// provenance `config_hash`. The output directory is left out: it does
    /// not affect any result.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("out");
        }
        serde_json::to_vec(&v).expect("config serializes")
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| MatchError::InvalidParameter("a seed is required (config \"seed\" or --seed)".into()))
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(MatchError::InvalidParameter(format!("{what} must be nonempty")))
            }
        };
        self.seed()?;
        self.potential.validate()?;
        self.density.validate()?;
        nonempty(!self.n.is_empty(), "n")?;
        nonempty(!self.m.is_empty(), "m")?;
        nonempty(!self.k.is_empty(), "k")?;
        nonempty(!self.costs.is_empty(), "costs")?;
        nonempty(!self.events.l.is_empty(), "events.l")?;
        if self.n.contains(&0) || self.m.contains(&0) || self.k.contains(&0) {
            return Err(MatchError::InvalidParameter("n, m and k entries must be ≥ 1".into()));
        }
        if self.reps == 0 {
            return Err(MatchError::InvalidParameter("reps must be ≥ 1".into()));
        }
        if self.kind == ModelKind::Partial && !(self.p > 0.0 && self.p < 1.0) {
            return Err(MatchError::Domain {
                what: "p",
                value: self.p,
                domain: "(0, 1)",
            });
        }
        self.cost_specs()?;
        match self.kind {
            ModelKind::Exact => {
                exact_engine_for(&self.engine, self.band, 1)?;
            }
            ModelKind::Partial => {
                self.partial_engine()?;
            }
        }
        Ok(())
    }

    pub fn cost_specs(&self) -> Result<Vec<CostSpec>> {
        self.costs.iter().map(|c| CostSpec::parse(c)).collect()
    }

    pub fn partial_engine(&self) -> Result<PartialEngine> {
        PartialEngine::parse(&self.engine)
    }

    pub fn exact_engine(&self, problem: &ExactPosteriorProblem) -> Result<ExactEngine> {
        exact_engine_for(&self.engine, self.band, problem.n())
    }

    pub fn flow_radius(&self, m: usize) -> f64 {
        self.d.unwrap_or_else(|| default_flow_radius(m, &self.density))
    }
}
