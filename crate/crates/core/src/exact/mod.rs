//! Posterior over bijections for the exact matching model.
//!
//! Three interchangeable engines compute the marginal table
//! `P_i(j) = P(π(i) = j | X, Y)`: factorial enumeration, Ryser permanent
//! minors, and a banded transfer sweep over sorted ranks.

pub mod banded;
pub mod block;
pub mod bruteforce;
pub mod permanent;
pub mod problem;

use serde::{Deserialize, Serialize};

use crate::error::{MatchError, Result};

pub use banded::{marginals_banded_exact, DEFAULT_BAND};
pub use block::{block_row_marginal, conditional_marginals_empty_boundary, BlockEngine};
pub use bruteforce::{marginals_bruteforce_exact, DEFAULT_ENUM_CAP};
pub use permanent::{marginals_permanent_exact, permanent, DEFAULT_PERMANENT_CAP};
pub use problem::{argsort, sort_maps, ExactPosteriorProblem, MarginalTable, SortMaps};

/// Engine choice for exact marginals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactEngine {
    Bruteforce,
    Permanent,
    Banded { band: usize },
}

impl ExactEngine {
    pub fn parse(name: &str, band: usize) -> Result<Self> {
        match name {
            "bruteforce" | "enum" => Ok(ExactEngine::Bruteforce),
            "permanent" | "ryser" => Ok(ExactEngine::Permanent),
            "banded" => Ok(ExactEngine::Banded { band }),
            other => Err(MatchError::InvalidParameter(format!("unknown exact engine '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExactEngine::Bruteforce => "bruteforce",
            ExactEngine::Permanent => "permanent",
            ExactEngine::Banded { .. } => "banded",
        }
    }

    pub fn run(&self, problem: &ExactPosteriorProblem) -> Result<MarginalTable> {
        match *self {
            ExactEngine::Bruteforce => marginals_bruteforce_exact(problem),
            ExactEngine::Permanent => marginals_permanent_exact(problem),
            ExactEngine::Banded { band } => marginals_banded_exact(problem, band),
        }
    }
}
