//! Metropolis chains for both posteriors, checked against exact marginals.

use bayesmatch::diagnostics::{mcmc_marginals_exact, mcmc_marginals_partial, ChainOptions};
use bayesmatch::exact::{marginals_bruteforce_exact, ExactPosteriorProblem};
use bayesmatch::model::{DensityLambda, PotentialV};
use bayesmatch::partial::{marginals_dp_partial, PartialPosteriorProblem};
use bayesmatch::sampler::{sample_exact_instance, sample_partial_instance};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = PotentialV::gaussian(1.0)?;
    let p = ExactPosteriorProblem::from_instance(&sample_exact_instance(&g, &DensityLambda::Uniform, 6, 2)?)?;
    let exact = marginals_bruteforce_exact(&p)?;
    for steps in [10_000, 100_000, 1_000_000] {
        let est = mcmc_marginals_exact(&p, ChainOptions::steps(steps), 3)?;
        println!("exact chain, {steps:>9} steps: max row TV {:.4}", est.max_row_tv(&exact));
    }

    let q = PartialPosteriorProblem::from_instance(&sample_partial_instance(&g, &DensityLambda::Uniform, 3, 0.5, 2)?)?;
    let dp = marginals_dp_partial(&q)?;
    let est = mcmc_marginals_partial(&q, ChainOptions::steps(1_000_000), 3)?;
    println!("partial chain {}×{}: max |Δ| {:.4}", q.n_x(), q.n_y(), est.max_abs_diff(&dp));
    Ok(())
}
