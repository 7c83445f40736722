//! Cost functionals of a posterior row: true-match probability and the
//! randomized α-credible set.

use bayesmatch::costs::{credible_set, empirical_cost_average, CostSpec};
use bayesmatch::dist::{Label, MatchDistribution};
use bayesmatch::exact::{marginals_permanent_exact, ExactPosteriorProblem};
use bayesmatch::model::{DensityLambda, PotentialV};
use bayesmatch::sampler::sample_exact_instance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = MatchDistribution::new(vec![(Label::Y(0), 0.6), (Label::Y(1), 0.25), (Label::Y(2), 0.1), (Label::Unmatched, 0.05)])?;
    let c = credible_set(&p, 0.1, 1)?;
    println!("α = 0.1: members {:?}, boundary {} kept w.p. {:.3}, E|C| = {:.3}", c.members, c.boundary, c.xi, c.expected_cardinality());

    let inst = sample_exact_instance(&PotentialV::gaussian(1.0)?, &DensityLambda::Uniform, 12, 4)?;
    let rows = marginals_permanent_exact(&ExactPosteriorProblem::from_instance(&inst)?)?.rows();
    let truth: Vec<Label> = inst.pi_star.iter().map(|&j| Label::Y(j as i64)).collect();
    for spec in ["true_match_prob", "expected_card:0.1", "coverage:0.1"] {
        let s = CostSpec::parse(spec)?;
        println!("{s:18} {:.4}", empirical_cost_average(&rows, &truth, s)?);
    }
    Ok(())
}
