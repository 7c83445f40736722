//! Partial-model marginals: enumeration, subset DP and the position sweep.

use bayesmatch::dist::Label;
use bayesmatch::model::{DensityLambda, PotentialV};
use bayesmatch::partial::{PartialEngine, PartialPosteriorProblem};
use bayesmatch::sampler::sample_partial_instance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = PotentialV::gaussian(1.0)?;
    let small = sample_partial_instance(&g, &DensityLambda::Uniform, 2, 0.5, 3)?;
    let p = PartialPosteriorProblem::from_instance(&small)?;
    println!("N_X = {}, N_Y = {}", p.n_x(), p.n_y());
    let tables: Vec<_> = [PartialEngine::Bruteforce, PartialEngine::SubsetDp, PartialEngine::Sweep]
        .iter()
        .map(|e| e.run(&p))
        .collect::<Result<_, _>>()?;
    println!("enum vs dp: {:.1e}, enum vs sweep: {:.1e}", tables[0].max_abs_diff(&tables[1]), tables[0].max_abs_diff(&tables[2]));
    for i in 0..p.n_x() {
        let row = tables[1].row(i);
        let truth = small.pi_star[i].map_or(Label::Unmatched, |j| Label::Y(j as i64));
        println!("X_{i}: P(∅) = {:.3}, P(truth {truth}) = {:.3}", row.prob(Label::Unmatched), row.prob(truth));
    }

    // Auto switches to the sweep once N_Y exceeds the subset-DP range.
    let big = sample_partial_instance(&g, &DensityLambda::Uniform, 30, 0.5, 3)?;
    let q = PartialPosteriorProblem::from_instance(&big)?;
    let t = PartialEngine::Auto.run(&q)?;
    println!(
        "n=30: N_X = {}, N_Y = {}, engine {}, row defect {:.1e}",
        q.n_x(),
        q.n_y(),
        PartialEngine::Auto.resolve(&q).name(),
        t.max_row_defect()
    );
    Ok(())
}
