//! Posterior marginals of the exact model from three engines.

use std::time::Instant;

use bayesmatch::exact::{ExactEngine, ExactPosteriorProblem};
use bayesmatch::model::{DensityLambda, PotentialV};
use bayesmatch::sampler::sample_exact_instance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inst = sample_exact_instance(&PotentialV::gaussian(1.0)?, &DensityLambda::Uniform, 9, 7)?;
    let problem = ExactPosteriorProblem::from_instance(&inst)?;
    let engines = [ExactEngine::Bruteforce, ExactEngine::Permanent, ExactEngine::Banded { band: 8 }];
    let mut tables = vec![];
    for e in engines {
        let t0 = Instant::now();
        tables.push(e.run(&problem)?);
        println!("{:10} {:?}", e.name(), t0.elapsed());
    }
    println!("max |bruteforce − permanent| = {:.1e}", tables[0].max_abs_diff(&tables[1]));
    println!("max |bruteforce − banded|    = {:.1e}", tables[0].max_abs_diff(&tables[2]));

    for i in 0..inst.n {
        let row = tables[1].row(i);
        let top = row.argmax().unwrap();
        println!("P_{i}: argmax Y_{top} ({:.3}), truth Y_{} ({:.3})", row.prob(top), inst.pi_star[i], row.prob(bayesmatch::dist::Label::Y(inst.pi_star[i] as i64)));
    }

    // Larger problems: the banded DP only.
    let big = sample_exact_instance(&PotentialV::gaussian(1.0)?, &DensityLambda::Uniform, 200, 7)?;
    let t0 = Instant::now();
    let t = ExactEngine::Banded { band: 20 }.run(&ExactPosteriorProblem::from_instance(&big)?)?;
    println!("n=200 banded: {:?}, row defect {:.1e}", t0.elapsed(), t.max_row_defect());
    Ok(())
}
