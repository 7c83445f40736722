//! Pair model at scale n: normalizer Z_n, the X-marginal density p_n and the
//! unmatched reward U_n, for a Gaussian noise potential.

use bayesmatch::model::{DensityLambda, PairModel, PotentialV};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let density = DensityLambda::piecewise_linear(vec![0.0, 1.0], vec![0.5, 1.5])?;
    for n in [10, 100, 1000] {
        let model = PairModel::new(PotentialV::gaussian(1.0)?, density.clone(), n)?;
        println!("n = {n:5}: n·Z_n = {:.6}", n as f64 * model.z_n()?);
        for x in [0.1, 0.5, 0.9] {
            println!("    x = {x}: p_n = {:.5}  U_n = {:.5}", model.p_n(x)?, model.u_n(x)?);
        }
    }
    Ok(())
}
