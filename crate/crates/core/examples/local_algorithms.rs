//! Local approximations against the full posterior: Algorithm 2 (sorted
//! blocks), Algorithm 3 (flow reordering) and Algorithm 1 (partial windows).

use bayesmatch::dist::tv_distance;
use bayesmatch::exact::{marginals_banded_exact, ExactPosteriorProblem};
use bayesmatch::local::{default_flow_radius, local_marginals_exact, local_marginals_partial, tilde_marginals_exact, LocalFlag};
use bayesmatch::model::{DensityLambda, PotentialV};
use bayesmatch::partial::{marginals_dp_partial, PartialEngine, PartialPosteriorProblem};
use bayesmatch::sampler::{sample_exact_instance, sample_partial_instance};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = PotentialV::gaussian(1.0)?;
    let n = 60;
    let inst = sample_exact_instance(&g, &DensityLambda::Uniform, n, 11)?;
    let problem = ExactPosteriorProblem::from_instance(&inst)?;
    let full = marginals_banded_exact(&problem, 20)?;
    for m in [1, 2, 4, 8] {
        let rows = local_marginals_exact(&problem, m)?;
        let tv: f64 = rows.iter().enumerate().map(|(i, r)| tv_distance(r.dist.as_ref().unwrap(), &full.row(i))).sum();
        println!("Algorithm 2, M = {m}: mean TV {:.2e}", tv / n as f64);
    }

    let m = 3;
    let d = default_flow_radius(m, &inst.density);
    let hat = local_marginals_exact(&problem, m)?;
    let tilde = tilde_marginals_exact(&inst, m, d)?;
    let fallback = tilde.iter().filter(|t| t.row.flag == LocalFlag::Fallback).count();
    let same = tilde.iter().zip(&hat).filter(|(t, h)| t.row.dist == h.dist).count();
    println!("Algorithm 3, M = {m}, D = {d}: {same}/{n} rows equal Algorithm 2, {fallback} fallbacks");

    let pn = 10;
    let pinst = sample_partial_instance(&g, &DensityLambda::Uniform, pn, 0.5, 5)?;
    let pp = PartialPosteriorProblem::from_instance(&pinst)?;
    let pfull = marginals_dp_partial(&pp)?;
    for m in [1, 2, 4] {
        let rows = local_marginals_partial(&pp, pn, m, PartialEngine::Auto)?;
        let tv: f64 = rows.iter().enumerate().map(|(i, r)| tv_distance(r.dist.as_ref().unwrap(), &pfull.row(i))).sum();
        println!("Algorithm 1, M = {m}: mean TV {:.2e} over {} X points", tv / rows.len() as f64, rows.len());
    }
    Ok(())
}
