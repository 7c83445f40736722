//! Sample exact and partial instances and round-trip them through JSON.

use bayesmatch::io::{instance_from_json, instance_to_json, Instance};
use bayesmatch::model::{DensityLambda, PotentialV};
use bayesmatch::sampler::{sample_exact_instance, sample_partial_instance};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = PotentialV::gaussian(1.0)?;
    let exact = sample_exact_instance(&g, &DensityLambda::Uniform, 6, 42)?;
    println!("exact n=6: π* = {:?}", exact.pi_star);
    for i in 0..exact.n {
        println!("  X_{i} = {:.4} ↔ Y_{} = {:.4}", exact.x[i], exact.pi_star[i], exact.y[exact.pi_star[i]]);
    }

    let partial = sample_partial_instance(&g, &DensityLambda::Uniform, 6, 0.5, 42)?;
    println!(
        "partial n=6, p=0.5: N = {}, N_X = {}, N_Y = {}, matched = {}",
        partial.latent_count,
        partial.n_x(),
        partial.n_y(),
        partial.pi_star.iter().flatten().count()
    );

    let inst = Instance::Partial(partial);
    let text = instance_to_json(&inst)?;
    assert_eq!(instance_from_json(&text)?.truth(), inst.truth());
    println!("JSON round trip ok ({} bytes)", text.len());
    Ok(())
}
