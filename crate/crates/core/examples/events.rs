//! Regularity events along the sorted sites of an exact instance.

use bayesmatch::diagnostics::{event_rates, PosteriorSampler};
use bayesmatch::model::{DensityLambda, PotentialV};
use bayesmatch::sampler::sample_exact_instance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inst = sample_exact_instance(&PotentialV::gaussian(1.0)?, &DensityLambda::Uniform, 8, 21)?;
    let sampler = PosteriorSampler::Enumeration { samples: 2000 };
    for l in 1..=3 {
        let r = event_rates(&inst, 2, l, &sampler, 5)?;
        println!(
            "L = {l}: A {:.2}  C {:.2}  L {:.2}  G {:.2}  mean P(G^c) {:.3}  ι {}",
            r.a_fraction,
            r.c_fraction,
            r.l_fraction,
            r.g_fraction,
            r.g_complement_mean,
            r.iota.map_or("n/a".into(), |v| format!("{v:.3}"))
        );
    }
    Ok(())
}
