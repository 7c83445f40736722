//! Infinite-volume limit: Poisson configurations around the origin, the
//! truncated origin marginals Q_K^0 and their convergence in K.

use bayesmatch::dist::tv_distance;
use bayesmatch::model::{DensityLambda, PotentialV};
use bayesmatch::ppp::sample_ppp_exact;
use bayesmatch::ppp_gibbs::{check_qk_cauchy, flow_of_bijection, interior_cuts, qk_ladder_config, CauchySpec, IndexedBijection, UConvention};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = PotentialV::gaussian(1.0)?;
    let cfg = sample_ppp_exact(&DensityLambda::Uniform, &g, 10.0, 1)?;
    let truth = IndexedBijection::truth(&cfg);
    let flows: Vec<i64> = interior_cuts(&cfg).into_iter().map(|a| flow_of_bijection(&cfg, &truth, a).map(|f| f.f)).collect::<Result<_, _>>()?;
    println!("exact PPP, K = 10: {} X points, flow at interior cuts {:?}", cfg.x_points.len(), flows.first());

    let spec = CauchySpec {
        density: DensityLambda::Uniform,
        potential: PotentialV::gaussian(1.4)?,
        p: None,
        k_list: vec![4, 8, 12],
        reps: 20,
        seed: 5,
        u_convention: UConvention::LogSqrtLambda,
    };
    let (_, ladder) = qk_ladder_config(&spec, 9)?;
    for w in ladder.windows(2) {
        println!("TV(Q_{}, Q_{}) = {:.2e} (F* = {})", w[0].k, w[1].k, tv_distance(&w[0].probs, &w[1].probs), w[0].f_star);
    }

    for (name, p, u) in [("exact", None, UConvention::LogSqrtLambda), ("partial", Some(0.4), UConvention::LogSqrtLambda)] {
        let spec = CauchySpec { p, u_convention: u, potential: g.clone(), ..spec.clone() };
        for row in check_qk_cauchy(&spec)?.rows {
            println!("{name}: K {:2} → {:2}: mean TV {:.2e} ± {:.1e}", row.k, row.k_next, row.mean_tv, row.se);
        }
    }
    Ok(())
}
