//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Built with `harness = false`.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use bayesmatch::costs::{cost_true_match, expected_coverage};
use bayesmatch::diagnostics::{mcmc_marginals_exact, mcmc_marginals_partial, ChainOptions};
use bayesmatch::dist::{tv_distance, Label, MatchDistribution};
use bayesmatch::exact::{
    marginals_banded_exact, marginals_bruteforce_exact, marginals_permanent_exact, ExactPosteriorProblem,
};
use bayesmatch::io::csv_body;
use bayesmatch::local::{default_flow_radius, flow_stats, local_marginals_exact, local_marginals_partial, tilde_marginals_exact, LocalFlag};
use bayesmatch::model::{DensityLambda, PairModel, PotentialV};
use bayesmatch::partial::{
    count_partial_bijections, marginals_bruteforce_partial, marginals_dp_partial, PartialEngine, PartialPosteriorProblem,
};
use bayesmatch::ppp::sample_ppp_exact;
use bayesmatch::ppp_gibbs::{check_qk_cauchy, flow_of_bijection, interior_cuts, mean_se, CauchySpec, IndexedBijection, UConvention};
use bayesmatch::sampler::{sample_exact_instance, sample_partial_instance, ExactInstance, PartialInstance};

type Outcome = Result<(bool, String), String>;

fn gauss(sigma: f64) -> PotentialV {
    PotentialV::gaussian(sigma).unwrap()
}

fn exact(n: usize, seed: u64) -> ExactInstance {
    sample_exact_instance(&gauss(1.0), &DensityLambda::Uniform, n, seed).unwrap()
}

fn partial(n: usize, seed: u64) -> PartialInstance {
    sample_partial_instance(&gauss(1.0), &DensityLambda::Uniform, n, 0.5, seed).unwrap()
}

/// Partial instances at scale `n` whose sizes pass `keep`, in seed order.
fn partial_filtered(n: usize, count: usize, base: u64, keep: impl Fn(&PartialInstance) -> bool) -> Vec<PartialInstance> {
    (base..)
        .map(|s| partial(n, s))
        .filter(|i| i.n_x() > 0 && keep(i))
        .take(count)
        .collect()
}

fn truth_labels(inst: &PartialInstance) -> Vec<Label> {
    inst.pi_star.iter().map(|t| t.map_or(Label::Unmatched, |j| Label::Y(j as i64))).collect()
}

fn mean_row_tv(a: &[MatchDistribution], b: &[MatchDistribution]) -> f64 {
    a.iter().zip(b).map(|(p, q)| tv_distance(p, q)).sum::<f64>() / a.len() as f64
}

/// `a` exceeds `b` by more than two combined standard errors.
fn drops(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 - b.0 > 2.0 * (a.1 * a.1 + b.1 * b.1).sqrt()
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn c1_engines_exact() -> Outcome {
    let mut worst = 0.0f64;
    for s in 0..25 {
        let p = ExactPosteriorProblem::from_instance(&exact(7, 100 + s)).map_err(err)?;
        let bf = marginals_bruteforce_exact(&p).map_err(err)?;
        let pm = marginals_permanent_exact(&p).map_err(err)?;
        let bd = marginals_banded_exact(&p, 6).map_err(err)?;
        worst = worst.max(bf.max_abs_diff(&pm)).max(bf.max_abs_diff(&bd));
    }
    Ok((worst <= 1e-10, format!("max |Δ| = {worst:.2e} over 25 instances, n=7")))
}

fn c2_engines_partial() -> Outcome {
    let insts = partial_filtered(2, 25, 200, |i| i.n_x() <= 5 && i.n_y() <= 5);
    let mut worst = 0.0f64;
    for inst in &insts {
        let p = PartialPosteriorProblem::from_instance(inst).map_err(err)?;
        let a = marginals_bruteforce_partial(&p).map_err(err)?;
        let b = marginals_dp_partial(&p).map_err(err)?;
        worst = worst.max(a.max_abs_diff(&b));
    }
    Ok((worst <= 1e-10, format!("max |Δ| = {worst:.2e} over {} instances", insts.len())))
}

/// Partial bijections between `a` and `b` points, by direct recursion on
/// the first X point.
fn enumerate_partial(a: usize, free: &mut Vec<bool>) -> u128 {
    if a == 0 {
        return 1;
    }
    let mut total = enumerate_partial(a - 1, free);
    for j in 0..free.len() {
        if free[j] {
            free[j] = false;
            total += enumerate_partial(a - 1, free);
            free[j] = true;
        }
    }
    total
}

fn c3_counting() -> Outcome {
    for a in 0..=6usize {
        for b in 0..=6usize {
            let want = enumerate_partial(a, &mut vec![true; b]);
            let got = count_partial_bijections(a as u64, b as u64).map_err(err)?;
            if got != want {
                return Ok((false, format!("({a},{b}): {got} vs enumerated {want}")));
            }
        }
    }
    let c22 = count_partial_bijections(2, 2).map_err(err)?;
    Ok((c22 == 7, format!("all a,b ≤ 6 agree; (2,2) → {c22}")))
}

fn c4_full_window() -> Outcome {
    let mut worst = 0.0f64;
    for s in 0..10 {
        let p = ExactPosteriorProblem::from_instance(&exact(7, 300 + s)).map_err(err)?;
        let full = marginals_bruteforce_exact(&p).map_err(err)?;
        for (i, r) in local_marginals_exact(&p, 7).map_err(err)?.iter().enumerate() {
            worst = worst.max(tv_distance(r.dist.as_ref().ok_or("skipped row")?, &full.row(i)));
        }
    }
    Ok((worst <= 1e-12, format!("max TV = {worst:.2e}, n=7, M=7, 10 seeds")))
}

fn c5_theorem_2_5() -> Outcome {
    let (mut tv1, mut tv8, mut selfc) = (vec![], vec![], 0.0f64);
    for s in 0..20 {
        let p = ExactPosteriorProblem::from_instance(&exact(100, 400 + s)).map_err(err)?;
        let b20 = marginals_banded_exact(&p, 20).map_err(err)?;
        let b25 = marginals_banded_exact(&p, 25).map_err(err)?;
        selfc = selfc.max(b20.max_row_tv(&b25));
        let full = b20.rows();
        for (m, acc) in [(1, &mut tv1), (8, &mut tv8)] {
            let rows: Vec<MatchDistribution> = local_marginals_exact(&p, m)
                .map_err(err)?
                .into_iter()
                .map(|r| r.dist.ok_or("skipped row"))
                .collect::<Result<_, _>>()?;
            acc.push(mean_row_tv(&rows, &full));
        }
    }
    let (a, b) = (mean_se(&tv1), mean_se(&tv8));
    let ok = selfc <= 1e-6 && drops(a, b) && b.0 < 0.05;
    Ok((
        ok,
        format!(
            "M=1 {:.4}±{:.4}, M=8 {:.2e}±{:.1e}; self-consistency TV(B20,B25) ≤ {selfc:.1e}",
            a.0, a.1, b.0, b.1
        ),
    ))
}

fn c6_theorem_2_2() -> Outcome {
    // N_Y ≤ 14 makes the subset DP exact; at n = 10 the filter keeps ~5%.
    let n = 10;
    let insts = partial_filtered(n, 50, 600, |i| i.n_y() <= 14);
    let (mut tv2, mut tv16) = (vec![], vec![]);
    for inst in &insts {
        let p = PartialPosteriorProblem::from_instance(inst).map_err(err)?;
        let full = marginals_dp_partial(&p).map_err(err)?.rows();
        for (m, acc) in [(2, &mut tv2), (16, &mut tv16)] {
            let rows: Vec<MatchDistribution> = local_marginals_partial(&p, n, m, PartialEngine::SubsetDp)
                .map_err(err)?
                .into_iter()
                .map(|r| r.dist.ok_or("skipped row"))
                .collect::<Result<_, _>>()?;
            acc.push(mean_row_tv(&rows, &full));
        }
    }
    let (a, b) = (mean_se(&tv2), mean_se(&tv16));
    Ok((
        drops(a, b),
        format!("n={n}, {} instances: M=2 {:.4}±{:.4}, M=16 {:.2e}±{:.1e}", insts.len(), a.0, a.1, b.0, b.1),
    ))
}

fn c7_flow() -> Outcome {
    let mut bad = 0usize;
    for s in 0..100 {
        let inst = exact(50, 700 + s);
        let maps = bayesmatch::exact::sort_maps(&inst.x, &inst.y);
        for i in 0..50 {
            let f = flow_stats(&inst, i, 1.0).map_err(err)?.f;
            let want = maps.s_inv[i] as i64 - maps.t_inv[inst.pi_star[i]] as i64;
            bad += usize::from(f != want);
        }
    }
    let mut cuts = 0usize;
    let mut nonconst = 0usize;
    for s in 0..100 {
        let cfg = sample_ppp_exact(&DensityLambda::Uniform, &gauss(1.0), 10.0, 800 + s).map_err(err)?;
        let truth = IndexedBijection::truth(&cfg);
        let flows: Vec<i64> = interior_cuts(&cfg)
            .into_iter()
            .map(|a| flow_of_bijection(&cfg, &truth, a).map(|f| f.f))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        cuts += flows.len();
        nonconst += usize::from(flows.windows(2).any(|w| w[0] != w[1]));
    }
    Ok((
        bad == 0 && nonconst == 0 && cuts > 0,
        format!("{bad} rank-flow mismatches over 5000 indices; {nonconst} of 100 PPP samples with non-constant flow ({cuts} interior cuts)"),
    ))
}

fn c8_coincidence() -> Outcome {
    let (n, m) = (60, 3);
    let d = default_flow_radius(m, &DensityLambda::Uniform);
    let (mut interior, mut coincide, mut unflagged) = (0usize, 0usize, 0usize);
    for s in 0..20 {
        let inst = exact(n, 900 + s);
        let p = ExactPosteriorProblem::from_instance(&inst).map_err(err)?;
        let hat = local_marginals_exact(&p, m).map_err(err)?;
        let tilde = tilde_marginals_exact(&inst, m, d).map_err(err)?;
        let (lo, hi) = (d / n as f64, 1.0 - d / n as f64);
        for i in (0..n).filter(|&i| inst.x[i] >= lo && inst.x[i] <= hi) {
            interior += 1;
            if tilde[i].row.flag == LocalFlag::Fallback {
                continue;
            }
            if tilde[i].row.dist == hat[i].dist {
                coincide += 1;
            } else {
                unflagged += 1;
            }
        }
    }
    let frac = coincide as f64 / interior as f64;
    Ok((
        frac >= 0.95 && unflagged == 0,
        format!("{coincide}/{interior} interior rows identical ({:.1}%), {unflagged} unflagged mismatches, D={d}", 100.0 * frac),
    ))
}

fn c9_normalizer() -> Outcome {
    let model = PairModel::new(gauss(1.0), DensityLambda::Uniform, 1000).map_err(err)?;
    let nz = 1000.0 * model.z_n().map_err(err)?;
    let mut sup = 0.0f64;
    for k in 0..=160 {
        let x = 0.1 + 0.8 * k as f64 / 160.0;
        sup = sup.max((model.p_n(x).map_err(err)? - 1.0).abs());
    }
    Ok((
        (nz - 1.0).abs() <= 0.02 && sup <= 0.02,
        format!("|n·Z_n − 1| = {:.2e}, sup |p_n − 1| = {sup:.2e} at n=1000", (nz - 1.0).abs()),
    ))
}

fn c10_cauchy() -> Outcome {
    let runs = [
        ("exact σ=1.4", gauss(1.4), None, UConvention::LogSqrtLambda),
        ("partial p=0.4 log√Λ", gauss(1.0), Some(0.4), UConvention::LogSqrtLambda),
        ("partial p=0.4 √Λ", gauss(1.0), Some(0.4), UConvention::SqrtLambda),
    ];
    let mut ok = true;
    let mut notes = vec![];
    for (name, potential, p, u_convention) in runs {
        let spec = CauchySpec {
            density: DensityLambda::Uniform,
            potential,
            p,
            k_list: vec![4, 8, 12, 16],
            reps: 100,
            seed: 1010,
            u_convention,
        };
        let t = check_qk_cauchy(&spec).map_err(err)?;
        let ms: Vec<(f64, f64)> = t.rows.iter().map(|r| (r.mean_tv, r.se)).collect();
        let dec = ms.windows(2).all(|w| drops(w[0], w[1]));
        ok &= dec;
        let trail: Vec<String> = ms.iter().map(|(m, s)| format!("{m:.4}±{s:.4}")).collect();
        notes.push(format!("{name}: {}", trail.join(" > ")));
    }
    Ok((ok, notes.join("; ")))
}

fn c11_calibration() -> Outcome {
    let insts = partial_filtered(4, 200, 1100, |i| i.n_y() <= 14);
    let (mut cover, mut truth_p, mut self_p) = (vec![], vec![], vec![]);
    for inst in &insts {
        let p = PartialPosteriorProblem::from_instance(inst).map_err(err)?;
        let rows = marginals_dp_partial(&p).map_err(err)?.rows();
        let labels = truth_labels(inst);
        let k = rows.len() as f64;
        let mut c = 0.0;
        let mut t = 0.0;
        let mut s = 0.0;
        for (r, &j) in rows.iter().zip(&labels) {
            c += expected_coverage(r, j, 0.1).map_err(err)?;
            t += cost_true_match(r, j);
            s += r.entries().iter().map(|e| e.1 * e.1).sum::<f64>();
        }
        cover.push(c / k);
        truth_p.push(t / k);
        self_p.push(s / k);
    }
    let cov = mean_se(&cover);
    let diff: Vec<f64> = truth_p.iter().zip(&self_p).map(|(a, b)| a - b).collect();
    let d = mean_se(&diff);
    Ok((
        (0.87..=0.93).contains(&cov.0) && d.0.abs() <= 2.0 * d.1,
        format!(
            "{} instances: coverage {:.4}±{:.4}; true-match {:.4} vs self-assigned {:.4} (Δ {:.4}±{:.4})",
            insts.len(),
            cov.0,
            cov.1,
            mean_se(&truth_p).0,
            mean_se(&self_p).0,
            d.0,
            d.1
        ),
    ))
}

fn c12_mcmc() -> Outcome {
    let p = ExactPosteriorProblem::from_instance(&exact(5, 1200)).map_err(err)?;
    let bf = marginals_bruteforce_exact(&p).map_err(err)?;
    let est = mcmc_marginals_exact(&p, ChainOptions::steps(2_000_000), 1201).map_err(err)?;
    let tv = est.max_row_tv(&bf);
    let inst = partial_filtered(2, 1, 1300, |i| i.n_x() == 4 && i.n_y() == 4).remove(0);
    let q = PartialPosteriorProblem::from_instance(&inst).map_err(err)?;
    let dp = marginals_dp_partial(&q).map_err(err)?;
    let pest = mcmc_marginals_partial(&q, ChainOptions::steps(2_000_000), 1301).map_err(err)?;
    let pd = pest.max_abs_diff(&dp);
    Ok((
        tv <= 0.02 && pd <= 0.02,
        format!("exact n=5 max row TV {tv:.4}; partial 4×4 max |Δ| {pd:.4}"),
    ))
}

fn csv_bodies(dir: &Path) -> Vec<(PathBuf, String)> {
    let mut out = vec![];
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap().flatten() {
            let path = e.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|x| x == "csv") {
                let text = std::fs::read_to_string(&path).unwrap();
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), csv_body(&text)));
            }
        }
    }
    out.sort();
    out
}

fn c13_determinism() -> Outcome {
    let root = std::env::temp_dir().join(format!("bayesmatch-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&root);
    std::fs::create_dir_all(&root).map_err(err)?;
    let configs = [
        ("exact", r#"{"n": [8], "m": [1, 2], "k": [4, 8], "reps": 2, "events": {"samples": 200}}"#),
        ("partial", r#"{"kind": "partial", "n": [3], "m": [1, 2], "k": [4, 8], "reps": 2}"#),
    ];
    let commands = ["generate", "marginals", "local", "tv-experiment", "limit-experiment", "diagnostics"];
    let mut files = 0usize;
    let mut differing = vec![];
    for (kind, cfg) in configs {
        let cfg_path = root.join(format!("{kind}.json"));
        std::fs::write(&cfg_path, cfg).map_err(err)?;
        for cmd in commands {
            if kind == "partial" && cmd == "diagnostics" {
                continue;
            }
            let mut runs = vec![];
            for rep in 0..2 {
                let out = root.join(format!("{kind}-{cmd}-{rep}"));
                let status = Command::new(env!("CARGO_BIN_EXE_bayesmatch"))
                    .args([cmd, "--seed", "13", "--config"])
                    .arg(&cfg_path)
                    .arg("--out")
                    .arg(&out)
                    .output()
                    .map_err(err)?;
                if !status.status.success() {
                    return Ok((false, format!("{kind} {cmd} failed: {}", String::from_utf8_lossy(&status.stderr))));
                }
                runs.push(csv_bodies(&out));
            }
            files += runs[0].len();
            if runs[0] != runs[1] || (cmd != "generate" && runs[0].is_empty()) {
                differing.push(format!("{kind} {cmd}"));
            }
        }
    }
    let _ = std::fs::remove_dir_all(&root);
    Ok((
        differing.is_empty(),
        if differing.is_empty() {
            format!("{files} CSV files byte-identical across reruns, 11 command/kind pairs")
        } else {
            format!("differing or empty: {}", differing.join(", "))
        },
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("engine equivalence (exact)", c1_engines_exact),
        ("engine equivalence (partial)", c2_engines_partial),
        ("partial-bijection counting", c3_counting),
        ("Algorithm 2 exact at full window", c4_full_window),
        ("local TV trend, exact model (Thm 2.5)", c5_theorem_2_5),
        ("local TV trend, partial model (Thm 2.2)", c6_theorem_2_2),
        ("flow identities", c7_flow),
        ("Algorithm 3 coincidence", c8_coincidence),
        ("normalizer numerics (Prop 2.1)", c9_normalizer),
        ("Q_K Cauchy trend (Props 2.4/2.9)", c10_cauchy),
        ("Bayes calibration", c11_calibration),
        ("MCMC validation", c12_mcmc),
        ("CLI determinism", c13_determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (ok, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!ok);
        println!(
            "{} [{}] {name}: {detail} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            k + 1,
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
