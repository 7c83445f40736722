//! Experiment commands behind the `bayesmatch` binary.
//!
//! Every command validates its configuration, derives all randomness from
//! the configured seed, runs independent sweep points on the rayon pool and
//! merges results by sweep index, so outputs do not depend on scheduling.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use config::{EventSampler, EventsConfig, ExactLocal, ExperimentConfig, ModelKind, Overrides};

use crate::costs::CostSpec;
use crate::diagnostics::{event_rates, ChainOptions, EventRates, PosteriorSampler};
use crate::diagnostics::events::ENUMERATION_SAMPLER_CAP;
use crate::dist::{tv_distance, Label, MatchDistribution};
use crate::error::{MatchError, Result};
use crate::exact::{ExactEngine, ExactPosteriorProblem};
use crate::io::{
    local_csv, marginal_csv, write_instance, write_json, fmt_f64, CsvTable, Instance, Manifest, ManifestEntry,
    MarginalMeta, Provenance, SCHEMA_VERSION,
};
use crate::local::{local_marginals_exact, local_marginals_partial, tilde_marginals_exact, LocalFlag, LocalRow};
use crate::partial::PartialPosteriorProblem;
use crate::ppp_gibbs::{check_qk_cauchy, mean_se, origin_truth, qk_ladder_config, CauchySpec, CauchyTable};
use crate::rng::derive_seed;
use crate::sampler::{sample_exact_instance, sample_partial_instance};

const TAG_INSTANCE: u64 = 0x494E;
const TAG_CAUCHY: u64 = 0xCA;
const TAG_LIMIT_COST: u64 = 0x4C;
const TAG_EVENTS: u64 = 0xE7;

/// Banded self-consistency tolerance on the max row TV.
pub const BAND_CHECK_TOL: f64 = 1e-6;

fn note(msg: impl AsRef<str>) {
    eprintln!("bayesmatch: {}", msg.as_ref());
}

/// Seed of replicate `rep` at size `n`.
pub fn instance_seed(seed: u64, n: usize, rep: usize) -> u64 {
    derive_seed(derive_seed(seed, TAG_INSTANCE, n as u64), 0, rep as u64)
}

pub fn sample_instance(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<Instance> {
    Ok(match cfg.kind {
        ModelKind::Exact => Instance::Exact(sample_exact_instance(&cfg.potential, &cfg.density, n, seed)?),
        ModelKind::Partial => {
            Instance::Partial(sample_partial_instance(&cfg.potential, &cfg.density, n, cfg.p, seed)?)
        }
    })
}

/// A named instance of a sweep.
#[derive(Clone, Debug)]
pub struct Job {
    pub name: String,
    pub n: usize,
    pub rep: usize,
    pub instance: Instance,
}

/// Validated configuration plus provenance.
#[derive(Clone, Debug)]
pub struct Context {
    pub cfg: ExperimentConfig,
    pub seed: u64,
    pub prov: Provenance,
}

impl Context {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.seed()?;
        let prov = Provenance::new(&cfg.canonical_bytes(), seed);
        Ok(Context { cfg, seed, prov })
    }

    fn dir(&self, sub: &str) -> Result<PathBuf> {
        let d = if sub.is_empty() { self.cfg.out.clone() } else { self.cfg.out.join(sub) };
        fs::create_dir_all(&d)?;
        Ok(d)
    }

    fn write_csv(&self, path: PathBuf, table: &CsvTable) -> Result<PathBuf> {
        table.write(&path, &self.prov)?;
        Ok(path)
    }

    /// Instances from explicit files (`instance` first, then the config
    /// list), or sampled over `n × reps`.
    pub fn jobs(&self, instance: Option<&Path>) -> Result<Vec<Job>> {
        let files: Option<Vec<PathBuf>> = match instance {
            Some(p) => Some(vec![p.to_path_buf()]),
            None => self.cfg.instances.clone(),
        };
        if let Some(files) = files {
            return files
                .iter()
                .enumerate()
                .map(|(rep, f)| {
                    let instance = crate::io::read_instance(f)?;
                    let name = f.file_stem().map_or_else(|| format!("instance{rep}"), |s| s.to_string_lossy().into());
                    Ok(Job {
                        name,
                        n: instance.n(),
                        rep,
                        instance,
                    })
                })
                .collect();
        }
        let points: Vec<(usize, usize)> =
            self.cfg.n.iter().flat_map(|&n| (0..self.cfg.reps).map(move |r| (n, r))).collect();
        points
            .par_iter()
            .map(|&(n, rep)| {
                let s = instance_seed(self.seed, n, rep);
                let instance = sample_instance(&self.cfg, n, s)?;
                let kind = match self.cfg.kind {
                    ModelKind::Exact => "exact",
                    ModelKind::Partial => "partial",
                };
                Ok(Job {
                    name: format!("{kind}_n{n}_r{rep}"),
                    n,
                    rep,
                    instance,
                })
            })
            .collect()
    }
}

fn exact_problem(inst: &Instance) -> Result<ExactPosteriorProblem> {
    match inst {
        Instance::Exact(i) => ExactPosteriorProblem::from_instance(i),
        Instance::Partial(_) => Err(MatchError::Unsupported("expected an exact instance".into())),
    }
}

/// Posterior marginal rows of an instance and the engine that produced
/// them. A banded run is cross-checked against `check_band` when set.
pub fn posterior_rows(cfg: &ExperimentConfig, inst: &Instance) -> Result<(Vec<MatchDistribution>, String, Option<usize>)> {
    match inst {
        Instance::Exact(_) => {
            let problem = exact_problem(inst)?;
            let engine = cfg.exact_engine(&problem)?;
            let table = engine.run(&problem)?;
            let band = match engine {
                ExactEngine::Banded { band } => {
                    if let Some(b2) = cfg.check_band {
                        let other = ExactEngine::Banded { band: b2 }.run(&problem)?;
                        let tv = table.max_row_tv(&other);
                        if !(tv <= BAND_CHECK_TOL) {
                            return Err(MatchError::Numeric(format!(
                                "banded self-consistency failed: max row TV {tv:e} between B={band} and B={b2}"
                            )));
                        }
                    }
                    Some(band)
                }
                _ => None,
            };
            Ok((table.rows(), engine.name().to_string(), band))
        }
        Instance::Partial(i) => {
            let problem = PartialPosteriorProblem::from_instance(i)?;
            let engine = cfg.partial_engine()?.resolve(&problem);
            Ok((engine.run(&problem)?.rows(), engine.name().to_string(), None))
        }
    }
}

/// Local-algorithm rows at window parameter `m`: Algorithm 1 for partial
/// instances, Algorithm 2 or 3 for exact ones.
pub fn local_rows(cfg: &ExperimentConfig, inst: &Instance, m: usize) -> Result<Vec<LocalRow>> {
    match inst {
        Instance::Exact(i) => match cfg.algorithm {
            ExactLocal::Algorithm2 => local_marginals_exact(&exact_problem(inst)?, m),
            ExactLocal::Algorithm3 => {
                Ok(tilde_marginals_exact(i, m, cfg.flow_radius(m))?.into_iter().map(|t| t.row).collect())
            }
        },
        Instance::Partial(i) => {
            let problem = PartialPosteriorProblem::from_instance(i)?;
            local_marginals_partial(&problem, i.n, m, cfg.partial_engine()?)
        }
    }
}

/// Writes sampled instances and a manifest of their seeds and hashes.
pub fn cmd_generate(cfg: ExperimentConfig) -> Result<Vec<PathBuf>> {
    let ctx = Context::new(cfg)?;
    note(format!("generate: seed={}", ctx.seed));
    let dir = ctx.dir("instances")?;
    let jobs = ctx.jobs(None)?;
    let mut entries = Vec::with_capacity(jobs.len());
    let mut written = Vec::with_capacity(jobs.len() + 1);
    for job in &jobs {
        let file = format!("{}.json", job.name);
        let path = dir.join(&file);
        let sha256 = write_instance(&path, &job.instance)?;
        note(format!("  {file}: seed={}", job.instance.seed()));
        entries.push(ManifestEntry {
            file: format!("instances/{file}"),
            kind: job.instance.kind(),
            n: job.n,
            rep: job.rep,
            seed: job.instance.seed(),
            sha256,
        });
        written.push(path);
    }
    let manifest = ctx.dir("")?.join("manifest.json");
    write_json(
        &manifest,
        &Manifest {
            schema_version: SCHEMA_VERSION,
            provenance: ctx.prov.clone(),
            entries,
        },
    )?;
    written.push(manifest);
    Ok(written)
}

/// Full posterior marginals per instance as `(i, j, prob)` CSV plus JSON
/// metadata.
pub fn cmd_marginals(cfg: ExperimentConfig, instance: Option<&Path>) -> Result<Vec<PathBuf>> {
    let ctx = Context::new(cfg)?;
    note(format!("marginals: seed={} engine={}", ctx.seed, ctx.cfg.engine));
    let dir = ctx.dir("marginals")?;
    let jobs = ctx.jobs(instance)?;
    let results: Vec<_> = jobs
        .par_iter()
        .map(|job| {
            let t0 = Instant::now();
            let out = posterior_rows(&ctx.cfg, &job.instance)?;
            Ok((out, t0.elapsed().as_secs_f64()))
        })
        .collect::<Result<_>>()?;
    let mut written = Vec::new();
    for (job, ((rows, engine, band), runtime_s)) in jobs.iter().zip(results) {
        note(format!("  {}: seed={} engine={engine}", job.name, job.instance.seed()));
        written.push(ctx.write_csv(dir.join(format!("{}.csv", job.name)), &marginal_csv(&rows))?);
        let meta = dir.join(format!("{}.json", job.name));
        write_json(
            &meta,
            &MarginalMeta {
                engine,
                band,
                runtime_s,
                instance_seed: job.instance.seed(),
                provenance: ctx.prov.clone(),
            },
        )?;
        written.push(meta);
    }
    Ok(written)
}

/// Local-algorithm marginals for every `M` of the configuration.
pub fn cmd_local(cfg: ExperimentConfig, instance: Option<&Path>) -> Result<Vec<PathBuf>> {
    let ctx = Context::new(cfg)?;
    note(format!("local: seed={}", ctx.seed));
    let dir = ctx.dir("local")?;
    let jobs = ctx.jobs(instance)?;
    let points: Vec<(usize, usize)> = (0..jobs.len()).flat_map(|j| ctx.cfg.m.iter().map(move |&m| (j, m))).collect();
    let results: Vec<Vec<LocalRow>> = points
        .par_iter()
        .map(|&(j, m)| local_rows(&ctx.cfg, &jobs[j].instance, m))
        .collect::<Result<_>>()?;
    points
        .iter()
        .zip(results)
        .map(|(&(j, m), rows)| {
            let index: Vec<usize> = (0..rows.len()).collect();
            ctx.write_csv(dir.join(format!("{}_M{m}.csv", jobs[j].name)), &local_csv(&index, &rows))
        })
        .collect()
}

/// One `(n, M)` cell of the TV table.
#[derive(Clone, Debug, PartialEq)]
pub struct TvRow {
    pub n: usize,
    pub m: usize,
    pub mean_tv: f64,
    pub se: f64,
    pub reps: usize,
    pub skip_rate: f64,
}

/// Mean TV between local and full marginals per instance and `M`; skipped
/// rows are excluded from the mean and counted in `skip_rate`.
pub fn tv_experiment(ctx: &Context) -> Result<Vec<TvRow>> {
    let jobs = ctx.jobs(None)?;
    // per job, per M: (mean TV over rows or None, skipped rows, total rows)
    let per_job: Vec<Vec<(Option<f64>, usize, usize)>> = jobs
        .par_iter()
        .map(|job| {
            let (truth, _, _) = posterior_rows(&ctx.cfg, &job.instance).map_err(|e| match e {
                MatchError::SizeCap { engine, size, cap } => {
                    note(format!("ground truth infeasible at n={}: use a smaller n or engine \"banded\"", job.n));
                    MatchError::SizeCap { engine, size, cap }
                }
                e => e,
            })?;
            ctx.cfg
                .m
                .iter()
                .map(|&m| {
                    let rows = local_rows(&ctx.cfg, &job.instance, m)?;
                    let tvs: Vec<f64> = rows
                        .iter()
                        .zip(&truth)
                        .filter_map(|(r, t)| r.dist.as_ref().map(|d| tv_distance(d, t)))
                        .collect();
                    let skipped = rows.iter().filter(|r| r.flag == LocalFlag::Skipped).count();
                    let mean = (!tvs.is_empty()).then(|| tvs.iter().sum::<f64>() / tvs.len() as f64);
                    Ok((mean, skipped, rows.len()))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for &n in &ctx.cfg.n {
        for (c, &m) in ctx.cfg.m.iter().enumerate() {
            let cells: Vec<&(Option<f64>, usize, usize)> =
                jobs.iter().zip(&per_job).filter(|(j, _)| j.n == n).map(|(_, v)| &v[c]).collect();
            let vals: Vec<f64> = cells.iter().filter_map(|c| c.0).collect();
            let skipped: usize = cells.iter().map(|c| c.1).sum();
            let total: usize = cells.iter().map(|c| c.2).sum();
            let (mean_tv, se) = mean_se(&vals);
            out.push(TvRow {
                n,
                m,
                mean_tv,
                se,
                reps: vals.len(),
                skip_rate: if total == 0 { 0.0 } else { skipped as f64 / total as f64 },
            });
        }
    }
    Ok(out)
}

pub fn cmd_tv_experiment(cfg: ExperimentConfig) -> Result<Vec<PathBuf>> {
    let ctx = Context::new(cfg)?;
    note(format!("tv-experiment: seed={} reps={}", ctx.seed, ctx.cfg.reps));
    let rows = tv_experiment(&ctx)?;
    let mut t = CsvTable::new(["n", "M", "mean_tv", "se", "reps", "skip_rate"]);
    for r in &rows {
        t.push([
            r.n.to_string(),
            r.m.to_string(),
            fmt_f64(r.mean_tv),
            fmt_f64(r.se),
            r.reps.to_string(),
            fmt_f64(r.skip_rate),
        ]);
    }
    Ok(vec![ctx.write_csv(ctx.dir("")?.join("tv_experiment.csv"), &t)?])
}

fn cauchy_spec(ctx: &Context, k_list: Vec<usize>, seed: u64) -> CauchySpec {
    CauchySpec {
        density: ctx.cfg.density.clone(),
        potential: ctx.cfg.potential.clone(),
        p: (ctx.cfg.kind == ModelKind::Partial).then_some(ctx.cfg.p),
        k_list,
        reps: ctx.cfg.reps,
        seed,
        u_convention: ctx.cfg.u_convention,
    }
}

/// Finite-n cost average against its PPP-limit counterpart.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitCostRow {
    pub n: usize,
    pub cost: CostSpec,
    pub finite_mean: f64,
    pub finite_se: f64,
    pub limit_mean: f64,
    pub limit_se: f64,
    pub limit_k: usize,
    pub limit_reps: usize,
}

/// Limit side: `f(Q_K^0, truth)` over `reps` coupled samples at the
/// largest K.
pub fn limit_costs(ctx: &Context) -> Result<Vec<(f64, f64, usize)>> {
    let costs = ctx.cfg.cost_specs()?;
    let k_max = *ctx.cfg.k.iter().max().expect("validated nonempty");
    let spec = cauchy_spec(ctx, vec![k_max], 0);
    let per_rep: Vec<Option<Vec<f64>>> = (0..ctx.cfg.reps)
        .into_par_iter()
        .map(|r| match qk_ladder_config(&spec, derive_seed(ctx.seed, TAG_LIMIT_COST, r as u64)) {
            Ok((cfg, q)) => {
                let truth = origin_truth(&cfg);
                costs.iter().map(|c| c.eval(&q[0].probs, truth)).collect::<Result<Vec<_>>>().map(Some)
            }
            Err(MatchError::SizeCap { .. } | MatchError::WindowTooSmall(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let ok: Vec<&Vec<f64>> = per_rep.iter().flatten().collect();
    Ok((0..costs.len())
        .map(|c| {
            let v: Vec<f64> = ok.iter().map(|r| r[c]).collect();
            let (m, se) = mean_se(&v);
            (m, se, v.len())
        })
        .collect())
}

pub fn limit_cost_table(ctx: &Context) -> Result<Vec<LimitCostRow>> {
    let costs = ctx.cfg.cost_specs()?;
    let limit = limit_costs(ctx)?;
    let jobs = ctx.jobs(None)?;
    let finite: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|job| {
            let (rows, _, _) = posterior_rows(&ctx.cfg, &job.instance)?;
            let truth: Vec<Label> = job.instance.truth();
            costs
                .iter()
                .map(|&c| crate::costs::empirical_cost_average(&rows, &truth, c))
                .collect()
        })
        .collect::<Result<_>>()?;
    let k_max = *ctx.cfg.k.iter().max().expect("validated nonempty");
    let mut out = Vec::new();
    for &n in &ctx.cfg.n {
        for (c, &cost) in costs.iter().enumerate() {
            let v: Vec<f64> = jobs.iter().zip(&finite).filter(|(j, _)| j.n == n).map(|(_, f)| f[c]).collect();
            let (finite_mean, finite_se) = mean_se(&v);
            out.push(LimitCostRow {
                n,
                cost,
                finite_mean,
                finite_se,
                limit_mean: limit[c].0,
                limit_se: limit[c].1,
                limit_k: k_max,
                limit_reps: limit[c].2,
            });
        }
    }
    Ok(out)
}

pub fn cauchy_csv(table: &CauchyTable, u_convention: &str) -> CsvTable {
    let mut t = CsvTable::new(["K", "K'", "mean_tv", "se", "reps", "skip_rate", "u_convention"]);
    for r in &table.rows {
        t.push([
            r.k.to_string(),
            r.k_next.to_string(),
            fmt_f64(r.mean_tv),
            fmt_f64(r.se),
            r.reps.to_string(),
            fmt_f64(r.skip_rate),
            u_convention.to_string(),
        ]);
    }
    t
}

/// Cauchy table of `Q_K^0` over the K list, and finite-n versus limit cost
/// averages.
pub fn cmd_limit_experiment(cfg: ExperimentConfig) -> Result<Vec<PathBuf>> {
    let ctx = Context::new(cfg)?;
    let u = match ctx.cfg.kind {
        ModelKind::Exact => "none",
        ModelKind::Partial => ctx.cfg.u_convention.name(),
    };
    note(format!("limit-experiment: seed={} reps={} u_convention={u}", ctx.seed, ctx.cfg.reps));
    let dir = ctx.dir("")?;
    let mut k_list = ctx.cfg.k.clone();
    k_list.sort_unstable();
    k_list.dedup();
    let cauchy = check_qk_cauchy(&cauchy_spec(&ctx, k_list, derive_seed(ctx.seed, TAG_CAUCHY, 0)))?;
    let mut written = vec![ctx.write_csv(dir.join("cauchy.csv"), &cauchy_csv(&cauchy, u))?];

    let rows = limit_cost_table(&ctx)?;
    let mut t = CsvTable::new([
        "n",
        "cost",
        "finite_mean",
        "finite_se",
        "limit_mean",
        "limit_se",
        "abs_diff",
        "K",
        "limit_reps",
        "u_convention",
    ]);
    for r in &rows {
        t.push([
            r.n.to_string(),
            r.cost.to_string(),
            fmt_f64(r.finite_mean),
            fmt_f64(r.finite_se),
            fmt_f64(r.limit_mean),
            fmt_f64(r.limit_se),
            fmt_f64((r.finite_mean - r.limit_mean).abs()),
            r.limit_k.to_string(),
            r.limit_reps.to_string(),
            u.to_string(),
        ]);
    }
    written.push(ctx.write_csv(dir.join("limit_costs.csv"), &t)?);
    Ok(written)
}

fn event_sampler(cfg: &EventsConfig, n: usize) -> PosteriorSampler {
    let enumerate = match cfg.sampler {
        EventSampler::Auto => n <= ENUMERATION_SAMPLER_CAP,
        EventSampler::Enumeration => true,
        EventSampler::Mcmc => false,
    };
    if enumerate {
        PosteriorSampler::Enumeration { samples: cfg.samples }
    } else {
        PosteriorSampler::Mcmc(ChainOptions::steps(cfg.steps))
    }
}

pub fn events_csv(rates: &EventRates) -> CsvTable {
    let mut t = CsvTable::new(["site", "A", "C_frequency", "L_frequency", "G_frequency"]);
    for s in &rates.sites {
        t.push([
            s.site.to_string(),
            (s.a as u8).to_string(),
            fmt_f64(s.c_frequency),
            fmt_f64(s.l_frequency),
            fmt_f64(s.g_frequency),
        ]);
    }
    t
}

/// Event-rate CSV per instance and `L`, plus a summary table.
pub fn cmd_diagnostics(cfg: ExperimentConfig) -> Result<Vec<PathBuf>> {
    let ctx = Context::new(cfg)?;
    if ctx.cfg.kind != ModelKind::Exact {
        return Err(MatchError::Unsupported("event diagnostics need kind = exact".into()));
    }
    note(format!("diagnostics: seed={}", ctx.seed));
    if ctx.cfg.instances.as_ref().is_some_and(Vec::is_empty) {
        note("warning: empty instance list, nothing to do");
        return Ok(Vec::new());
    }
    let dir = ctx.dir("diagnostics")?;
    let jobs = ctx.jobs(None)?;
    let ev = &ctx.cfg.events;
    let points: Vec<(usize, usize)> = (0..jobs.len()).flat_map(|j| ev.l.iter().map(move |&l| (j, l))).collect();
    let results: Vec<(u64, EventRates)> = points
        .par_iter()
        .map(|&(j, l)| {
            let Instance::Exact(inst) = &jobs[j].instance else {
                return Err(MatchError::Unsupported("event diagnostics need exact instances".into()));
            };
            let seed = derive_seed(inst.seed, TAG_EVENTS, l as u64);
            Ok((seed, event_rates(inst, ev.k, l, &event_sampler(ev, inst.n), seed)?))
        })
        .collect::<Result<_>>()?;
    let mut written = Vec::new();
    let mut summary = CsvTable::new([
        "instance",
        "n",
        "seed",
        "K",
        "L",
        "samples",
        "A_fraction",
        "C_fraction",
        "L_fraction",
        "G_fraction",
        "G_complement_mean",
        "iota",
    ]);
    for (&(j, l), (seed, r)) in points.iter().zip(&results) {
        let job = &jobs[j];
        note(format!("  {} L={l}: instance seed={} sampler seed={seed}", job.name, job.instance.seed()));
        written.push(ctx.write_csv(dir.join(format!("events_{}_L{l}.csv", job.name)), &events_csv(r))?);
        summary.push([
            job.name.clone(),
            job.n.to_string(),
            job.instance.seed().to_string(),
            r.k.to_string(),
            r.l.to_string(),
            r.samples.to_string(),
            fmt_f64(r.a_fraction),
            fmt_f64(r.c_fraction),
            fmt_f64(r.l_fraction),
            fmt_f64(r.g_fraction),
            fmt_f64(r.g_complement_mean),
            r.iota.map_or_else(String::new, fmt_f64),
        ]);
    }
    written.push(ctx.write_csv(dir.join("summary.csv"), &summary)?);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{read_instance, InstanceKind};

    fn tmp(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("bayesmatch-harness-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        d
    }

    fn cfg(json: &str, out: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::from_json(json).unwrap();
        c.out = out.to_path_buf();
        c
    }

    #[test]
    fn generate_cardinality_and_marks() {
        let out = tmp("gen");
        let c = cfg(r#"{"seed": 3, "kind": "partial", "n": [4, 5, 6], "reps": 2}"#, &out);
        let files = cmd_generate(c).unwrap();
        assert_eq!(files.len(), 3 * 2 + 1);
        let Instance::Partial(p) = read_instance(&files[0]).unwrap() else { panic!() };
        assert_eq!(p.marks.both.len(), p.pi_star.iter().flatten().count());
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        assert!(manifest.entries.iter().all(|e| e.kind == InstanceKind::Partial));
    }

    #[test]
    fn marginal_rows_sum_to_one() {
        let out = tmp("marg");
        let c = cfg(r#"{"seed": 1, "n": [6], "reps": 1, "engine": "bruteforce"}"#, &out);
        let files = cmd_marginals(c, None).unwrap();
        let text = fs::read_to_string(&files[0]).unwrap();
        let mut sums = [0.0f64; 6];
        for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            sums[f[0].parse::<usize>().unwrap()] += f[2].parse::<f64>().unwrap();
        }
        assert!(sums.iter().all(|s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn engine_cap_is_exit_three() {
        let out = tmp("cap");
        let c = cfg(r#"{"seed": 1, "n": [12], "reps": 1, "engine": "bruteforce"}"#, &out);
        assert_eq!(cmd_marginals(c, None).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn tv_small_n_reproducible_without_skips() {
        let out = tmp("tv");
        let c = cfg(r#"{"seed": 2, "n": [7], "m": [1, 7], "reps": 1}"#, &out);
        let ctx = Context::new(c).unwrap();
        let a = tv_experiment(&ctx).unwrap();
        assert_eq!(a, tv_experiment(&ctx).unwrap());
        assert!(a.iter().all(|r| r.skip_rate == 0.0));
        assert!(a[1].mean_tv < 1e-12);
    }

    #[test]
    fn diagnostics_empty_list_is_noop() {
        let out = tmp("diag");
        let c = cfg(r#"{"seed": 1, "instances": []}"#, &out);
        assert!(cmd_diagnostics(c).unwrap().is_empty());
    }
}
