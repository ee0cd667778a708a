use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{ConfigError, Format, Resolved, RunConfig, Suite, GAUSSIAN_C_TRIAL, VERSION};
use crate::corpus::{Corpus, Normalization};
use crate::heat::{conjugate, Semigroup};
use crate::ineq::gn::{
    check_gn, check_gn_weak, check_lorentz_gn, check_oscillation, check_sobolev_recovery, GnNorm, GnVariant,
};
use crate::ineq::hypotheses::*;
use crate::ineq::nonlinear::check_nonlinear_gn;
use crate::ineq::symmetrization::{check_heat_step, check_symmetrization, Endpoint};
use crate::ineq::{CheckReport, LorentzParams};
use crate::kprime::{equivalence_report, KPrimeOptions};
use crate::mm_space::Space;

/// Why a run stopped: a rejected configuration (exit 2) or a failure while
/// computing (exit 1).
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Internal(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Internal(_) => 1,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "invalid configuration: {e}"),
            RunError::Internal(e) => write!(f, "internal error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

/// Space, semigroup, corpus and resolved parameters shared by all jobs.
pub struct Context {
    pub config: RunConfig,
    pub space: Arc<Space>,
    pub sg: Semigroup,
    pub corpus: Corpus,
    pub resolved: Resolved,
    pub suites: Vec<Suite>,
}

impl Context {
    pub fn prepare(cfg: &RunConfig) -> Result<Self, RunError> {
        cfg.validate()?;
        let suite = cfg.suite.ok_or_else(|| ConfigError("no suite selected".into()))?;
        let suites = suite.expand();
        let space = cfg.build_space()?;
        let sg = Semigroup::new(space.clone(), &cfg.heat_options()).map_err(ConfigError::from)?;
        let resolved = Resolved::new(cfg, &space, sg.t_grid(), sg.is_dense())?;
        resolved.validate_for(&suites, &space)?;
        let corpus = Corpus::generate(
            &sg,
            cfg.seed,
            cfg.corpus_size,
            &resolved.kinds,
            Normalization::default(),
        )
        .map_err(ConfigError::from)?;
        Ok(Context {
            config: cfg.clone(),
            space,
            sg,
            corpus,
            resolved,
            suites,
        })
    }
}

type JobFn = fn(&Context) -> crate::Result<Vec<CheckReport>>;

#[derive(Clone, Copy)]
pub struct Job {
    pub key: &'static str,
    pub suite: Suite,
    run: JobFn,
}

#[derive(Clone, Debug, Serialize)]
pub struct Skipped {
    pub job: &'static str,
    pub reason: String,
}

fn one(r: crate::Result<CheckReport>) -> crate::Result<Vec<CheckReport>> {
    r.map(|r| vec![r])
}

fn renamed(r: crate::Result<CheckReport>, name: &str) -> crate::Result<Vec<CheckReport>> {
    r.map(|mut r| {
        r.name = name.into();
        vec![r]
    })
}

/// Jobs for the selected suites, in report order, plus the ones left out.
pub fn plan(ctx: &Context) -> (Vec<Job>, Vec<Skipped>) {
    let mut jobs = Vec::new();
    let mut skipped = Vec::new();
    let dense = ctx.sg.is_dense();
    let mut add = |suite: Suite, key: &'static str, run: JobFn, needs_dense: bool| {
        if needs_dense && !dense {
            skipped.push(Skipped {
                job: key,
                reason: format!("needs a dense kernel; {} vertices exceed the cap", ctx.space.len()),
            });
        } else {
            jobs.push(Job { key, suite, run });
        }
    };
    for &s in &ctx.suites {
        match s {
            Suite::Hypotheses => {
                add(
                    s,
                    "doubling",
                    |c| one(check_doubling(&c.space, c.resolved.r_max)),
                    false,
                );
                add(
                    s,
                    "poincare",
                    |c| {
                        one(check_poincare(
                            &c.space,
                            c.resolved.q,
                            c.resolved.r_max,
                            &c.corpus.functions,
                        ))
                    },
                    false,
                );
                if ctx.resolved.q != 2.0 {
                    add(
                        s,
                        "poincare_q2",
                        |c| {
                            renamed(
                                check_poincare(&c.space, 2.0, c.resolved.r_max, &c.corpus.functions),
                                "poincare_q2",
                            )
                        },
                        false,
                    );
                }
                add(
                    s,
                    "pseudo_poincare_heat",
                    |c| {
                        one(check_pseudo_poincare_heat(
                            &c.sg,
                            c.resolved.q,
                            c.sg.t_grid(),
                            &c.corpus.functions,
                        ))
                    },
                    false,
                );
                add(
                    s,
                    "pseudo_poincare_avg",
                    |c| {
                        one(check_pseudo_poincare_avg(
                            &c.space,
                            c.resolved.q,
                            c.resolved.r_max,
                            &c.corpus.functions,
                        ))
                    },
                    false,
                );
                add(
                    s,
                    "gaussian_bound",
                    |c| one(check_gaussian_bound(&c.sg, &c.resolved.gaussian_t, &GAUSSIAN_C_TRIAL)),
                    true,
                );
                add(
                    s,
                    "kernel_gradient",
                    |c| one(check_kernel_gradient(&c.sg, c.sg.t_grid())),
                    true,
                );
                add(
                    s,
                    "grad_semigroup",
                    |c| {
                        let p = conjugate(c.resolved.q);
                        one(check_grad_semigroup(&c.sg, p, c.sg.t_grid(), &c.corpus.functions))
                    },
                    true,
                );
                add(
                    s,
                    "g_implies_pseudo",
                    |c| {
                        let p = conjugate(c.resolved.q);
                        one(check_g_implies_pseudo(&c.sg, p, c.sg.t_grid(), &c.corpus.functions))
                    },
                    false,
                );
            }
            Suite::Symmetrization => {
                fn sym(c: &Context, e: Endpoint) -> crate::Result<Vec<CheckReport>> {
                    let r = &c.resolved;
                    one(check_symmetrization(
                        &c.sg,
                        &c.corpus.functions,
                        r.q,
                        r.alpha,
                        &r.s_grid,
                        e,
                    ))
                }
                add(s, "symmetrization_besov", |c| sym(c, Endpoint::Besov), false);
                add(s, "symmetrization_morrey", |c| sym(c, Endpoint::Morrey), false);
                add(s, "symmetrization_triebel", |c| sym(c, Endpoint::Triebel), false);
                add(
                    s,
                    "symmetrization_heat_step",
                    |c| {
                        let r = &c.resolved;
                        one(check_heat_step(
                            &c.sg,
                            &c.corpus.functions,
                            r.q,
                            c.sg.t_grid(),
                            &r.s_grid,
                        ))
                    },
                    false,
                );
            }
            Suite::Gn => {
                fn gn(c: &Context, n: GnNorm, v: GnVariant) -> crate::Result<Vec<CheckReport>> {
                    let r = &c.resolved;
                    one(check_gn(&c.sg, &c.corpus.functions, r.p, r.l, r.q, n, v))
                }
                fn weak(c: &Context, n: GnNorm) -> crate::Result<Vec<CheckReport>> {
                    let r = &c.resolved;
                    one(check_gn_weak(&c.sg, &c.corpus.functions, r.q, r.l, n))
                }
                add(s, "gn_besov", |c| gn(c, GnNorm::Besov, GnVariant::Global), false);
                add(s, "gn_morrey", |c| gn(c, GnNorm::Morrey, GnVariant::Global), false);
                add(s, "gn_besov_local", |c| gn(c, GnNorm::Besov, GnVariant::Local), false);
                add(s, "gn_morrey_local", |c| gn(c, GnNorm::Morrey, GnVariant::Local), false);
                add(s, "gn_weak_besov", |c| weak(c, GnNorm::Besov), false);
                add(s, "gn_weak_morrey", |c| weak(c, GnNorm::Morrey), false);
            }
            Suite::Sobolev => {
                add(
                    s,
                    "sobolev_recovery",
                    |c| {
                        let r = &c.resolved;
                        let (k, i) = check_sobolev_recovery(&c.sg, &c.corpus.functions, r.q, r.nu, &r.sobolev_t)?;
                        Ok(vec![k, i])
                    },
                    false,
                );
                add(
                    s,
                    "oscillation",
                    |c| {
                        let r = &c.resolved;
                        one(check_oscillation(
                            &c.space,
                            &c.corpus.functions,
                            r.q,
                            r.sigma,
                            &r.s_grid,
                        ))
                    },
                    false,
                );
            }
            Suite::Lorentz => {
                add(
                    s,
                    "lorentz_sli_prime",
                    |c| {
                        let r = &c.resolved;
                        let lp = LorentzParams::theta_zero(r.lorentz_p, r.sigma, r.q)?;
                        let (rep, emb) = check_lorentz_gn(&c.space, &c.corpus.functions, &lp)?;
                        Ok(std::iter::once(rep).chain(emb).collect())
                    },
                    false,
                );
                add(
                    s,
                    "lorentz_gn",
                    |c| {
                        let r = &c.resolved;
                        let p = r.lorentz_p;
                        let lp = LorentzParams::derived(p / r.l, p, r.l, p, r.l, r.sigma, r.q)?;
                        Ok(vec![check_lorentz_gn(&c.space, &c.corpus.functions, &lp)?.0])
                    },
                    false,
                );
            }
            Suite::Nonlinear => {
                add(
                    s,
                    "nonlinear_gn",
                    |c| {
                        one(check_nonlinear_gn(
                            &c.sg,
                            &c.corpus.functions,
                            c.resolved.nonlinear_p,
                            c.resolved.q,
                            false,
                        ))
                    },
                    false,
                );
                add(
                    s,
                    "nonlinear_gn_morrey",
                    |c| {
                        one(check_nonlinear_gn(
                            &c.sg,
                            &c.corpus.functions,
                            c.resolved.nonlinear_p,
                            c.resolved.q,
                            true,
                        ))
                    },
                    false,
                );
            }
            Suite::Kfunc => {
                add(s, "kprime_equivalence", kprime_job, false);
            }
            Suite::Core => unreachable!("expanded"),
        }
    }
    (jobs, skipped)
}

fn kprime_job(c: &Context) -> crate::Result<Vec<CheckReport>> {
    let q = c.resolved.q;
    let corpus: Vec<(String, Vec<f64>)> = c
        .corpus
        .functions
        .iter()
        .map(|f| (f.id.clone(), f.values.clone()))
        .collect();
    let eq = equivalence_report(&c.space, &corpus, q, &c.resolved.kfunc_t, &KPrimeOptions::default())?;
    let mut rep = CheckReport::new("kprime_equivalence").param("q", q).note(format!(
        "{} grid times in [{}, {}]",
        c.resolved.kfunc_t.len(),
        c.resolved.kfunc_t[0],
        c.resolved.kfunc_t[c.resolved.kfunc_t.len() - 1]
    ));
    rep.n_skipped = eq.n_skipped;
    let mut upper_ratio = 0.0f64;
    let mut sandwich = true;
    let mut unconverged = 0;
    for row in &eq.rows {
        rep.push(&row.f_id, &[("t", row.t)], row.solver, row.lower);
        upper_ratio = upper_ratio.max(row.upper / row.lower);
        sandwich &= row.lower <= row.solver * (1.0 + 1e-6) && row.solver <= row.upper * (1.0 + 1e-6);
        unconverged += usize::from(!row.converged);
    }
    rep.extra("min_ratio", eq.min_ratio);
    rep.extra("median_ratio", eq.median_ratio);
    rep.extra("upper_ratio_max", upper_ratio);
    rep.extra("sandwich_holds", sandwich);
    rep.extra("unconverged", unconverged);
    rep.extra("upper", eq.rows.iter().map(|r| r.upper).collect::<Vec<_>>());
    Ok(vec![rep])
}

#[derive(Debug)]
pub struct JobOutcome {
    pub key: &'static str,
    pub suite: Suite,
    pub result: Result<Vec<CheckReport>, String>,
    pub seconds: f64,
}

/// Runs `jobs` on up to `threads` workers; outcomes keep the job order.
pub fn execute(ctx: &Context, jobs: &[Job], threads: usize) -> Vec<JobOutcome> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<JobOutcome>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(job) = jobs.get(i) else { break };
        let start = Instant::now();
        let result = (job.run)(ctx).map_err(|e| e.to_string());
        let out = JobOutcome {
            key: job.key,
            suite: job.suite,
            result,
            seconds: start.elapsed().as_secs_f64(),
        };
        slots.lock().expect("no poisoned workers")[i] = Some(out);
    };
    let threads = threads.clamp(1, jobs.len().max(1));
    std::thread::scope(|s| {
        for _ in 1..threads {
            s.spawn(worker);
        }
        worker();
    });
    slots
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|o| o.expect("every job ran"))
        .collect()
}

/// Reports, summary and metadata of a finished run.
pub struct RunOutput {
    pub reports: Vec<CheckReport>,
    pub summary: Value,
    pub metadata: Value,
    pub failed: Vec<(String, String)>,
    pub corpus_csv: String,
}

/// JSON text of a report with the run configuration and version embedded.
pub fn report_json(rep: &CheckReport, cfg: &RunConfig) -> String {
    let mut v = serde_json::to_value(rep).expect("report serializes");
    let m = v.as_object_mut().expect("report is an object");
    m.insert("version".into(), json!(VERSION));
    m.insert("config".into(), cfg.to_json_value());
    let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
    s.push('\n');
    s
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Prepares the context, runs every job of the selected suite and assembles
/// the summary; nothing is written to disk.
pub fn run_check(cfg: &RunConfig, threads: usize) -> Result<RunOutput, RunError> {
    let started = unix_now();
    let clock = Instant::now();
    let ctx = Context::prepare(cfg)?;
    let prep = clock.elapsed().as_secs_f64();
    let (jobs, skipped) = plan(&ctx);
    let outcomes = execute(&ctx, &jobs, threads);
    let mut reports = Vec::new();
    let mut listing = Vec::new();
    let mut failed = Vec::new();
    let mut timing = serde_json::Map::new();
    for o in outcomes {
        timing.insert(o.key.into(), json!(o.seconds));
        match o.result {
            Ok(reps) => {
                for r in reps {
                    listing.push(json!({
                        "name": r.name,
                        "suite": o.suite,
                        "file": format!("{}.json", r.name),
                        "constant": r.constant,
                        "diverges": r.diverges,
                        "n_samples": r.n_samples,
                        "n_skipped": r.n_skipped,
                    }));
                    reports.push(r);
                }
            }
            Err(e) => failed.push((o.key.to_string(), e)),
        }
    }
    let summary = json!({
        "version": VERSION,
        "config": cfg.to_json_value(),
        "resolved": ctx.resolved,
        "space": {
            "label": ctx.space.label(),
            "n": ctx.space.len(),
            "n_edges": ctx.space.edges().len(),
            "diameter": ctx.space.diameter(),
            "total_measure": ctx.space.total_measure(),
            "dense": ctx.sg.is_dense(),
            "t_grid": ctx.sg.t_grid(),
        },
        "corpus": {
            "seed": ctx.corpus.seed,
            "size": ctx.corpus.len(),
            "kinds": ctx.corpus.kinds,
            "normalization": ctx.corpus.normalization,
        },
        "reports": listing,
        "skipped": skipped,
        "failed": failed.iter().map(|(k, e)| json!({"job": k, "error": e})).collect::<Vec<_>>(),
    });
    let metadata = json!({
        "version": VERSION,
        "started_unix": started,
        "finished_unix": unix_now(),
        "elapsed_seconds": clock.elapsed().as_secs_f64(),
        "prepare_seconds": prep,
        "threads": threads,
        "job_seconds": timing,
    });
    Ok(RunOutput {
        reports,
        summary,
        metadata,
        failed,
        corpus_csv: ctx.corpus.to_csv(ctx.space.ids()),
    })
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

/// Writes one JSON file per report (plus CSV samples when requested),
/// `summary.json`, `corpus.csv` and the timestamped `metadata.json`.
pub fn write_outputs(out: &RunOutput, cfg: &RunConfig, dir: &Path) -> std::io::Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for r in &out.reports {
        let name = format!("{}.json", r.name);
        fs::write(dir.join(&name), report_json(r, cfg))?;
        files.push(name);
        if cfg.format == Format::Both {
            let name = format!("{}.csv", r.name);
            fs::write(dir.join(&name), r.to_csv())?;
            files.push(name);
        }
    }
    fs::write(dir.join("summary.json"), pretty(&out.summary))?;
    if cfg.format == Format::Both {
        fs::write(dir.join("corpus.csv"), &out.corpus_csv)?;
    }
    fs::write(dir.join("metadata.json"), pretty(&out.metadata))?;
    Ok(files)
}
