//! Command-line front end: `space`, `check` and `plotdata`.
//!
//! Exit codes: 0 on success, 1 on an internal error, 2 on a rejected
//! configuration (bad flags, unknown suite, unreadable space, no reports).

pub mod config;
pub mod plot;
pub mod suite;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

pub use config::{ConfigError, Format, Resolved, RunConfig, SpaceSource, Suite, VERSION};
pub use suite::{run_check, write_outputs, Context, RunError, RunOutput};

use crate::corpus::Kind;
use crate::heat::{DEFAULT_DENSE_CAP, DEFAULT_T_MIN};
use crate::mm_space::DEFAULT_MAX_VERTICES;

pub const DEFAULT_OUT: &str = "gnlab-reports";

#[derive(Parser, Debug)]
#[command(
    name = "gnlab",
    version,
    about = "Empirical functional inequalities on finite weighted graphs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Summarize a space: size, diameter, doubling constant, growth exponent.
    Space(Common),
    /// Run a checker suite and write one JSON report per checker.
    Check(CheckArgs),
    /// Turn a report directory into CSV plot series.
    Plotdata(PlotArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Builtin descriptor, e.g. torus:32x32, cycle:8, tree:10, dumbbell:8,16.
    #[arg(long, visible_alias = "builtin", conflicts_with = "file")]
    space: Option<String>,
    /// Graph text file.
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the suite jobs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    l: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_T_MIN)]
    tmin: f64,
    /// Defaults to the squared diameter.
    #[arg(long)]
    tmax: Option<f64>,
    /// Time grid points per octave.
    #[arg(long, default_value_t = 1)]
    tpoints: usize,
    /// Points of the log-spaced s grid on [mu_min, mu(M)].
    #[arg(long, default_value_t = config::DEFAULT_S_POINTS)]
    spoints: usize,
    /// Largest ball radius; defaults to min(diameter / 2, 8).
    #[arg(long)]
    rmax: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    dense_cap: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_VERTICES)]
    max_vertices: usize,
    #[arg(long, default_value_t = config::DEFAULT_CORPUS_SIZE)]
    corpus_size: usize,
    /// Comma-separated subset of smoothed_noise, ball_indicator,
    /// distance_bump, eigenvector, rademacher.
    #[arg(long)]
    kinds: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// hypotheses, symmetrization, gn, sobolev, lorentz, nonlinear, kfunc or core.
    #[arg(long)]
    suite: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Directory written by `check`.
    #[arg(long, visible_alias = "reports")]
    dir: PathBuf,
    /// Defaults to `<dir>/plotdata`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn to_config(&self) -> Result<RunConfig, ConfigError> {
        let space = match (&self.space, &self.file) {
            (Some(s), None) => SpaceSource::Builtin(s.clone()),
            (None, Some(f)) => SpaceSource::File(f.to_string_lossy().into_owned()),
            _ => return Err(ConfigError("give exactly one of --space or --file".into())),
        };
        let kinds = self.kinds.as_deref().map(Kind::parse_list).transpose()?;
        let cfg = RunConfig {
            space,
            suite: None,
            seed: self.seed,
            q: self.q,
            p: self.p,
            l: self.l,
            alpha: self.alpha,
            nu: self.nu,
            sigma: self.sigma,
            t_min: self.tmin,
            t_max: self.tmax,
            t_points: self.tpoints,
            s_points: self.spoints,
            r_max: self.rmax,
            dense_cap: self.dense_cap,
            max_vertices: self.max_vertices,
            corpus_size: self.corpus_size,
            kinds,
            out: self.out.as_ref().map(|p| p.to_string_lossy().into_owned()),
            format: self.format,
        };
        if self.jobs == 0 {
            return Err(ConfigError("--jobs must be >= 1".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Space summary as JSON.
pub fn space_summary(cfg: &RunConfig) -> Result<serde_json::Value, RunError> {
    let space = cfg.build_space()?;
    let diam = space.diameter().max(1);
    let r_max = match cfg.r_max {
        Some(r) if r > diam => return Err(ConfigError(format!("--rmax {r} exceeds the diameter {diam}")).into()),
        Some(r) => r,
        None => (diam / 2).clamp(1, config::DEFAULT_R_MAX_CAP),
    };
    let d = space
        .doubling_constant(r_max)
        .map_err(|e| RunError::Internal(e.to_string()))?;
    let growth = space.growth_exponent(1, r_max).ok();
    Ok(json!({
        "version": VERSION,
        "config": cfg.to_json_value(),
        "label": space.label(),
        "n": space.len(),
        "n_edges": space.edges().len(),
        "diameter": space.diameter(),
        "total_measure": space.total_measure(),
        "max_degree": space.max_degree(),
        "r_max": r_max,
        "doubling": {
            "constant": d.constant,
            "vertex": space.ids()[d.vertex],
            "radius": d.radius,
            "per_radius": d.per_radius,
        },
        "growth": growth,
    }))
}

fn write_text(path: &Path, text: &str) -> Result<(), RunError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| RunError::Internal(e.to_string()))?;
    }
    std::fs::write(path, text).map_err(|e| RunError::Internal(format!("{}: {e}", path.display())))
}

fn cmd_space(c: &Common) -> Result<(), RunError> {
    let cfg = c.to_config()?;
    let mut text = serde_json::to_string_pretty(&space_summary(&cfg)?).expect("value serializes");
    text.push('\n');
    if let Some(dir) = &c.out {
        write_text(&dir.join("space.json"), &text)?;
    }
    print!("{text}");
    Ok(())
}

fn cmd_check(a: &CheckArgs) -> Result<(), RunError> {
    let suite: Suite = a
        .suite
        .as_deref()
        .ok_or_else(|| ConfigError("--suite is required".into()))?
        .parse()?;
    let mut cfg = a.common.to_config()?;
    cfg.suite = Some(suite);
    let out = run_check(&cfg, a.common.jobs)?;
    let dir = a.common.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    write_outputs(&out, &cfg, &dir).map_err(|e| RunError::Internal(format!("{}: {e}", dir.display())))?;
    for r in &out.reports {
        let c = r.constant.map_or("none".to_string(), |c| format!("{c:.6}"));
        let flag = if r.diverges { "  diverges" } else { "" };
        println!("{:<28} {c}{flag}", r.name);
    }
    println!("wrote {} reports to {}", out.reports.len(), dir.display());
    if out.failed.is_empty() {
        Ok(())
    } else {
        let msg: Vec<String> = out.failed.iter().map(|(k, e)| format!("{k}: {e}")).collect();
        Err(RunError::Internal(msg.join("; ")))
    }
}

fn cmd_plotdata(a: &PlotArgs) -> Result<(), RunError> {
    let out = a.out.clone().unwrap_or_else(|| a.dir.join("plotdata"));
    let files = plot::plotdata(&a.dir, &out)?;
    println!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let res = match &cli.cmd {
        Command::Space(c) => cmd_space(c),
        Command::Check(a) => cmd_check(a),
        Command::Plotdata(a) => cmd_plotdata(a),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("gnlab: {e}");
            e.exit_code()
        }
    }
}
