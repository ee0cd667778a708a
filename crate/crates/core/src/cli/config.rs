use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::Kind;
use crate::heat::{HeatOptions, DEFAULT_DENSE_CAP, DEFAULT_T_MIN};
use crate::ineq::{exponents, s_grid};
use crate::mm_space::{GrowthFit, Space, DEFAULT_MAX_VERTICES};

/// Library version embedded in every report.
pub const VERSION: &str = concat!("gnlab ", env!("CARGO_PKG_VERSION"));

pub const DEFAULT_CORPUS_SIZE: usize = 30;
pub const DEFAULT_S_POINTS: usize = 32;
pub const DEFAULT_R_MAX_CAP: usize = 8;
/// Trial exponents for the Gaussian kernel fit.
pub const GAUSSIAN_C_TRIAL: [f64; 5] = [0.0, 0.05, 0.1, 0.2, 0.25];
/// Grid times used by the K' equivalence report.
pub const KFUNC_TIMES: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceSource {
    Builtin(String),
    File(String),
}

impl SpaceSource {
    pub fn build(&self, max_vertices: usize) -> crate::Result<Space> {
        match self {
            SpaceSource::Builtin(d) => Space::builtin(d, max_vertices),
            SpaceSource::File(p) => Space::from_file(p, max_vertices),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Hypotheses,
    Symmetrization,
    Gn,
    Sobolev,
    Lorentz,
    Nonlinear,
    Kfunc,
    Core,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Hypotheses,
        Suite::Symmetrization,
        Suite::Gn,
        Suite::Sobolev,
        Suite::Lorentz,
        Suite::Nonlinear,
        Suite::Kfunc,
        Suite::Core,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Hypotheses => "hypotheses",
            Suite::Symmetrization => "symmetrization",
            Suite::Gn => "gn",
            Suite::Sobolev => "sobolev",
            Suite::Lorentz => "lorentz",
            Suite::Nonlinear => "nonlinear",
            Suite::Kfunc => "kfunc",
            Suite::Core => "core",
        }
    }

    /// The basic suites a selection runs, in order.
    pub fn expand(self) -> Vec<Suite> {
        match self {
            Suite::Core => vec![Suite::Hypotheses, Suite::Symmetrization, Suite::Gn],
            s => vec![s],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
            ConfigError(format!("unknown suite `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    #[default]
    Both,
}

/// A rejected configuration; maps to exit code 2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<crate::Error> for ConfigError {
    fn from(e: crate::Error) -> Self {
        ConfigError(e.to_string())
    }
}

/// Everything that determines the content of a run's reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub space: SpaceSource,
    pub suite: Option<Suite>,
    pub seed: u64,
    pub q: Option<f64>,
    pub p: Option<f64>,
    pub l: Option<f64>,
    pub alpha: Option<f64>,
    pub nu: Option<f64>,
    pub sigma: Option<f64>,
    pub t_min: f64,
    pub t_max: Option<f64>,
    /// Points per octave of the doubling-closed time grid.
    pub t_points: usize,
    pub s_points: usize,
    pub r_max: Option<usize>,
    pub dense_cap: usize,
    pub max_vertices: usize,
    pub corpus_size: usize,
    pub kinds: Option<Vec<Kind>>,
    pub out: Option<String>,
    pub format: Format,
}

impl RunConfig {
    pub fn new(space: SpaceSource) -> Self {
        RunConfig {
            space,
            suite: None,
            seed: 0,
            q: None,
            p: None,
            l: None,
            alpha: None,
            nu: None,
            sigma: None,
            t_min: DEFAULT_T_MIN,
            t_max: None,
            t_points: 1,
            s_points: DEFAULT_S_POINTS,
            r_max: None,
            dense_cap: DEFAULT_DENSE_CAP,
            max_vertices: DEFAULT_MAX_VERTICES,
            corpus_size: DEFAULT_CORPUS_SIZE,
            kinds: None,
            out: None,
            format: Format::Both,
        }
    }

    pub fn builtin(descriptor: &str) -> Self {
        Self::new(SpaceSource::Builtin(descriptor.into()))
    }

    pub fn heat_options(&self) -> HeatOptions {
        HeatOptions {
            dense_cap: self.dense_cap,
            t_min: self.t_min,
            t_max: self.t_max,
            per_octave: self.t_points,
        }
    }

    /// Checks that do not need the space.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError(m));
        for (name, v) in [("q", self.q), ("p", self.p), ("l", self.l)] {
            if let Some(v) = v {
                if !(v >= 1.0) {
                    return bad(format!("--{name} must be >= 1, got {v}"));
                }
            }
        }
        if let Some(a) = self.alpha {
            if !(a < 0.0) {
                return bad(format!("--alpha must be negative, got {a}"));
            }
        }
        for (name, v) in [("nu", self.nu), ("sigma", self.sigma)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("--{name} must be positive, got {v}"));
                }
            }
        }
        if !(self.t_min > 0.0 && self.t_min.is_finite()) {
            return bad(format!("--tmin must be positive, got {}", self.t_min));
        }
        if let Some(t) = self.t_max {
            if !(t > self.t_min && t.is_finite()) {
                return bad(format!("--tmax must exceed --tmin, got {t}"));
            }
        }
        if self.t_points == 0 {
            return bad("--tpoints must be >= 1".into());
        }
        if self.s_points < 2 {
            return bad("--spoints must be >= 2".into());
        }
        if self.corpus_size == 0 {
            return bad("--corpus-size must be >= 1".into());
        }
        if self.dense_cap == 0 {
            return bad("--dense-cap must be >= 1".into());
        }
        if matches!(&self.kinds, Some(k) if k.is_empty()) {
            return bad("--kinds is empty".into());
        }
        if let Some(0) = self.r_max {
            return bad("--rmax must be >= 1".into());
        }
        let (SpaceSource::Builtin(d) | SpaceSource::File(d)) = &self.space;
        if d.is_empty() {
            return bad("empty space spec".into());
        }
        Ok(())
    }

    pub fn build_space(&self) -> Result<Arc<Space>, ConfigError> {
        Ok(Arc::new(self.space.build(self.max_vertices)?))
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Defaults filled in from the space; recorded in the run summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub q: f64,
    pub p: f64,
    pub l: f64,
    pub alpha: f64,
    pub nu: f64,
    pub sigma: f64,
    pub nonlinear_p: f64,
    /// Gradient exponent of the Lorentz chain, which needs `p > q`.
    pub lorentz_p: f64,
    pub r_max: usize,
    pub growth: Option<GrowthFit>,
    pub s_grid: Vec<f64>,
    /// Times in `[1, diameter^2 / 16]` for the on-diagonal kernel fit.
    pub sobolev_t: Vec<f64>,
    /// Times for the Gaussian fit (grid points `t >= 1`).
    pub gaussian_t: Vec<f64>,
    pub kfunc_t: Vec<f64>,
    pub kinds: Vec<Kind>,
}

impl Resolved {
    pub fn new(cfg: &RunConfig, space: &Space, t_grid: &[f64], dense: bool) -> Result<Self, ConfigError> {
        let diam = space.diameter().max(1);
        let r_max = match cfg.r_max {
            Some(r) if r > diam => {
                return Err(ConfigError(format!("--rmax {r} exceeds the diameter {diam}")));
            }
            Some(r) => r,
            None => (diam / 2).clamp(1, DEFAULT_R_MAX_CAP),
        };
        let growth = space.growth_exponent(1, r_max.max(2)).ok();
        let sigma = match (cfg.sigma, &growth) {
            (Some(s), _) => s,
            (None, Some(g)) => g.sigma,
            (None, None) => f64::NAN,
        };
        let q = cfg.q.unwrap_or(1.0);
        let p = cfg.p.unwrap_or(1.0);
        let l = cfg.l.unwrap_or(2.0);
        let alpha = match cfg.alpha {
            Some(a) => a,
            None if p < l => exponents(p, l, None)?.alpha,
            None => -1.0,
        };
        let kinds = match &cfg.kinds {
            Some(k) => k.clone(),
            None if dense => Kind::ALL.to_vec(),
            None => Kind::ALL.into_iter().filter(|k| *k != Kind::Eigenvector).collect(),
        };
        let hi = (diam * diam) as f64 / 16.0;
        let mut sobolev_t: Vec<f64> = t_grid.iter().copied().filter(|&t| t >= 1.0 && t <= hi).collect();
        if sobolev_t.len() < 2 {
            sobolev_t = t_grid.to_vec();
        }
        let mut gaussian_t: Vec<f64> = t_grid.iter().copied().filter(|&t| t >= 1.0).collect();
        if gaussian_t.is_empty() {
            gaussian_t = t_grid.to_vec();
        }
        Ok(Resolved {
            q,
            p,
            l,
            alpha,
            nu: cfg.nu.unwrap_or(sigma),
            sigma,
            nonlinear_p: cfg.p.unwrap_or(2.0),
            lorentz_p: cfg.p.unwrap_or(q + 0.5),
            r_max,
            growth,
            s_grid: s_grid(space, cfg.s_points),
            sobolev_t,
            gaussian_t,
            kfunc_t: spread(t_grid, KFUNC_TIMES),
            kinds,
        })
    }

    /// Parameter checks specific to the suites that will run.
    pub fn validate_for(&self, suites: &[Suite], space: &Space) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError(m));
        let needs = |s: Suite| suites.contains(&s);
        if needs(Suite::Gn) && !(self.p < self.l) {
            return bad(format!("need p < l, got p={}, l={}", self.p, self.l));
        }
        if needs(Suite::Gn) && self.q > self.p {
            return bad(format!("need q <= p, got q={}, p={}", self.q, self.p));
        }
        if (needs(Suite::Sobolev) || needs(Suite::Lorentz)) && !self.sigma.is_finite() {
            return bad("cannot fit a growth exponent on this space; pass --sigma".into());
        }
        if needs(Suite::Sobolev) && !(self.nu > self.q) {
            return bad(format!("need nu > q, got nu={}, q={}", self.nu, self.q));
        }
        if needs(Suite::Lorentz) {
            let p = self.lorentz_p;
            if !(p > self.q && self.sigma > p && p < self.l) {
                return bad(format!(
                    "suite lorentz needs q < p < min(sigma, l), got q={}, p={p}, sigma={}, l={}",
                    self.q, self.sigma, self.l
                ));
            }
        }
        if needs(Suite::Nonlinear) {
            if space.grid().is_none() {
                return bad(format!(
                    "suite nonlinear needs a grid or torus space, got {}",
                    space.label()
                ));
            }
            if !(self.nonlinear_p >= 2.0 && self.nonlinear_p >= self.q) {
                return bad(format!(
                    "suite nonlinear needs p >= max(2, q), got p={}",
                    self.nonlinear_p
                ));
            }
        }
        if needs(Suite::Kfunc) && !(self.q == 1.0 || self.q == 2.0) {
            return bad(format!("suite kfunc supports q in {{1, 2}}, got {}", self.q));
        }
        Ok(())
    }
}

/// `n` entries of `v` spread evenly, endpoints included.
fn spread(v: &[f64], n: usize) -> Vec<f64> {
    if v.len() <= n {
        return v.to_vec();
    }
    (0..n).map(|i| v[i * (v.len() - 1) / (n - 1)]).collect()
}
