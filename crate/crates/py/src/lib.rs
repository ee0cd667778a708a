use std::sync::Arc;

use gnlab_core::cli::suite::report_json;
use gnlab_core::cli::{run_check as core_run_check, RunConfig, RunError, Suite};
use gnlab_core::corpus::{Corpus, Kind, Normalization};
use gnlab_core::funcnorms::{self, BesovMode, GradientMode};
use gnlab_core::heat::HeatOptions;
use gnlab_core::kprime::{KPrimeOptions, KPrimeSolver};
use gnlab_core::mm_space::DEFAULT_MAX_VERTICES;
use gnlab_core::rearrange::StepFunction;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: gnlab_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn run_err(e: RunError) -> PyErr {
    match e {
        RunError::Config(c) => PyValueError::new_err(c.to_string()),
        RunError::Internal(m) => PyRuntimeError::new_err(m),
    }
}

fn check_len(space: &gnlab_core::Space, f: &[f64]) -> PyResult<()> {
    if f.len() != space.len() {
        return Err(PyValueError::new_err(format!(
            "function has {} values, space has {} vertices",
            f.len(),
            space.len()
        )));
    }
    Ok(())
}

/// Finite weighted graph with vertex measure and hop distance.
#[pyclass(frozen)]
struct Space(Arc<gnlab_core::Space>);

#[pymethods]
impl Space {
    /// Builtin descriptor such as `torus:16x16`, `cycle:8`, `tree:6`, `dumbbell:8,16`.
    #[staticmethod]
    #[pyo3(signature = (descriptor, max_vertices = DEFAULT_MAX_VERTICES))]
    fn builtin(descriptor: &str, max_vertices: usize) -> PyResult<Self> {
        Ok(Space(Arc::new(
            gnlab_core::Space::builtin(descriptor, max_vertices).map_err(err)?,
        )))
    }

    /// Graph text with `v <id> <measure>` and `e <a> <b> <weight>` lines.
    #[staticmethod]
    #[pyo3(signature = (text, label = "graph", max_vertices = DEFAULT_MAX_VERTICES))]
    fn parse(text: &str, label: &str, max_vertices: usize) -> PyResult<Self> {
        Ok(Space(Arc::new(
            gnlab_core::Space::parse(text, label, max_vertices).map_err(err)?,
        )))
    }

    #[staticmethod]
    #[pyo3(signature = (path, max_vertices = DEFAULT_MAX_VERTICES))]
    fn from_file(path: &str, max_vertices: usize) -> PyResult<Self> {
        Ok(Space(Arc::new(
            gnlab_core::Space::from_file(path, max_vertices).map_err(err)?,
        )))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Space({:?}, n={}, diameter={})",
            self.0.label(),
            self.0.len(),
            self.0.diameter()
        )
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label().to_string()
    }

    #[getter]
    fn ids(&self) -> Vec<String> {
        self.0.ids().to_vec()
    }

    #[getter]
    fn measure(&self) -> Vec<f64> {
        self.0.measure().to_vec()
    }

    #[getter]
    fn diameter(&self) -> usize {
        self.0.diameter()
    }

    #[getter]
    fn total_measure(&self) -> f64 {
        self.0.total_measure()
    }

    /// Edges as `(a, b, weight)` index triples.
    #[getter]
    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.0.edges().iter().map(|e| (e.a, e.b, e.weight)).collect()
    }

    fn dist(&self, x: usize, y: usize) -> PyResult<usize> {
        if x >= self.0.len() || y >= self.0.len() {
            return Err(PyValueError::new_err("vertex index out of range"));
        }
        Ok(self.0.dist(x, y))
    }

    fn ball_measure(&self, x: usize, r: usize) -> PyResult<f64> {
        if x >= self.0.len() {
            return Err(PyValueError::new_err("vertex index out of range"));
        }
        Ok(self.0.balls().measure(x, r.min(self.0.diameter())))
    }

    /// `(constant, vertex, radius, per_radius)`.
    fn doubling_constant(&self, r_max: usize) -> PyResult<(f64, usize, usize, Vec<f64>)> {
        let d = self.0.doubling_constant(r_max).map_err(err)?;
        Ok((d.constant, d.vertex, d.radius, d.per_radius))
    }

    /// `(sigma, c, residual)` of `inf_x mu(B(x, r)) ~ c r^sigma`.
    fn growth_exponent(&self, r_lo: usize, r_hi: usize) -> PyResult<(f64, f64, f64)> {
        let g = self.0.growth_exponent(r_lo, r_hi).map_err(err)?;
        Ok((g.sigma, g.c, g.residual))
    }
}

/// Heat semigroup `P_t = exp(t Delta)` on a space.
#[pyclass(frozen)]
struct Semigroup(gnlab_core::Semigroup);

#[pymethods]
impl Semigroup {
    #[new]
    #[pyo3(signature = (space, t_min = gnlab_core::heat::DEFAULT_T_MIN, t_max = None, per_octave = 1, dense_cap = gnlab_core::heat::DEFAULT_DENSE_CAP))]
    fn new(space: &Space, t_min: f64, t_max: Option<f64>, per_octave: usize, dense_cap: usize) -> PyResult<Self> {
        let opts = HeatOptions {
            dense_cap,
            t_min,
            t_max,
            per_octave,
        };
        Ok(Semigroup(
            gnlab_core::Semigroup::new(space.0.clone(), &opts).map_err(err)?,
        ))
    }

    #[getter]
    fn t_grid(&self) -> Vec<f64> {
        self.0.t_grid().to_vec()
    }

    #[getter]
    fn is_dense(&self) -> bool {
        self.0.is_dense()
    }

    #[getter]
    fn space(&self) -> Space {
        Space(self.0.space_arc().clone())
    }

    fn apply(&self, f: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        check_len(self.0.space(), &f)?;
        self.0.apply(&f, t).map_err(err)
    }

    /// Dense kernel `p_t(x, y)` as a list of rows.
    fn heat_kernel(&self, t: f64) -> PyResult<Vec<Vec<f64>>> {
        let k = self.0.heat_kernel(t).map_err(err)?;
        Ok((0..k.len()).map(|x| k.row(x).to_vec()).collect())
    }

    fn max_kernel(&self, t: f64) -> PyResult<f64> {
        self.0.max_kernel(t).map_err(err)
    }

    fn spectral_gap(&self) -> PyResult<f64> {
        self.0.spectral_gap().map_err(err)
    }
}

/// Decreasing rearrangement of `|values|`: `(ends, levels)` of the step function.
#[pyfunction]
fn rearrange(values: Vec<f64>, measure: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    if values.len() != measure.len() {
        return Err(PyValueError::new_err("values and measure differ in length"));
    }
    let sf = StepFunction::rearrange(&values, &measure);
    Ok((sf.ends().to_vec(), sf.values().to_vec()))
}

/// `||f||_p` with respect to the vertex measure; `p = inf` for the sup norm.
#[pyfunction]
fn lp_norm(space: &Space, f: Vec<f64>, p: f64) -> PyResult<f64> {
    check_len(&space.0, &f)?;
    Ok(funcnorms::lp_norm(&space.0, &f, p))
}

/// `|grad f|` per vertex; `mode` is `l2` or `max`.
#[pyfunction]
#[pyo3(signature = (space, f, mode = "l2"))]
fn gradient(space: &Space, f: Vec<f64>, mode: &str) -> PyResult<Vec<f64>> {
    check_len(&space.0, &f)?;
    let mode = match mode {
        "l2" => GradientMode::L2,
        "max" => GradientMode::Max,
        _ => return Err(PyValueError::new_err(format!("unknown gradient mode `{mode}`"))),
    };
    Ok(funcnorms::gradient_modulus(&space.0, &f, mode))
}

/// `(value, maximizing t)` of the Besov norm of order `alpha < 0`; `mode` is
/// `seminorm` or `raw`.
#[pyfunction]
#[pyo3(signature = (sg, f, alpha, mode = "seminorm"))]
fn besov_norm(sg: &Semigroup, f: Vec<f64>, alpha: f64, mode: &str) -> PyResult<(f64, f64)> {
    check_len(sg.0.space(), &f)?;
    let mode = match mode {
        "seminorm" => BesovMode::Seminorm,
        "raw" => BesovMode::Raw,
        _ => return Err(PyValueError::new_err(format!("unknown Besov mode `{mode}`"))),
    };
    funcnorms::besov_norm(&sg.0, &f, alpha, mode).map_err(err)
}

/// `(value, lower)` of `K'(f, t^{1/q})` for `q` in {1, 2}.
#[pyfunction]
fn kprime(space: &Space, f: Vec<f64>, q: f64, t: f64) -> PyResult<(f64, f64)> {
    check_len(&space.0, &f)?;
    let mut solver = KPrimeSolver::new(&space.0, &f, q, KPrimeOptions::default()).map_err(err)?;
    let r = solver.value(t).map_err(err)?;
    Ok((r.value, r.lower))
}

/// `(theta, alpha)` for the pair `(p, l)`.
#[pyfunction]
fn exponents(p: f64, l: f64) -> PyResult<(f64, f64)> {
    let e = gnlab_core::ineq::exponents(p, l, None).map_err(err)?;
    Ok((e.theta, e.alpha))
}

/// Seeded mean-zero, sup-normalized test functions as `(id, values)` pairs.
#[pyfunction]
#[pyo3(signature = (sg, seed = 0, n = 30, kinds = None))]
fn corpus(sg: &Semigroup, seed: u64, n: usize, kinds: Option<&str>) -> PyResult<Vec<(String, Vec<f64>)>> {
    let kinds = match kinds {
        Some(k) => Kind::parse_list(k).map_err(err)?,
        None => Kind::ALL.to_vec(),
    };
    let c = Corpus::generate(&sg.0, seed, n, &kinds, Normalization::default()).map_err(err)?;
    Ok(c.functions.into_iter().map(|f| (f.id, f.values)).collect())
}

/// Runs a checker suite and returns the report JSON texts.
#[pyfunction]
#[pyo3(signature = (space, suite, seed = 0, corpus_size = 30, q = None, p = None, l = None, alpha = None, nu = None, sigma = None, jobs = 1))]
#[allow(clippy::too_many_arguments)]
fn run_check(
    space: &str,
    suite: &str,
    seed: u64,
    corpus_size: usize,
    q: Option<f64>,
    p: Option<f64>,
    l: Option<f64>,
    alpha: Option<f64>,
    nu: Option<f64>,
    sigma: Option<f64>,
    jobs: usize,
) -> PyResult<Vec<String>> {
    let mut cfg = RunConfig::builtin(space);
    cfg.suite = Some(
        suite
            .parse::<Suite>()
            .map_err(|e| PyValueError::new_err(e.to_string()))?,
    );
    cfg.seed = seed;
    cfg.corpus_size = corpus_size;
    (cfg.q, cfg.p, cfg.l, cfg.alpha, cfg.nu, cfg.sigma) = (q, p, l, alpha, nu, sigma);
    let out = core_run_check(&cfg, jobs.max(1)).map_err(run_err)?;
    if let Some((k, e)) = out.failed.first() {
        return Err(PyRuntimeError::new_err(format!("{k}: {e}")));
    }
    Ok(out.reports.iter().map(|r| report_json(r, &cfg)).collect())
}

#[pymodule]
fn gnlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Space>()?;
    m.add_class::<Semigroup>()?;
    m.add_function(wrap_pyfunction!(rearrange, m)?)?;
    m.add_function(wrap_pyfunction!(lp_norm, m)?)?;
    m.add_function(wrap_pyfunction!(gradient, m)?)?;
    m.add_function(wrap_pyfunction!(besov_norm, m)?)?;
    m.add_function(wrap_pyfunction!(kprime, m)?)?;
    m.add_function(wrap_pyfunction!(exponents, m)?)?;
    m.add_function(wrap_pyfunction!(corpus, m)?)?;
    m.add_function(wrap_pyfunction!(run_check, m)?)?;
    Ok(())
}
