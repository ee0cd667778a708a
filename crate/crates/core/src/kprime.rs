//! Two-sided evaluation of the K-functional between the homogeneous Sobolev
//! spaces of exponents `q` and infinity, with the max-aggregated gradient.
//!
//! All values are `K'(f, t^{1/q}) = inf_{f = h + g} ||grad h||_q + t^{1/q} ||grad g||_inf`,
//! the parametrization matched by [`kprime_lower`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::funcnorms::{gradient_modulus, lp_norm, GradientMode};
use crate::mm_space::Space;
use crate::rearrange::StepFunction;

const MODE: GradientMode = GradientMode::Max;
const CHECK_EVERY: usize = 25;
const MIN_ITER: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct KPrimeOptions {
    /// Logarithmic points in `[ratio * top, top]`; `lambda = 0` is always added.
    pub lambda_points: usize,
    pub lambda_ratio: f64,
    pub max_iter: usize,
    /// Relative primal decrease that stops an inner solve.
    pub tol: f64,
    /// Golden-section evaluations around the best grid point, per time.
    pub refine_steps: usize,
}

impl Default for KPrimeOptions {
    fn default() -> Self {
        KPrimeOptions {
            lambda_points: 32,
            lambda_ratio: 1e-3,
            max_iter: 10_000,
            tol: 1e-8,
            refine_steps: 8,
        }
    }
}

/// `f = h + g` with its cost terms.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub h: Vec<f64>,
    pub g: Vec<f64>,
    /// `||grad h||_q`
    pub grad_h: f64,
    /// `||grad g||_inf`
    pub grad_g: f64,
    /// `grad_h + t^{1/q} grad_g`
    pub value: f64,
}

fn weight(q: f64, t: f64) -> f64 {
    t.powf(1.0 / q)
}

fn check_qt(q: f64, t: f64) -> Result<()> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::InvalidArgument(format!("q = {q} must be finite and >= 1")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("t = {t} must be positive")));
    }
    Ok(())
}

/// `t^{1/q} (|grad f|^{q**})^{1/q}(t) = (int_0^t (|grad f|^*)^q)^{1/q}`.
pub fn kprime_lower(space: &Space, f: &[f64], q: f64, t: f64) -> Result<f64> {
    check_qt(q, t)?;
    let g = gradient_modulus(space, f, MODE);
    let sf = StepFunction::rearrange(&g, space.measure());
    Ok(sf.integral_pow(t, q).powf(1.0 / q))
}

/// `max_{y~x} |f(y) - f(x)|`, the Lipschitz constant for the hop metric.
pub fn lipschitz_constant(space: &Space, f: &[f64]) -> f64 {
    space
        .edges()
        .iter()
        .map(|e| (f[e.b] - f[e.a]).abs())
        .fold(0.0, f64::max)
}

fn grad_inf(space: &Space, g: &[f64]) -> f64 {
    space
        .edges()
        .iter()
        .map(|e| e.weight.sqrt() * (g[e.b] - g[e.a]).abs())
        .fold(0.0, f64::max)
}

fn grad_q(space: &Space, h: &[f64], q: f64) -> f64 {
    lp_norm(space, &gradient_modulus(space, h, MODE), q)
}

/// `(||grad (f - g)||_q, ||grad g||_inf)`.
pub fn cost_pair(space: &Space, f: &[f64], g: &[f64], q: f64) -> (f64, f64) {
    let h: Vec<f64> = f.iter().zip(g).map(|(a, b)| a - b).collect();
    (grad_q(space, &h, q), grad_inf(space, g))
}

/// Midpoint of the inf- and sup-convolutions of `f` with `lambda * d`.
pub fn lipschitz_envelope(space: &Space, f: &[f64], lambda: f64) -> Vec<f64> {
    let n = space.len();
    (0..n)
        .map(|x| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (y, &fy) in f.iter().enumerate() {
                let d = lambda * space.dist(x, y) as f64;
                lo = lo.min(fy + d);
                hi = hi.max(fy - d);
            }
            0.5 * (lo + hi)
        })
        .collect()
}

pub fn lipschitz_envelope_decomposition(
    space: &Space,
    f: &[f64],
    lambda: f64,
    q: f64,
    t: f64,
) -> Result<Decomposition> {
    check_qt(q, t)?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be >= 0")));
    }
    let g = lipschitz_envelope(space, f, lambda);
    let h: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a - b).collect();
    let grad_h = grad_q(space, &h, q);
    let grad_g = grad_inf(space, &g);
    Ok(Decomposition {
        value: grad_h + weight(q, t) * grad_g,
        h,
        g,
        grad_h,
        grad_g,
    })
}

/// `{0} u {top * ratio^{1 - i/(points-1)}}`.
pub fn lambda_grid(top: f64, points: usize, ratio: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    if top > 0.0 && points > 0 {
        if points == 1 {
            out.push(top);
        } else {
            let span = ratio.ln();
            for i in 0..points {
                let s = 1.0 - i as f64 / (points - 1) as f64;
                out.push(top * (span * s).exp());
            }
        }
    }
    out
}

/// Best envelope decomposition over `lambda_grid`; returns `(value, lambda)`.
pub fn kprime_upper(space: &Space, f: &[f64], q: f64, t: f64, lambda_grid: &[f64]) -> Result<(f64, f64)> {
    check_qt(q, t)?;
    if lambda_grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    let mut best = (f64::INFINITY, lambda_grid[0]);
    for &l in lambda_grid {
        let d = lipschitz_envelope_decomposition(space, f, l, q, t)?;
        if d.value < best.0 {
            best = (d.value, l);
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Trivial,
    Envelope,
    Solver,
}

/// A feasible decomposition summarized by its two cost terms.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Candidate {
    pub lambda: f64,
    pub grad_h: f64,
    pub grad_g: f64,
    pub source: Source,
}

impl Candidate {
    fn value(&self, s: f64) -> f64 {
        self.grad_h + s * self.grad_g
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveResult {
    pub value: f64,
    pub lower: f64,
    pub gap: f64,
    pub lambda: f64,
    pub source: Source,
    pub converged: bool,
}

/// Edge incidence for the splitting; slot `2e` belongs to the first
/// endpoint of edge `e` and slot `2e + 1` to the second.
struct Incidence {
    a: Vec<usize>,
    b: Vec<usize>,
    s: Vec<f64>,
    // CSR layout of the slots around each vertex
    start: Vec<usize>,
    slot: Vec<usize>,
    mu: Vec<f64>,
}

impl Incidence {
    fn new(space: &Space) -> Self {
        let m = space.edges().len();
        let n = space.len();
        let mut lists = vec![Vec::new(); n];
        let (mut a, mut b, mut s) = (Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m));
        for (e, edge) in space.edges().iter().enumerate() {
            a.push(edge.a);
            b.push(edge.b);
            s.push(edge.weight.sqrt());
            lists[edge.a].push(2 * e);
            lists[edge.b].push(2 * e + 1);
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut slot = Vec::with_capacity(2 * m);
        start.push(0);
        for l in lists {
            slot.extend(l);
            start.push(slot.len());
        }
        Incidence {
            a,
            b,
            s,
            start,
            slot,
            mu: space.measure().to_vec(),
        }
    }

    fn slots(&self, x: usize) -> &[usize] {
        &self.slot[self.start[x]..self.start[x + 1]]
    }

    fn diff(&self, h: &[f64], e: usize) -> f64 {
        self.s[e] * (h[self.b[e]] - h[self.a[e]])
    }

    /// `max_x sum_{y~x} w_xy`.
    fn max_weighted_degree(&self) -> f64 {
        (0..self.mu.len())
            .map(|x| self.slots(x).iter().map(|&k| self.s[k / 2].powi(2)).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Warm-start state of the primal-dual iteration.
#[derive(Clone, Debug)]
struct State {
    h: Vec<f64>,
    ya: Vec<f64>,
    yd: Vec<f64>,
}

/// Euclidean projection onto `{ |y|_1 <= r }`, in place.
fn project_l1(v: &mut [f64], r: f64, scratch: &mut Vec<f64>) {
    let norm: f64 = v.iter().map(|x| x.abs()).sum();
    if norm <= r {
        return;
    }
    scratch.clear();
    scratch.extend(v.iter().map(|x| x.abs()));
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (k, &u) in scratch.iter().enumerate() {
        acc += u;
        let cand = (acc - r) / (k + 1) as f64;
        if u > cand {
            theta = cand;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        *x = x.signum() * (x.abs() - theta).max(0.0);
    }
}

/// `argmin_y |y - v|^2/2 + c |y|_1^2 / 2`, in place.
fn shrink_l1_squared(v: &mut [f64], c: f64, scratch: &mut Vec<f64>) {
    scratch.clear();
    scratch.extend(v.iter().map(|x| x.abs()));
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut kappa = 0.0;
    for (k, &u) in scratch.iter().enumerate() {
        acc += u;
        let cand = c * acc / (1.0 + c * (k + 1) as f64);
        if u > cand {
            kappa = cand;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        *x = x.signum() * (x.abs() - kappa).max(0.0);
    }
}

/// Inner problem: `min ||grad h||_q` (squared for `q = 2`) subject to
/// `|sqrt(w_e) (g(b) - g(a))| <= lambda` with `g = f - h`, by the
/// Chambolle-Pock primal-dual iteration. Stops once the mean primal
/// decrease per iteration falls below `tol` (relative) with the box
/// violated by at most `1e-6 lambda`.
fn inner_solve(
    inc: &Incidence,
    f: &[f64],
    q: f64,
    lambda: f64,
    warm: &State,
    opts: &KPrimeOptions,
) -> (State, bool, usize) {
    let m = inc.a.len();
    let n = f.len();
    let centers: Vec<f64> = (0..m).map(|e| inc.diff(f, e)).collect();
    let l = (6.0 * inc.max_weighted_degree()).sqrt().max(1e-300);
    let tau = 0.99 / l;
    let sigma = 0.99 / l;
    let mut st = warm.clone();
    let mut hbar = st.h.clone();
    let mut buf = Vec::new();
    let mut scratch = Vec::new();
    let mut last = f64::INFINITY;
    let mut converged = false;
    let mut iters = opts.max_iter;
    for it in 1..=opts.max_iter {
        for e in 0..m {
            let sd = sigma * inc.diff(&hbar, e);
            st.ya[2 * e] += sd;
            st.ya[2 * e + 1] += sd;
            let v = st.yd[e] + sd;
            let c = centers[e];
            st.yd[e] = v - sigma * (v / sigma).clamp(c - lambda, c + lambda);
        }
        for x in 0..n {
            let sl = inc.slots(x);
            if sl.is_empty() {
                continue;
            }
            buf.clear();
            buf.extend(sl.iter().map(|&k| st.ya[k]));
            if q == 1.0 {
                project_l1(&mut buf, inc.mu[x], &mut scratch);
            } else {
                shrink_l1_squared(&mut buf, sigma / (2.0 * inc.mu[x]), &mut scratch);
            }
            for (&k, &v) in sl.iter().zip(&buf) {
                st.ya[k] = v;
            }
        }
        hbar.copy_from_slice(&st.h);
        for e in 0..m {
            let c = tau * inc.s[e] * (st.ya[2 * e] + st.ya[2 * e + 1] + st.yd[e]);
            st.h[inc.a[e]] += c;
            st.h[inc.b[e]] -= c;
        }
        for (hb, h) in hbar.iter_mut().zip(&st.h) {
            *hb = 2.0 * h - *hb;
        }
        if it % CHECK_EVERY == 0 && it >= MIN_ITER {
            let obj = objective(inc, &st.h, q);
            let viol = (0..m)
                .map(|e| (inc.diff(&st.h, e) - centers[e]).abs() - lambda)
                .fold(0.0, f64::max);
            if (last - obj).abs() <= opts.tol * CHECK_EVERY as f64 * obj.max(1e-300) && viol <= 1e-6 * lambda {
                converged = true;
                iters = it;
                break;
            }
            last = obj;
        }
    }
    (st, converged, iters)
}

fn objective(inc: &Incidence, h: &[f64], q: f64) -> f64 {
    (0..inc.mu.len())
        .map(|x| {
            let g = inc
                .slots(x)
                .iter()
                .map(|&k| inc.diff(h, k / 2).abs())
                .fold(0.0, f64::max);
            inc.mu[x] * g.powf(q)
        })
        .sum::<f64>()
        .powf(1.0 / q)
}

/// Lambda sweep for one function, reusable across times.
///
/// Trivial and envelope candidates are built eagerly; the primal-dual
/// sweep runs only once some time leaves a gap to the lower bound.
pub struct KPrimeSolver<'a> {
    space: &'a Space,
    f: Vec<f64>,
    // inner solves run on f / scale so that results are scale-equivariant
    scale: f64,
    unit: Vec<f64>,
    q: f64,
    opts: KPrimeOptions,
    inc: Incidence,
    candidates: Vec<Candidate>,
    states: BTreeMap<u64, State>,
    swept: bool,
    all_converged: bool,
    solves: usize,
    iterations: usize,
}

impl<'a> KPrimeSolver<'a> {
    pub fn new(space: &'a Space, f: &[f64], q: f64, opts: KPrimeOptions) -> Result<Self> {
        if q != 1.0 && q != 2.0 {
            return Err(Error::InvalidArgument(format!(
                "convex solver needs q in {{1, 2}}, got {q}"
            )));
        }
        if f.len() != space.len() {
            return Err(Error::InvalidArgument(
                "function length differs from vertex count".into(),
            ));
        }
        let top = grad_inf(space, f);
        let scale = if top > 0.0 { top } else { 1.0 };
        let mut s = KPrimeSolver {
            space,
            f: f.to_vec(),
            scale,
            unit: f.iter().map(|v| v / scale).collect(),
            q,
            opts,
            inc: Incidence::new(space),
            candidates: Vec::new(),
            states: BTreeMap::new(),
            swept: false,
            all_converged: true,
            solves: 0,
            iterations: 0,
        };
        let zero = vec![0.0; f.len()];
        for (g, lambda) in [(&zero, 0.0), (&s.f.clone(), top)] {
            let (gh, gg) = cost_pair(space, f, g, q);
            s.candidates.push(Candidate {
                lambda,
                grad_h: gh,
                grad_g: gg,
                source: Source::Trivial,
            });
        }
        s.add_envelopes();
        Ok(s)
    }

    fn add_envelopes(&mut self) {
        let lip = lipschitz_constant(self.space, &self.f);
        for l in lambda_grid(lip, self.opts.lambda_points, self.opts.lambda_ratio) {
            if self
                .candidates
                .iter()
                .any(|c| c.source == Source::Envelope && c.lambda == l)
            {
                continue;
            }
            let g = lipschitz_envelope(self.space, &self.f, l);
            let (gh, gg) = cost_pair(self.space, &self.f, &g, self.q);
            self.candidates.push(Candidate {
                lambda: l,
                grad_h: gh,
                grad_g: gg,
                source: Source::Envelope,
            });
        }
    }

    /// Solves every grid point, descending so each solve warm-starts nearby.
    fn sweep(&mut self) {
        let top = grad_inf(self.space, &self.f);
        let mut grid = lambda_grid(top, self.opts.lambda_points, self.opts.lambda_ratio);
        grid.retain(|&l| l > 0.0 && l < top);
        for &l in grid.iter().rev() {
            self.solve_at(l);
        }
        self.swept = true;
    }

    /// Switches to a denser lambda grid, keeping every candidate found so far.
    pub fn refine_grid(&mut self, lambda_points: usize) {
        self.opts.lambda_points = lambda_points;
        self.add_envelopes();
        if self.swept {
            self.sweep();
        }
    }

    /// Solves the inner problem at `lambda` (cached).
    fn solve_at(&mut self, lambda: f64) -> Candidate {
        let key = lambda.to_bits();
        if self.states.contains_key(&key) {
            return *self
                .candidates
                .iter()
                .find(|c| c.source == Source::Solver && c.lambda == lambda)
                .expect("cached candidate");
        }
        let warm = self
            .states
            .iter()
            .min_by(|a, b| {
                let da = (f64::from_bits(*a.0) - lambda).abs();
                let db = (f64::from_bits(*b.0) - lambda).abs();
                da.total_cmp(&db)
            })
            .map(|(_, s)| s.clone())
            .unwrap_or_else(|| State {
                h: vec![0.0; self.f.len()],
                ya: vec![0.0; 2 * self.inc.a.len()],
                yd: vec![0.0; self.inc.a.len()],
            });
        let (st, ok, its) = inner_solve(&self.inc, &self.unit, self.q, lambda / self.scale, &warm, &self.opts);
        self.all_converged &= ok;
        self.solves += 1;
        self.iterations += its;
        let g: Vec<f64> = self.f.iter().zip(&st.h).map(|(a, b)| a - self.scale * b).collect();
        let (gh, gg) = cost_pair(self.space, &self.f, &g, self.q);
        let c = Candidate {
            lambda,
            grad_h: gh,
            grad_g: gg,
            source: Source::Solver,
        };
        self.candidates.push(c);
        self.states.insert(key, st);
        c
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    /// False once any inner solve hit the iteration cap.
    pub fn converged(&self) -> bool {
        self.all_converged
    }

    /// `(inner solves, total iterations)`.
    pub fn work(&self) -> (usize, usize) {
        (self.solves, self.iterations)
    }

    fn best(&self, s: f64) -> Candidate {
        *self
            .candidates
            .iter()
            .min_by(|a, b| a.value(s).total_cmp(&b.value(s)))
            .expect("candidates")
    }

    /// `K'(f, t^{1/q})` upper bound with golden-section refinement in `lambda`.
    pub fn value(&mut self, t: f64) -> Result<SolveResult> {
        check_qt(self.q, t)?;
        let s = weight(self.q, t);
        let lower = kprime_lower(self.space, &self.f, self.q, t)?;
        let top = grad_inf(self.space, &self.f);
        // a candidate meeting the lower bound is optimal already
        if top > 0.0 && self.best(s).value(s) > lower * (1.0 + 1e-12) {
            if !self.swept {
                self.sweep();
            }
            self.golden(s);
        }
        let best = self.best(s);
        let value = best.value(s);
        Ok(SolveResult {
            value,
            lower,
            gap: value - lower,
            lambda: best.lambda,
            source: best.source,
            converged: self.all_converged,
        })
    }

    fn golden(&mut self, s: f64) {
        if self.opts.refine_steps == 0 {
            return;
        }
        let mut pts: Vec<(f64, f64)> = self
            .candidates
            .iter()
            .filter(|c| c.source != Source::Envelope)
            .map(|c| (c.lambda, c.value(s)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pts.dedup_by(|a, b| a.0 == b.0);
        let j = pts
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .map(|p| p.0)
            .unwrap_or(0);
        let mut lo = pts[j.saturating_sub(1)].0;
        let mut hi = pts[(j + 1).min(pts.len() - 1)].0;
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let eval = |me: &mut Self, l: f64| {
            if l > 0.0 {
                me.solve_at(l).value(s)
            } else {
                f64::INFINITY
            }
        };
        let mut x1 = hi - r * (hi - lo);
        let mut x2 = lo + r * (hi - lo);
        let mut f1 = eval(self, x1);
        let mut f2 = eval(self, x2);
        for _ in 2..self.opts.refine_steps {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - r * (hi - lo);
                f1 = eval(self, x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + r * (hi - lo);
                f2 = eval(self, x2);
            }
        }
    }
}

/// One-shot convex solve of `K'(f, t^{1/q})` for `q` in `{1, 2}`.
pub fn kprime_convex_solve(space: &Space, f: &[f64], q: f64, t: f64) -> Result<SolveResult> {
    check_qt(q, t)?;
    KPrimeSolver::new(space, f, q, KPrimeOptions::default())?.value(t)
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceRow {
    pub f_id: String,
    pub t: f64,
    pub lower: f64,
    pub solver: f64,
    pub upper: f64,
    pub ratio: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub q: f64,
    pub rows: Vec<EquivalenceRow>,
    pub n_skipped: usize,
    pub min_ratio: f64,
    pub median_ratio: f64,
    pub max_ratio: f64,
}

impl EquivalenceReport {
    /// CSV rows `f_id,t,lower,solver,upper,ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("f_id,t,lower,solver,upper,ratio\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.f_id, r.t, r.lower, r.solver, r.upper, r.ratio
            );
        }
        out
    }
}

/// Solver-to-lower ratios for every `(f, t)`; constant functions are skipped.
pub fn equivalence_report(
    space: &Space,
    corpus: &[(String, Vec<f64>)],
    q: f64,
    t_grid: &[f64],
    opts: &KPrimeOptions,
) -> Result<EquivalenceReport> {
    let mut rows = Vec::new();
    let mut skipped = 0;
    for (id, f) in corpus {
        if grad_inf(space, f) == 0.0 {
            skipped += t_grid.len();
            continue;
        }
        let mut solver = KPrimeSolver::new(space, f, q, opts.clone())?;
        let env = lambda_grid(lipschitz_constant(space, f), opts.lambda_points, opts.lambda_ratio);
        for &t in t_grid {
            let r = solver.value(t)?;
            let (upper, _) = kprime_upper(space, f, q, t, &env)?;
            let ratio = r.value / r.lower;
            if ratio < 1.0 - 1e-6 {
                return Err(Error::InvalidArgument(format!(
                    "solver value {} below lower bound {} for {id} at t={t}",
                    r.value, r.lower
                )));
            }
            rows.push(EquivalenceRow {
                f_id: id.clone(),
                t,
                lower: r.lower,
                solver: r.value,
                upper,
                ratio,
                converged: r.converged,
            });
        }
    }
    let mut ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let (min_ratio, median_ratio, max_ratio) = if ratios.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (ratios[0], ratios[ratios.len() / 2], ratios[ratios.len() - 1])
    };
    Ok(EquivalenceReport {
        q,
        rows,
        n_skipped: skipped,
        min_ratio,
        median_ratio,
        max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const F: [f64; 3] = [3.0, 1.0, 2.0];

    fn p3() -> Space {
        Space::builtin("grid:3", 10).unwrap()
    }

    fn k2() -> Space {
        Space::builtin("grid:2", 10).unwrap()
    }

    #[test]
    fn lower_examples() {
        let s = p3();
        assert_eq!(kprime_lower(&s, &F, 1.0, 2.0).unwrap(), 4.0);
        assert_eq!(kprime_lower(&s, &[5.0; 3], 1.0, 2.0).unwrap(), 0.0);
        assert_eq!(kprime_lower(&s, &F, 2.0, 1.0).unwrap(), 2.0);
        assert!(kprime_lower(&s, &F, 1.0, 0.0).is_err());
    }

    /// Brute-force envelope over all vertices.
    fn envelope_oracle(s: &Space, f: &[f64], l: f64) -> Vec<f64> {
        let n = s.len();
        (0..n)
            .map(|x| {
                let lo = (0..n)
                    .map(|y| f[y] + l * s.dist(x, y) as f64)
                    .fold(f64::INFINITY, f64::min);
                let hi = (0..n)
                    .map(|y| f[y] - l * s.dist(x, y) as f64)
                    .fold(f64::NEG_INFINITY, f64::max);
                (lo + hi) / 2.0
            })
            .collect()
    }

    #[test]
    fn envelope_examples() {
        let s = p3();
        // g- = (2, 1, 2), g+ = (3, 2, 2)
        assert_eq!(lipschitz_envelope(&s, &F, 1.0), vec![2.5, 1.5, 2.0]);
        assert_eq!(lipschitz_envelope(&s, &F, 1.0), envelope_oracle(&s, &F, 1.0));
        let d = lipschitz_envelope_decomposition(&s, &F, 2.0, 1.0, 0.5).unwrap();
        assert_eq!(d.g, F.to_vec());
        assert_eq!(d.value, 0.5 * 2.0);
        let d = lipschitz_envelope_decomposition(&s, &F, 0.0, 1.0, 0.5).unwrap();
        assert_eq!(d.g, vec![2.0; 3]);
        assert_eq!(d.value, 5.0);
        for (a, b) in d.h.iter().zip(&d.g).zip(&F).map(|((h, g), f)| (h + g, *f)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn upper_k2_enumeration() {
        let s = k2();
        let f = [1.0, 0.0];
        for t in [0.2, 0.5, 2.0] {
            // g = envelope at lambda: slope min(lambda, 1) centered at 1/2
            let want = [0.0, 0.5, 1.0]
                .iter()
                .map(|&l: &f64| 2.0 * (1.0 - l.min(1.0)) + t * l.min(1.0))
                .fold(f64::INFINITY, f64::min);
            let (v, _) = kprime_upper(&s, &f, 1.0, t, &[0.0, 0.5, 1.0]).unwrap();
            assert!((v - want).abs() < 1e-14);
        }
        assert_eq!(kprime_upper(&s, &[4.0, 4.0], 1.0, 1.0, &[0.0]).unwrap().0, 0.0);
        assert!(kprime_upper(&s, &f, 1.0, 1.0, &[]).is_err());
        let coarse = kprime_upper(&p3(), &F, 1.0, 1.5, &[0.0, 1.0]).unwrap().0;
        let fine = kprime_upper(&p3(), &F, 1.0, 1.5, &[0.0, 0.5, 1.0, 1.5]).unwrap().0;
        assert!(fine <= coarse);
    }

    /// `min_{a,b}` over a pitch-1e-3 grid of `g = (a, b)` on K2; `g` shifts by constants freely.
    #[test]
    fn solver_matches_k2_grid_search() {
        let s = k2();
        let f = [1.0, 0.0];
        for q in [1.0, 2.0] {
            let t = 1.0;
            let mut best = f64::INFINITY;
            for i in 0..=3000 {
                let b = -1.5 + i as f64 * 1e-3;
                let g = [0.0, b];
                let (gh, gg) = cost_pair(&s, &f, &g, q);
                best = best.min(gh + weight(q, t) * gg);
            }
            let r = kprime_convex_solve(&s, &f, q, t).unwrap();
            assert!((r.value - best).abs() < 1e-4, "q={q} {} {best}", r.value);
            assert!(r.gap >= -1e-12);
        }
        assert_eq!(kprime_convex_solve(&s, &[2.0, 2.0], 1.0, 1.0).unwrap().value, 0.0);
        assert!(kprime_convex_solve(&s, &f, 3.0, 1.0).is_err());
    }

    #[test]
    fn prox_operators() {
        let mut v = vec![3.0, -1.0, 0.5];
        let mut sc = Vec::new();
        project_l1(&mut v, 2.0, &mut sc);
        assert!((v.iter().map(|x| x.abs()).sum::<f64>() - 2.0).abs() < 1e-15);
        assert_eq!(v, vec![2.0, 0.0, 0.0]);
        // c = 1, v = (3, 1): kappa = 2 from k = 1; y = (1, 0), then y_1 = 3 - |y|_1 = 2? check stationarity
        let mut w = vec![3.0, 1.0];
        shrink_l1_squared(&mut w, 1.0, &mut sc);
        let n1: f64 = w.iter().map(|x| x.abs()).sum();
        for (wi, vi) in w.iter().zip([3.0, 1.0]) {
            if *wi != 0.0 {
                assert!((wi - (vi - n1)).abs() < 1e-15);
            } else {
                assert!(vi <= n1 + 1e-15);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn sandwich_and_scaling(vals in proptest::collection::vec(-2.0f64..2.0, 9), t in 0.3f64..6.0, q in 1usize..3) {
            let s = Space::builtin("grid:3x3", 100).unwrap();
            let q = q as f64;
            let opts = KPrimeOptions::default();
            let mut solver = KPrimeSolver::new(&s, &vals, q, opts.clone()).unwrap();
            let r = solver.value(t).unwrap();
            let env = lambda_grid(lipschitz_constant(&s, &vals), opts.lambda_points, opts.lambda_ratio);
            let (up, _) = kprime_upper(&s, &vals, q, t, &env).unwrap();
            prop_assert!(r.lower <= r.value + 1e-9);
            prop_assert!(r.value <= up + 1e-12);
            let scaled: Vec<f64> = vals.iter().map(|v| 3.0 * v).collect();
            let r3 = KPrimeSolver::new(&s, &scaled, q, opts.clone()).unwrap().value(t).unwrap();
            prop_assert!((r3.lower - 3.0 * r.lower).abs() <= 1e-8 * (1.0 + r3.lower));
            let (up3, _) = kprime_upper(&s, &scaled, q, t, &env.iter().map(|l| 3.0 * l).collect::<Vec<_>>()).unwrap();
            prop_assert!((up3 - 3.0 * up).abs() <= 1e-8 * (1.0 + up3));
            prop_assert!((r3.value - 3.0 * r.value).abs() <= 1e-8 * (1.0 + r3.value));
        }
    }
}
