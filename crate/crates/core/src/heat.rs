//! Graph Laplacian, heat semigroup `P_t = e^{t Delta}` and heat-kernel bounds.
//!
//! Kernel convention: `P_t f(x) = sum_y p_t(x,y) f(y) mu(y)`.

use std::fmt::Write as _;
use std::sync::Arc;

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::funcnorms::{self, GradientMode};
use crate::mm_space::Space;

pub const DEFAULT_DENSE_CAP: usize = 4096;
pub const DEFAULT_T_MIN: f64 = 1.0 / 16.0;
const KRYLOV_TOL: f64 = 1e-10;
const KRYLOV_MAX_DIM: usize = 64;
// bound on spectral radius times step length for one Krylov step
const KRYLOV_STEP_SPREAD: f64 = 8.0;

/// `Delta f(x) = (1/mu(x)) sum_{y~x} w_xy (f(y) - f(x))`.
pub fn laplacian(space: &Space, f: &[f64]) -> Vec<f64> {
    let mu = space.measure();
    (0..space.len())
        .map(|x| {
            let s: f64 = space.neighbors(x).iter().map(|&(y, w)| w * (f[y] - f[x])).sum();
            s / mu[x]
        })
        .collect()
}

/// `ceil(sqrt(t))`, the integer radius standing in for `sqrt(t)`.
pub fn sqrt_radius(t: f64) -> usize {
    t.sqrt().ceil() as usize
}

/// Doubling-closed grid `t_min * 2^{j/k}` covering `[t_min, t_max]`,
/// with `k = per_octave` points per factor of two.
pub fn doubling_grid(t_min: f64, t_max: f64, per_octave: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0) || !(t_max >= t_min) || !t_max.is_finite() || per_octave == 0 {
        return Err(Error::InvalidArgument(format!(
            "bad time grid t_min={t_min} t_max={t_max} per_octave={per_octave}"
        )));
    }
    let k = per_octave;
    let steps = (k as f64 * (t_max / t_min).log2() - 1e-9).ceil().max(0.0) as usize;
    Ok((0..=steps)
        .map(|j| {
            let frac = 2f64.powf((j % k) as f64 / k as f64);
            t_min * frac * 2f64.powi((j / k) as i32)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeatOptions {
    pub dense_cap: usize,
    pub t_min: f64,
    /// Defaults to `max(diameter^2, 2 t_min)`.
    pub t_max: Option<f64>,
    pub per_octave: usize,
}

impl Default for HeatOptions {
    fn default() -> Self {
        HeatOptions {
            dense_cap: DEFAULT_DENSE_CAP,
            t_min: DEFAULT_T_MIN,
            t_max: None,
            per_octave: 1,
        }
    }
}

#[derive(Clone, Debug)]
struct Spectral {
    /// Eigenvalues of `Delta`, `lambda[0] = 0` then nonincreasing.
    lambda: Vec<f64>,
    /// Row `k` holds the `mu`-orthonormal eigenvector `phi_k`.
    phi: Vec<f64>,
}

/// Heat semigroup on a space: spectral below the dense cap, Krylov above.
#[derive(Clone, Debug)]
pub struct Semigroup {
    space: Arc<Space>,
    spectral: Option<Spectral>,
    grid: Vec<f64>,
    dense_cap: usize,
}

impl Semigroup {
    pub fn new(space: Arc<Space>, opts: &HeatOptions) -> Result<Self> {
        let diam = space.diameter() as f64;
        let t_max = opts.t_max.unwrap_or_else(|| (diam * diam).max(2.0 * opts.t_min));
        let grid = doubling_grid(opts.t_min, t_max, opts.per_octave)?;
        let spectral = if space.len() <= opts.dense_cap {
            Some(eigendecompose(&space)?)
        } else {
            None
        };
        Ok(Semigroup {
            space,
            spectral,
            grid,
            dense_cap: opts.dense_cap,
        })
    }

    pub fn with_defaults(space: Arc<Space>) -> Result<Self> {
        Self::new(space, &HeatOptions::default())
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn space_arc(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn is_dense(&self) -> bool {
        self.spectral.is_some()
    }

    pub fn dense_cap(&self) -> usize {
        self.dense_cap
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.grid
    }

    /// Grid times inside `[lo, hi]`.
    pub fn grid_between(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.grid
            .iter()
            .copied()
            .filter(|&t| t >= lo * (1.0 - 1e-12) && t <= hi * (1.0 + 1e-12))
            .collect()
    }

    fn need_dense(&self) -> Result<&Spectral> {
        self.spectral.as_ref().ok_or(Error::DenseCapExceeded {
            n: self.space.len(),
            cap: self.dense_cap,
        })
    }

    pub fn eigenvalues(&self) -> Result<&[f64]> {
        Ok(&self.need_dense()?.lambda)
    }

    /// `k`-th `mu`-orthonormal eigenvector; `k = 0` is the constant.
    pub fn eigenvector(&self, k: usize) -> Result<&[f64]> {
        let s = self.need_dense()?;
        let n = self.space.len();
        if k >= n {
            return Err(Error::InvalidArgument(format!("eigenvector index {k} >= {n}")));
        }
        Ok(&s.phi[k * n..(k + 1) * n])
    }

    /// Spectral gap `-lambda_1`.
    pub fn spectral_gap(&self) -> Result<f64> {
        let l = self.eigenvalues()?;
        Ok(l.get(1).map(|v| -v).unwrap_or(f64::INFINITY))
    }

    /// Coefficients `<f, phi_k>_mu`.
    pub fn coefficients(&self, f: &[f64]) -> Result<Vec<f64>> {
        let s = self.need_dense()?;
        let n = self.space.len();
        let mu = self.space.measure();
        let fm: Vec<f64> = f.iter().zip(mu).map(|(a, b)| a * b).collect();
        Ok(s.phi
            .chunks_exact(n)
            .map(|row| row.iter().zip(&fm).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `sum_k c_k m(lambda_k) phi_k` for a spectral multiplier `m`.
    pub fn synthesize_with(&self, coeffs: &[f64], m: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        let s = self.need_dense()?;
        let n = self.space.len();
        let mut out = vec![0.0; n];
        for (k, row) in s.phi.chunks_exact(n).enumerate() {
            let a = coeffs[k] * m(s.lambda[k]);
            if a == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(row) {
                *o += a * p;
            }
        }
        Ok(out)
    }

    pub fn synthesize(&self, coeffs: &[f64], t: f64) -> Result<Vec<f64>> {
        self.synthesize_with(coeffs, |l| (l * t).exp())
    }

    /// `P_t f`.
    pub fn apply(&self, f: &[f64], t: f64) -> Result<Vec<f64>> {
        check_t(t)?;
        if t == 0.0 {
            return Ok(f.to_vec());
        }
        match &self.spectral {
            Some(_) => self.synthesize(&self.coefficients(f)?, t),
            None => Ok(expmv(&self.space, f, t)),
        }
    }

    /// `P_t f` for several times, sharing the spectral analysis.
    pub fn apply_many(&self, f: &[f64], ts: &[f64]) -> Result<Vec<Vec<f64>>> {
        for &t in ts {
            check_t(t)?;
        }
        if self.spectral.is_some() {
            let c = self.coefficients(f)?;
            ts.iter().map(|&t| self.synthesize(&c, t)).collect()
        } else {
            Ok(ts.iter().map(|&t| expmv(&self.space, f, t)).collect())
        }
    }

    /// `Delta P_t f`.
    pub fn apply_laplacian_semigroup(&self, f: &[f64], t: f64) -> Result<Vec<f64>> {
        check_t(t)?;
        match &self.spectral {
            Some(_) => {
                let c = self.coefficients(f)?;
                self.synthesize_with(&c, |l| l * (l * t).exp())
            }
            None => Ok(laplacian(&self.space, &expmv(&self.space, f, t))),
        }
    }

    /// Lazy random walk `(I + Delta/2)^steps f`, for cross-checks only.
    pub fn lazy_walk(&self, f: &[f64], steps: usize) -> Vec<f64> {
        let mut v = f.to_vec();
        for _ in 0..steps {
            let d = laplacian(&self.space, &v);
            for (a, b) in v.iter_mut().zip(d) {
                *a += 0.5 * b;
            }
        }
        v
    }

    /// Dense kernel matrix `p_t(x, y)`.
    pub fn heat_kernel(&self, t: f64) -> Result<Kernel> {
        check_t(t)?;
        let s = self.need_dense()?;
        let n = self.space.len();
        let b = Mat::<f64>::from_fn(n, n, |x, k| s.phi[k * n + x] * (0.5 * s.lambda[k] * t).exp());
        let k = &b * b.transpose();
        let mut data = vec![0.0; n * n];
        for y in 0..n {
            for x in 0..n {
                data[x * n + y] = k[(x, y)];
            }
        }
        Ok(Kernel { t, n, data })
    }

    /// Diagonal `p_t(x, x)`.
    pub fn kernel_diagonal(&self, t: f64) -> Result<Vec<f64>> {
        check_t(t)?;
        let s = self.need_dense()?;
        let n = self.space.len();
        let mut out = vec![0.0; n];
        for (k, row) in s.phi.chunks_exact(n).enumerate() {
            let e = (s.lambda[k] * t).exp();
            if e < 1e-300 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(row) {
                *o += e * p * p;
            }
        }
        Ok(out)
    }

    /// `max_{x,y} p_t(x,y) = ||P_t||_{1 -> inf}`, attained on the diagonal
    /// since the kernel is positive semidefinite.
    pub fn max_kernel(&self, t: f64) -> Result<f64> {
        Ok(self.kernel_diagonal(t)?.into_iter().fold(0.0, f64::max))
    }

    /// `||P_t||_{q -> inf} = max_x ||p_t(x, .)||_{L_{q'}(mu)}`.
    pub fn q_to_inf_norm(&self, q: f64, t: f64) -> Result<f64> {
        if !(q >= 1.0) {
            return Err(Error::InvalidArgument(format!("q = {q} must be >= 1")));
        }
        if q == 1.0 {
            return self.max_kernel(t);
        }
        let k = self.heat_kernel(t)?;
        let qc = conjugate(q);
        let mu = self.space.measure();
        Ok((0..k.n)
            .map(|x| funcnorms::lp_norm_weighted(k.row(x), mu, qc))
            .fold(0.0, f64::max))
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time t = {t} must be finite and >= 0")));
    }
    Ok(())
}

/// Hoelder conjugate exponent.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

fn eigendecompose(space: &Space) -> Result<Spectral> {
    let n = space.len();
    let mu = space.measure();
    let sq: Vec<f64> = mu.iter().map(|m| m.sqrt()).collect();
    let mut s = Mat::<f64>::zeros(n, n);
    for x in 0..n {
        let mut deg = 0.0;
        for &(y, w) in space.neighbors(x) {
            s[(x, y)] = w / (sq[x] * sq[y]);
            deg += w;
        }
        s[(x, x)] = -deg / mu[x];
    }
    let evd = s
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::InvalidArgument(format!("eigensolver failed: {e:?}")))?;
    let vals = evd.S().column_vector();
    let u = evd.U();
    let mut lambda = Vec::with_capacity(n);
    let mut phi = vec![0.0; n * n];
    for k in 0..n {
        let j = n - 1 - k;
        lambda.push(vals[j].min(0.0));
        for x in 0..n {
            phi[k * n + x] = u[(x, j)] / sq[x];
        }
    }
    lambda[0] = 0.0;
    let c = 1.0 / space.total_measure().sqrt();
    phi[..n].iter_mut().for_each(|v| *v = c);
    Ok(Spectral { lambda, phi })
}

fn mu_dot(mu: &[f64], a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).zip(mu).map(|((x, y), m)| x * y * m).sum()
}

/// Matrix-free `e^{t Delta} f` by Lanczos in the `mu` inner product.
pub fn expmv(space: &Space, f: &[f64], t: f64) -> Vec<f64> {
    if t == 0.0 {
        return f.to_vec();
    }
    let rho = (0..space.len())
        .map(|x| 2.0 * space.neighbors(x).iter().map(|e| e.1).sum::<f64>() / space.measure()[x])
        .fold(0.0, f64::max);
    let steps = ((rho * t / KRYLOV_STEP_SPREAD).ceil() as usize).max(1);
    let tau = t / steps as f64;
    // the constant component is invariant; evolve the mean-zero part only
    let mean = space.mean(f);
    let mut v: Vec<f64> = f.iter().map(|a| a - mean).collect();
    let floor = 1e-13 * mu_dot(space.measure(), f, f).sqrt();
    for _ in 0..steps {
        v = lanczos_exp(space, &v, tau);
        let m = space.mean(&v);
        v.iter_mut().for_each(|a| *a -= m);
        if mu_dot(space.measure(), &v, &v).sqrt() <= floor {
            v.iter_mut().for_each(|a| *a = 0.0);
            break;
        }
    }
    v.iter().map(|a| a + mean).collect()
}

fn lanczos_exp(space: &Space, v: &[f64], tau: f64) -> Vec<f64> {
    let mu = space.measure();
    let beta0 = mu_dot(mu, v, v).sqrt();
    if beta0 == 0.0 {
        return v.to_vec();
    }
    let m_max = KRYLOV_MAX_DIM.min(space.len());
    let mut basis: Vec<Vec<f64>> = vec![v.iter().map(|a| a / beta0).collect()];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut coeffs = vec![1.0];
    for j in 0..m_max {
        let mut w = laplacian(space, &basis[j]);
        let a = mu_dot(mu, &w, &basis[j]);
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let c = mu_dot(mu, &w, q);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let b = mu_dot(mu, &w, &w).sqrt();
        coeffs = tridiag_exp_e1(&alpha, &beta, tau);
        let tail = coeffs.last().unwrap().abs();
        if b <= 1e-14 * a.abs().max(1.0) || b * tail <= KRYLOV_TOL || j + 1 == m_max {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    let mut out = vec![0.0; v.len()];
    for (c, q) in coeffs.iter().zip(&basis) {
        out.iter_mut().zip(q).for_each(|(o, qi)| *o += beta0 * c * qi);
    }
    out
}

/// `exp(tau T) e_1` for the symmetric tridiagonal `T(alpha, beta)`.
fn tridiag_exp_e1(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<f64> {
    let m = alpha.len();
    let mut t = Mat::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let evd = t.self_adjoint_eigen(Side::Lower).expect("tridiagonal eigensolve");
    let s = evd.S().column_vector();
    let u = evd.U();
    (0..m)
        .map(|i| (0..m).map(|k| u[(i, k)] * (s[k] * tau).exp() * u[(0, k)]).sum())
        .collect()
}

/// Dense heat kernel at a single time.
#[derive(Clone, Debug)]
pub struct Kernel {
    pub t: f64,
    n: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[x * self.n + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.n..(x + 1) * self.n]
    }

    /// CSV rows `t,x,y,value`.
    pub fn to_csv(&self, ids: &[String]) -> String {
        let mut out = String::from("t,x,y,value\n");
        for x in 0..self.n {
            for y in 0..self.n {
                let _ = writeln!(out, "{},{},{},{}", self.t, ids[x], ids[y], self.get(x, y));
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct GaussianFit {
    pub c: f64,
    pub constant: f64,
    pub c_trial: Vec<f64>,
    /// `C(c)` for each trial `c`.
    pub per_c: Vec<f64>,
    pub times: Vec<f64>,
    /// `per_t[i][j]`: maximum at time `times[i]` for `c_trial[j]`.
    pub per_t: Vec<Vec<f64>>,
}

impl GaussianFit {
    /// CSV rows `t,max_value` at the selected `c`.
    pub fn to_csv(&self) -> String {
        let j = self.c_trial.iter().position(|&c| c == self.c).unwrap_or(0);
        let mut out = String::from("t,max_value\n");
        for (t, row) in self.times.iter().zip(&self.per_t) {
            let _ = writeln!(out, "{t},{}", row[j]);
        }
        out
    }
}

/// Fits `p_t(x,y) <= C / mu(B(y, sqrt t)) * exp(-c d^2 / t)` over `t_range`.
///
/// `C(c)` is nondecreasing in `c`; the smallest finite `C` is returned and
/// ties go to the largest `c`.
pub fn fit_gaussian_bound(sg: &Semigroup, t_range: &[f64], c_trial: &[f64]) -> Result<GaussianFit> {
    fit_gaussian_bound_floor(sg, t_range, c_trial, 0.0)
}

/// As [`fit_gaussian_bound`], skipping kernel entries below
/// `floor * max_x p_t(x, x)`, which are round-off noise of the spectral
/// synthesis and would otherwise be amplified by `exp(c d^2 / t)`.
pub fn fit_gaussian_bound_floor(sg: &Semigroup, t_range: &[f64], c_trial: &[f64], floor: f64) -> Result<GaussianFit> {
    if t_range.is_empty() {
        return Err(Error::InvalidArgument("empty t_range".into()));
    }
    if c_trial.is_empty() || c_trial.iter().any(|c| !(*c >= 0.0)) {
        return Err(Error::InvalidArgument("c_trial must be nonempty and >= 0".into()));
    }
    let space = sg.space();
    let n = space.len();
    let mut per_t = Vec::with_capacity(t_range.len());
    for &t in t_range {
        let k = sg.heat_kernel(t)?;
        let cut = floor * (0..n).map(|x| k.get(x, x)).fold(0.0, f64::max);
        let r = sqrt_radius(t);
        let mut row = vec![0.0f64; c_trial.len()];
        for y in 0..n {
            let vb = space.balls().measure(y, r);
            for x in 0..n {
                let kv = k.get(x, y);
                if kv < cut {
                    continue;
                }
                let base = kv * vb;
                let d = space.dist(x, y) as f64;
                for (slot, &c) in row.iter_mut().zip(c_trial) {
                    *slot = slot.max(base * (c * d * d / t).exp());
                }
            }
        }
        per_t.push(row);
    }
    let per_c: Vec<f64> = (0..c_trial.len())
        .map(|j| per_t.iter().map(|r| r[j]).fold(0.0, f64::max))
        .collect();
    let mut best = None::<usize>;
    for j in 0..c_trial.len() {
        if !per_c[j].is_finite() {
            continue;
        }
        best = match best {
            None => Some(j),
            Some(b) if per_c[j] < per_c[b] => Some(j),
            Some(b) if per_c[j] == per_c[b] && c_trial[j] > c_trial[b] => Some(j),
            keep => keep,
        };
    }
    let b = best.ok_or_else(|| Error::DegenerateFit("no finite constant".into()))?;
    Ok(GaussianFit {
        c: c_trial[b],
        constant: per_c[b],
        c_trial: c_trial.to_vec(),
        per_c,
        times: t_range.to_vec(),
        per_t,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelWitness {
    pub t: f64,
    pub x: usize,
    pub y: usize,
}

/// `C_G = max_{t,x,y} |grad_x p_t(., y)|(x) sqrt(t) mu(B(y, sqrt t))`.
pub fn kernel_gradient_bound(sg: &Semigroup, t_range: &[f64], mode: GradientMode) -> Result<(f64, KernelWitness)> {
    if t_range.is_empty() {
        return Err(Error::InvalidArgument("empty t_range".into()));
    }
    let space = sg.space();
    let mut best = (
        0.0,
        KernelWitness {
            t: t_range[0],
            x: 0,
            y: 0,
        },
    );
    for &t in t_range {
        let k = sg.heat_kernel(t)?;
        let r = sqrt_radius(t);
        for y in 0..space.len() {
            // symmetric kernel: the column is the row
            let g = funcnorms::gradient_modulus(space, k.row(y), mode);
            let scale = t.sqrt() * space.balls().measure(y, r);
            for (x, gv) in g.iter().enumerate() {
                if gv * scale > best.0 {
                    best = (gv * scale, KernelWitness { t, x, y });
                }
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Debug)]
pub struct GradBracket {
    pub upper: f64,
    pub lower: f64,
    /// `(t, sqrt(t) * upper bound, sqrt(t) * corpus lower bound)`.
    pub per_t: Vec<(f64, f64, f64)>,
}

/// `sqrt(max_e (mu_x + mu_y)) * max_k |lambda_k|^{1/2} e^{lambda_k t}`, the
/// `L_2 -> L_2` bound on `|grad P_t|`.
pub fn grad_bound_l2(sg: &Semigroup, t: f64) -> Result<f64> {
    let space = sg.space();
    let mu = space.measure();
    let edge = space.edges().iter().map(|e| mu[e.a] + mu[e.b]).fold(0.0, f64::max);
    let m = sg.eigenvalues()?[1..]
        .iter()
        .map(|&l| (-l).sqrt() * (l * t).exp())
        .fold(0.0, f64::max);
    Ok(edge.sqrt() * m)
}

/// Row-aggregated kernel-difference bound on `|| |grad P_t| ||_{inf -> inf}`.
fn grad_bound_inf(space: &Space, k: &Kernel) -> f64 {
    let mu = space.measure();
    (0..space.len())
        .map(|x| {
            space
                .neighbors(x)
                .iter()
                .map(|&(y, w)| {
                    let s: f64 = k
                        .row(y)
                        .iter()
                        .zip(k.row(x))
                        .zip(mu)
                        .map(|((a, b), m)| (a - b).abs() * m)
                        .sum();
                    w * s * s
                })
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Exact `|| |grad P_t| ||_{1 -> 1} = max_z || |grad p_t(., z)| ||_1`.
fn grad_bound_one(space: &Space, k: &Kernel) -> f64 {
    let mu = space.measure();
    (0..space.len())
        .map(|z| {
            let g = funcnorms::gradient_modulus(space, k.row(z), GradientMode::L2);
            g.iter().zip(mu).map(|(a, m)| a * m).sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Upper bound on `|| |grad P_t| ||_{p -> p}` for the l2 gradient.
pub fn grad_bound(sg: &Semigroup, p: f64, t: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must exceed 1")));
    }
    let two = grad_bound_l2(sg, t)?;
    if p == 2.0 {
        return Ok(two);
    }
    let k = sg.heat_kernel(t)?;
    if p > 2.0 {
        let inf = grad_bound_inf(sg.space(), &k);
        if p.is_infinite() {
            return Ok(inf);
        }
        Ok(two.powf(2.0 / p) * inf.powf(1.0 - 2.0 / p))
    } else {
        let one = grad_bound_one(sg.space(), &k);
        let theta = 2.0 * (1.0 - 1.0 / p);
        Ok(one.powf(1.0 - theta) * two.powf(theta))
    }
}

/// Bracket for `sup_t sqrt(t) || |grad P_t| ||_{p -> p}` over `t_range`.
pub fn grad_semigroup_norm(sg: &Semigroup, p: f64, t_range: &[f64], corpus: &[Vec<f64>]) -> Result<GradBracket> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must exceed 1")));
    }
    let space = sg.space();
    let mu = space.measure();
    let coeffs: Vec<Vec<f64>> = corpus.iter().map(|f| sg.coefficients(f)).collect::<Result<_>>()?;
    let norms: Vec<f64> = corpus.iter().map(|f| funcnorms::lp_norm_weighted(f, mu, p)).collect();
    let mut per_t = Vec::with_capacity(t_range.len());
    for &t in t_range {
        let ub = t.sqrt() * grad_bound(sg, p, t)?;
        let mut lb = 0.0f64;
        for (c, &nf) in coeffs.iter().zip(&norms) {
            if nf == 0.0 {
                continue;
            }
            let g = funcnorms::gradient_modulus(space, &sg.synthesize(c, t)?, GradientMode::L2);
            lb = lb.max(t.sqrt() * funcnorms::lp_norm_weighted(&g, mu, p) / nf);
        }
        per_t.push((t, ub, lb));
    }
    Ok(GradBracket {
        upper: per_t.iter().map(|r| r.1).fold(0.0, f64::max),
        lower: per_t.iter().map(|r| r.2).fold(0.0, f64::max),
        per_t,
    })
}
