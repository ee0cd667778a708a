//! Checkers for the geometric hypotheses and the functional inequalities.
//!
//! Every checker returns a [`CheckReport`] whose constant is the largest
//! observed ratio `lhs / rhs`; `0/0` samples are skipped and counted.

pub mod exponents;
pub mod gn;
pub mod hypotheses;
pub mod nonlinear;
pub mod report;
pub mod symmetrization;

pub use exponents::{exponents, ExponentSet, LorentzParams};
pub use report::{CheckReport, Sample, Witness};

use crate::funcnorms::{gradient_modulus, GradientMode};
use crate::mm_space::Space;
use crate::rearrange::StepFunction;

/// Default `s` grid: `n` log-spaced points in `[mu_min, mu(M)]`.
pub fn s_grid(space: &Space, n: usize) -> Vec<f64> {
    log_grid(space.min_measure(), space.total_measure(), n)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![hi],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let mut g: Vec<f64> = (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect();
            g[0] = lo;
            g[n - 1] = hi;
            g
        }
    }
}

pub(crate) fn grad(space: &Space, f: &[f64]) -> Vec<f64> {
    gradient_modulus(space, f, GradientMode::L2)
}

/// `(sum mu |v|^q / total)^{1/q}` over `(value, weight)` pairs.
pub(crate) fn power_mean(items: impl Iterator<Item = (f64, f64)>, q: f64, total: f64) -> f64 {
    let s: f64 = items.map(|(v, m)| m * v.abs().powf(q)).sum();
    (s / total).powf(1.0 / q)
}

pub(crate) fn rearr(space: &Space, f: &[f64]) -> StepFunction {
    StepFunction::rearrange(f, space.measure())
}

/// `s -> |f|^{q**1/q}(s)` with `s > 0`.
pub(crate) fn qss(sf: &StepFunction, q: f64, s: f64) -> f64 {
    sf.qdouble_star_root(q, s).expect("s > 0")
}
