use faer::{Mat, Side};

use super::report::CheckReport;
use super::{grad, power_mean};
use crate::corpus::CorpusFunction;
use crate::error::{Error, Result};
use crate::funcnorms::{lp_norm, GradientMode};
use crate::heat::{self, conjugate, Semigroup};
use crate::mm_space::Space;

/// Balls above this size are left out of the eigenvalue oracle.
pub const EIGEN_BALL_CAP: usize = 600;

/// Doubling ratios `mu(B(x,2r)) / mu(B(x,r))` per radius.
///
/// The report is flagged divergent when the worst ratio more than doubles
/// between some `r` and `2r <= r_max`: on a finite space every ratio is
/// bounded, so divergence shows up as growth of the ratio with the radius
/// before the balls saturate.
pub fn check_doubling(space: &Space, r_max: usize) -> Result<CheckReport> {
    let d = space.doubling_constant(r_max)?;
    let mut rep = CheckReport::new("doubling").param("r_max", r_max).note(format!(
        "integer radii 1..={r_max}, doubled radii clamped at diameter {}",
        space.diameter()
    ));
    for r in 1..=r_max {
        let x = (0..space.len())
            .map(|x| (x, space.balls().measure(x, 2 * r) / space.balls().measure(x, r)))
            .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a })
            .0;
        rep.push(
            "",
            &[("r", r as f64), ("x", x as f64)],
            space.balls().measure(x, 2 * r),
            space.balls().measure(x, r),
        );
    }
    let growth = (1..=r_max / 2)
        .map(|r| d.per_radius[2 * r - 1] / d.per_radius[r - 1])
        .fold(1.0, f64::max);
    rep.diverges = growth > 2.0;
    rep.extra("per_radius", &d.per_radius);
    rep.extra("growth_ratio", growth);
    if let Ok(fit) = space.growth_exponent(1, r_max) {
        rep.extra("growth_sigma", fit.sigma);
        rep.extra("growth_c", fit.c);
    }
    Ok(rep)
}

/// Smallest nonzero eigenvalue of the Neumann Laplacian of the induced ball
/// for the energy `sum_{edges in B} w (mu_a + mu_b) (f_b - f_a)^2` against
/// `sum mu f^2`.
pub fn ball_neumann_gap(space: &Space, ball: &[u32]) -> Result<f64> {
    let n = ball.len();
    if n < 2 {
        return Err(Error::InvalidArgument("ball with one vertex has no gap".into()));
    }
    let mu = space.measure();
    let mut local = std::collections::HashMap::with_capacity(n);
    for (i, &v) in ball.iter().enumerate() {
        local.insert(v as usize, i);
    }
    let sq: Vec<f64> = ball.iter().map(|&v| mu[v as usize].sqrt()).collect();
    let mut m = Mat::<f64>::zeros(n, n);
    for (i, &v) in ball.iter().enumerate() {
        let a = v as usize;
        for &(b, w) in space.neighbors(a) {
            if let Some(&j) = local.get(&b) {
                let c = w * (mu[a] + mu[b]);
                m[(i, j)] -= c / (sq[i] * sq[j]);
                m[(i, i)] += c / (sq[i] * sq[i]);
            }
        }
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::InvalidArgument(format!("eigensolver failed: {e:?}")))?;
    Ok(evd.S().column_vector()[1])
}

/// Poincare inequality on balls `B(x,r)`, `1 <= r <= r_max`:
/// `(avg_B |f - f_B|^q)^{1/q} <= C r (avg_B |grad f|^q)^{1/q}`.
///
/// For `q = 2` the exact optimum `1/(r sqrt(lambda_1(B)))` per ball is
/// reported in the extras (it bounds every corpus ratio from above).
pub fn check_poincare(space: &Space, q: f64, r_max: usize, corpus: &[CorpusFunction]) -> Result<CheckReport> {
    if !(q >= 1.0) || q.is_infinite() {
        return Err(Error::InvalidArgument(format!(
            "Poincare exponent q = {q} must be in [1, inf)"
        )));
    }
    check_r_max(space, r_max)?;
    let mut rep = CheckReport::new("poincare")
        .param("q", q)
        .param("r_max", r_max)
        .note(format!("all centers, integer radii 1..={r_max}"));
    let mu = space.measure();
    let balls = space.balls();
    for f in corpus {
        let g = grad(space, &f.values);
        let mut best: Option<(f64, f64, usize, usize)> = None;
        let mut any = false;
        for r in 1..=r_max {
            for x in 0..space.len() {
                let b = balls.ball(x, r);
                let fb = space.ball_average(&f.values, x, r);
                let vb = balls.measure(x, r);
                let lhs = power_mean(b.iter().map(|&y| (f.values[y as usize] - fb, mu[y as usize])), q, vb);
                let rhs = r as f64 * power_mean(b.iter().map(|&y| (g[y as usize], mu[y as usize])), q, vb);
                if rhs == 0.0 {
                    continue;
                }
                any = true;
                let ratio = lhs / rhs;
                if best.is_none_or(|bb| ratio > bb.0 / bb.1) {
                    best = Some((lhs, rhs, x, r));
                }
            }
        }
        match best {
            Some((lhs, rhs, x, r)) if any => rep.push(&f.id, &[("x", x as f64), ("r", r as f64)], lhs, rhs),
            _ => rep.skip(),
        }
    }
    if q == 2.0 {
        let (c, x, r, per_r, left_out) = poincare_eigen(space, r_max)?;
        rep.extra("eigen_constant", c);
        rep.extra("eigen_witness", (x, r));
        rep.extra("eigen_per_radius", per_r);
        rep.extra("eigen_balls_left_out", left_out);
    }
    Ok(rep)
}

/// `max_{x,r} 1/(r sqrt(lambda_1(B(x,r))))` over balls with at most
/// [`EIGEN_BALL_CAP`] vertices; returns `(C, x, r, per-radius max, left out)`.
pub fn poincare_eigen(space: &Space, r_max: usize) -> Result<(f64, usize, usize, Vec<f64>, usize)> {
    check_r_max(space, r_max)?;
    let balls = space.balls();
    let mut best = (0.0f64, 0, 1);
    let mut per_r = Vec::with_capacity(r_max);
    let mut left_out = 0;
    // saturated balls repeat the same vertex set
    let mut cache: std::collections::HashMap<Vec<u32>, f64> = std::collections::HashMap::new();
    for r in 1..=r_max {
        let mut row = 0.0f64;
        for x in 0..space.len() {
            let b = balls.ball(x, r);
            if b.len() < 2 {
                continue;
            }
            if b.len() > EIGEN_BALL_CAP {
                left_out += 1;
                continue;
            }
            let mut key = b.to_vec();
            key.sort_unstable();
            let lam = match cache.get(&key) {
                Some(&l) => l,
                None => {
                    let l = ball_neumann_gap(space, b)?;
                    cache.insert(key, l);
                    l
                }
            };
            let c = 1.0 / (r as f64 * lam.sqrt());
            row = row.max(c);
            if c > best.0 {
                best = (c, x, r);
            }
        }
        per_r.push(row);
    }
    Ok((best.0, best.1, best.2, per_r, left_out))
}

fn check_r_max(space: &Space, r_max: usize) -> Result<()> {
    if r_max < 1 || r_max > space.diameter().max(1) {
        return Err(Error::InvalidArgument(format!(
            "r_max = {r_max} outside [1, {}]",
            space.diameter()
        )));
    }
    Ok(())
}

/// Heat pseudo-Poincare `||f - P_t f||_q <= C sqrt(t) || |grad f| ||_q`.
pub fn check_pseudo_poincare_heat(
    sg: &Semigroup,
    q: f64,
    t_grid: &[f64],
    corpus: &[CorpusFunction],
) -> Result<CheckReport> {
    if !(q >= 1.0) {
        return Err(Error::InvalidArgument(format!("q = {q} must be >= 1")));
    }
    let space = sg.space();
    let mut rep = CheckReport::new("pseudo_poincare_heat")
        .param("q", q)
        .note(t_note(t_grid));
    for f in corpus {
        let gn = lp_norm(space, &grad(space, &f.values), q);
        if gn == 0.0 {
            rep.n_skipped += t_grid.len();
            continue;
        }
        for (&t, pt) in t_grid.iter().zip(sg.apply_many(&f.values, t_grid)?) {
            let diff: Vec<f64> = f.values.iter().zip(&pt).map(|(a, b)| a - b).collect();
            rep.push(&f.id, &[("t", t)], lp_norm(space, &diff, q), t.sqrt() * gn);
        }
    }
    Ok(rep)
}

/// Averages pseudo-Poincare `||f - f_{B(.,r)}||_q <= C r || |grad f| ||_q`.
pub fn check_pseudo_poincare_avg(
    space: &Space,
    q: f64,
    r_max: usize,
    corpus: &[CorpusFunction],
) -> Result<CheckReport> {
    if !(q >= 1.0) {
        return Err(Error::InvalidArgument(format!("q = {q} must be >= 1")));
    }
    check_r_max(space, r_max)?;
    let mut rep = CheckReport::new("pseudo_poincare_avg")
        .param("q", q)
        .param("r_max", r_max)
        .note(format!("integer radii 1..={r_max}"));
    for f in corpus {
        let gn = lp_norm(space, &grad(space, &f.values), q);
        if gn == 0.0 {
            rep.n_skipped += r_max;
            continue;
        }
        for r in 1..=r_max {
            let diff: Vec<f64> = (0..space.len())
                .map(|x| f.values[x] - space.ball_average(&f.values, x, r))
                .collect();
            rep.push(&f.id, &[("r", r as f64)], lp_norm(space, &diff, q), r as f64 * gn);
        }
    }
    Ok(rep)
}

/// Entries below this fraction of the largest diagonal value are treated as
/// numerically zero in the Gaussian fit.
pub const KERNEL_FLOOR: f64 = 1e-12;

/// Gaussian upper bound fit; samples are the per-time maxima at the chosen `c`.
pub fn check_gaussian_bound(sg: &Semigroup, t_range: &[f64], c_trial: &[f64]) -> Result<CheckReport> {
    let fit = heat::fit_gaussian_bound_floor(sg, t_range, c_trial, KERNEL_FLOOR)?;
    let mut rep = CheckReport::new("gaussian_bound")
        .param("c_trial", c_trial.to_vec())
        .note(t_note(t_range));
    let j = fit.c_trial.iter().position(|&c| c == fit.c).unwrap_or(0);
    for (t, row) in fit.times.iter().zip(&fit.per_t) {
        rep.push("kernel", &[("t", *t), ("c", fit.c)], row[j], 1.0);
    }
    rep.extra("c", fit.c);
    rep.extra("per_c", &fit.per_c);
    rep.extra("kernel_floor", KERNEL_FLOOR);
    Ok(rep)
}

/// Kernel gradient condition `|grad_x p_t(x,y)| <= C / (sqrt(t) mu(B(y, sqrt t)))`.
pub fn check_kernel_gradient(sg: &Semigroup, t_range: &[f64]) -> Result<CheckReport> {
    let mut rep = CheckReport::new("kernel_gradient").note(t_note(t_range));
    for &t in t_range {
        let (c, w) = heat::kernel_gradient_bound(sg, &[t], GradientMode::L2)?;
        rep.push("kernel", &[("t", t), ("x", w.x as f64), ("y", w.y as f64)], c, 1.0);
    }
    Ok(rep)
}

/// Bracket on `sup_t sqrt(t) || |grad P_t| ||_{p -> p}`: samples carry the
/// corpus lower bound, the extras the certified upper bound.
pub fn check_grad_semigroup(sg: &Semigroup, p: f64, t_range: &[f64], corpus: &[CorpusFunction]) -> Result<CheckReport> {
    let values: Vec<Vec<f64>> = corpus.iter().map(|f| f.values.clone()).collect();
    let b = heat::grad_semigroup_norm(sg, p, t_range, &values)?;
    let mut rep = CheckReport::new("grad_semigroup").param("p", p).note(t_note(t_range));
    for &(t, _, lo) in &b.per_t {
        rep.push("corpus", &[("t", t)], lo, 1.0);
    }
    rep.extra("upper", b.upper);
    rep.extra("upper_per_t", b.per_t.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>());
    Ok(rep)
}

/// Gradient bound on the semigroup implies the pseudo-Poincare inequality for
/// the conjugate exponent `p'`.
///
/// Samples hold `sqrt(s) ||Delta P_s f||_{p'} / || |grad f| ||_{p'}` on a grid
/// refined to 8 points per octave. The extras hold the heat pseudo-Poincare
/// constant for `p'`, the per-function chain ratio
/// `||f - P_t f||_{p'} / (2 sqrt(t) A_f)` (at most 1 by integrating
/// `||Delta P_s f|| <= A_f / sqrt(s)` over `(0, t)`), and, when the kernel is
/// dense, the check `A_f <= upper(p) / (2 mu_min)` against the certified
/// semigroup gradient bound.
pub fn check_g_implies_pseudo(
    sg: &Semigroup,
    p: f64,
    t_grid: &[f64],
    corpus: &[CorpusFunction],
) -> Result<CheckReport> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must exceed 1")));
    }
    let space = sg.space();
    let pc = conjugate(p);
    let (lo, hi) = match (t_grid.first(), t_grid.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::InvalidArgument("empty t grid".into())),
    };
    // extend two octaves below so the sup over small s is resolved
    let s_grid = heat::doubling_grid(lo / 4.0, hi, 8)?;
    let mut rep = CheckReport::new("g_implies_pseudo")
        .param("p", p)
        .param("p_conjugate", pc)
        .note(format!(
            "{}; s grid 8 points per octave from {}",
            t_note(t_grid),
            lo / 4.0
        ));
    let upper_per_s: Option<Vec<f64>> = if sg.is_dense() {
        Some(
            t_grid
                .iter()
                .map(|&s| heat::grad_bound(sg, p, s))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };
    let mu_min = space.min_measure();
    let mut chain_max = 0.0f64;
    let mut pseudo_max = 0.0f64;
    let mut lap_max = 0.0f64;
    for f in corpus {
        let gn = lp_norm(space, &grad(space, &f.values), pc);
        if gn == 0.0 {
            rep.n_skipped += s_grid.len();
            continue;
        }
        let mut a_f = 0.0f64;
        for &s in &s_grid {
            let d = heat::laplacian(space, &sg.apply(&f.values, s)?);
            let lhs = s.sqrt() * lp_norm(space, &d, pc);
            a_f = a_f.max(lhs / gn);
            rep.push(&f.id, &[("s", s)], lhs, gn);
        }
        for (i, &t) in t_grid.iter().enumerate() {
            let pt = sg.apply(&f.values, t)?;
            let diff: Vec<f64> = f.values.iter().zip(&pt).map(|(a, b)| a - b).collect();
            let lhs = lp_norm(space, &diff, pc);
            pseudo_max = pseudo_max.max(lhs / (t.sqrt() * gn));
            if a_f > 0.0 {
                chain_max = chain_max.max(lhs / (2.0 * t.sqrt() * a_f * gn));
            }
            if let Some(up) = &upper_per_s {
                let d = heat::laplacian(space, &sg.apply(&f.values, t)?);
                let ratio = t.sqrt() * lp_norm(space, &d, pc) / gn;
                let bound = t.sqrt() * up[i] / (2.0 * mu_min);
                lap_max = lap_max.max(ratio / bound);
            }
        }
    }
    rep.extra("pseudo_poincare_constant", pseudo_max);
    rep.extra("chain_ratio_max", chain_max);
    rep.extra("chain_holds", chain_max <= 1.0 + 1e-6);
    if upper_per_s.is_some() {
        rep.extra("laplacian_bound_ratio_max", lap_max);
        rep.extra("laplacian_bound_holds", lap_max <= 1.0 + 1e-6);
    }
    Ok(rep)
}

pub(crate) fn t_note(t: &[f64]) -> String {
    match (t.first(), t.last()) {
        (Some(a), Some(b)) => format!("t in [{a}, {b}], {} grid points", t.len()),
        _ => "empty t grid".into(),
    }
}
