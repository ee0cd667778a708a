use super::exponents::{exponents, sobolev_exponent, LorentzParams};
use super::hypotheses::t_note;
use super::report::CheckReport;
use super::{grad, qss, rearr};
use crate::corpus::CorpusFunction;
use crate::error::{Error, Result};
use crate::funcnorms::{besov_norm, lp_norm, morrey_norm, require_mean_zero, BesovMode};
use crate::heat::Semigroup;
use crate::mm_space::{least_squares, Space};
use crate::rearrange::{lorentz_norm_of, LorentzVariant};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GnNorm {
    Besov,
    Morrey,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GnVariant {
    /// `A = || |grad f| ||_p`.
    Global,
    /// `A = ||f||_p + || |grad f| ||_p`.
    Local,
}

fn endpoint_norm(sg: &Semigroup, f: &[f64], alpha: f64, norm: GnNorm) -> Result<f64> {
    Ok(match norm {
        GnNorm::Besov => besov_norm(sg, f, alpha, BesovMode::Seminorm)?.0,
        GnNorm::Morrey => morrey_norm(sg.space(), f, alpha, sg.space().diameter().max(1))?.0,
    })
}

/// `||f||_l <= C A^theta N^{1-theta}` with `theta = p/l` and `N` the endpoint
/// norm at `alpha = theta/(theta - 1)`.
pub fn check_gn(
    sg: &Semigroup,
    corpus: &[CorpusFunction],
    p: f64,
    l: f64,
    q: f64,
    norm: GnNorm,
    variant: GnVariant,
) -> Result<CheckReport> {
    let e = exponents(p, l, None)?;
    if !(q >= 1.0 && q <= p) {
        return Err(Error::ExponentRelation(format!("need 1 <= q <= p, got q={q}, p={p}")));
    }
    let space = sg.space();
    let name = match (norm, variant) {
        (GnNorm::Besov, GnVariant::Global) => "gn_besov",
        (GnNorm::Morrey, GnVariant::Global) => "gn_morrey",
        (GnNorm::Besov, GnVariant::Local) => "gn_besov_local",
        (GnNorm::Morrey, GnVariant::Local) => "gn_morrey_local",
    };
    let mut rep = CheckReport::new(name)
        .param("p", p)
        .param("l", l)
        .param("q", q)
        .param("theta", e.theta)
        .param("alpha", e.alpha)
        .note(norm_note(sg, norm));
    for f in corpus {
        if require_mean_zero(space, &f.values).is_err() {
            rep.skip();
            continue;
        }
        let n = endpoint_norm(sg, &f.values, e.alpha, norm)?;
        let g = lp_norm(space, &grad(space, &f.values), p);
        let a = match variant {
            GnVariant::Global => g,
            GnVariant::Local => lp_norm(space, &f.values, p) + g,
        };
        let lhs = lp_norm(space, &f.values, l);
        rep.push(&f.id, &[], lhs, a.powf(e.theta) * n.powf(1.0 - e.theta));
    }
    Ok(rep)
}

/// Weak type `(q, l)`:
/// `sup_lambda lambda mu(|f| > lambda)^{1/l} <= C || |grad f| ||_q^{q/l} N^{1-q/l}`
/// with `N` at `alpha = q/(q - l)`. The left side is `sup_t t^{1/l} f*(t)`.
pub fn check_gn_weak(sg: &Semigroup, corpus: &[CorpusFunction], q: f64, l: f64, norm: GnNorm) -> Result<CheckReport> {
    let e = exponents(q, l, None)?;
    let space = sg.space();
    let mut rep = CheckReport::new(match norm {
        GnNorm::Besov => "gn_weak_besov",
        GnNorm::Morrey => "gn_weak_morrey",
    })
    .param("q", q)
    .param("l", l)
    .param("alpha", e.alpha)
    .note(norm_note(sg, norm));
    for f in corpus {
        if require_mean_zero(space, &f.values).is_err() {
            rep.skip();
            continue;
        }
        let n = endpoint_norm(sg, &f.values, e.alpha, norm)?;
        let g = lp_norm(space, &grad(space, &f.values), q);
        let lhs = weak_norm(space, &f.values, l);
        rep.push(&f.id, &[], lhs, g.powf(e.theta) * n.powf(1.0 - e.theta));
    }
    Ok(rep)
}

/// `sup_lambda lambda mu(|f| > lambda)^{1/l}`.
pub fn weak_norm(space: &Space, f: &[f64], l: f64) -> f64 {
    lorentz_norm_of(&rearr(space, f), l, f64::INFINITY, LorentzVariant::Star).expect("l > 1")
}

fn norm_note(sg: &Semigroup, norm: GnNorm) -> String {
    match norm {
        GnNorm::Besov => format!("Besov seminorm over {}", t_note(sg.t_grid())),
        GnNorm::Morrey => format!("Morrey radii 1..={}", sg.space().diameter()),
    }
}

/// Sobolev recovery from the on-diagonal bound `||P_t||_{q->inf} <= C t^{-nu/(2q)}`.
///
/// Returns the kernel report (samples `t^{nu/(2q)} ||P_t||_{q->inf}`, fitted
/// log-log slope in the extras) and the inequality report for
/// `||f||_{q*} <= C || |grad f| ||_q`, `1/q* = 1/q - 1/nu`.
pub fn check_sobolev_recovery(
    sg: &Semigroup,
    corpus: &[CorpusFunction],
    q: f64,
    nu: f64,
    t_range: &[f64],
) -> Result<(CheckReport, CheckReport)> {
    if !(nu > q) {
        return Err(Error::ExponentRelation(format!("need nu > q, got nu={nu}, q={q}")));
    }
    let q_star = sobolev_exponent(q, nu)?;
    let space = sg.space();
    let mut kern = CheckReport::new("sobolev_kernel")
        .param("q", q)
        .param("nu", nu)
        .note(t_note(t_range));
    let mut logs = (Vec::new(), Vec::new());
    for &t in t_range {
        let k = sg.q_to_inf_norm(q, t)?;
        kern.push("kernel", &[("t", t)], t.powf(nu / (2.0 * q)) * k, 1.0);
        logs.0.push(t.ln());
        logs.1.push(k.ln());
    }
    if t_range.len() >= 2 {
        let (slope, intercept, resid) = least_squares(&logs.0, &logs.1);
        kern.extra("slope", slope);
        kern.extra("expected_slope", -nu / (2.0 * q));
        kern.extra("intercept", intercept);
        kern.extra("residual", resid);
    }
    let mut ineq = CheckReport::new("sobolev_inequality")
        .param("q", q)
        .param("nu", nu)
        .param("q_star", q_star)
        .note("corpus functions, mean zero required");
    for f in corpus {
        if require_mean_zero(space, &f.values).is_err() {
            ineq.skip();
            continue;
        }
        let lhs = lp_norm(space, &f.values, q_star);
        ineq.push(&f.id, &[], lhs, lp_norm(space, &grad(space, &f.values), q));
    }
    Ok((kern, ineq))
}

/// Oscillation `f**(t) - f*(t) <= C t^{1/sigma} |grad f|^{q**1/q}(t)`.
pub fn check_oscillation(
    space: &Space,
    corpus: &[CorpusFunction],
    q: f64,
    sigma: f64,
    t_grid: &[f64],
) -> Result<CheckReport> {
    if !(sigma > 0.0) || !(q >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need sigma > 0, q >= 1; got {sigma}, {q}"
        )));
    }
    let mut rep = CheckReport::new("oscillation")
        .param("q", q)
        .param("sigma", sigma)
        .note(format!(
            "{} t points in [{}, {}]",
            t_grid.len(),
            t_grid[0],
            t_grid[t_grid.len() - 1]
        ));
    for f in corpus {
        let fs = rearr(space, &f.values);
        let gs = rearr(space, &grad(space, &f.values));
        for &t in t_grid {
            let lhs = fs.double_star(t)? - fs.eval(t);
            rep.push(&f.id, &[("t", t)], lhs.max(0.0), t.powf(1.0 / sigma) * qss(&gs, q, t));
        }
    }
    Ok(rep)
}

/// Lorentz Gagliardo-Nirenberg
/// `||f||_{L(r,m)} <= C || |grad f| ||_{L(p,m0)}^{1-theta} ||f||_{L(l,m1)}^theta`,
/// the gradient factor in the `f*` form. For `theta = 0` a second report
/// checks the embedding `||f||_{L(p*,p*)} <= C ||f||_{L(p*,p)}`.
pub fn check_lorentz_gn(
    space: &Space,
    corpus: &[CorpusFunction],
    params: &LorentzParams,
) -> Result<(CheckReport, Option<CheckReport>)> {
    params.validate()?;
    let lp = *params;
    let name = if lp.theta == 0.0 {
        "lorentz_sli_prime"
    } else {
        "lorentz_gn"
    };
    let mut rep = CheckReport::new(name)
        .param("theta", lp.theta)
        .param("p", lp.p)
        .param("l", lp.l)
        .param("m0", lp.m0)
        .param("m1", lp.m1)
        .param("sigma", lp.sigma)
        .param("r", lp.r)
        .param("m", lp.m)
        .note(format!("integrals over [0, {}]", space.total_measure()));
    let mut emb = (lp.theta == 0.0).then(|| {
        CheckReport::new("lorentz_embedding")
            .param("p_star", lp.r)
            .param("p", lp.p)
            .note("L(p*,p*) against L(p*,p)")
    });
    for f in corpus {
        let fs = rearr(space, &f.values);
        let gs = rearr(space, &grad(space, &f.values));
        let lhs = lorentz_norm_of(&fs, lp.r, lp.m, LorentzVariant::DoubleStar)?;
        let gterm = lorentz_norm_of(&gs, lp.p, lp.m0, LorentzVariant::Star)?;
        let fterm = if lp.theta > 0.0 {
            lorentz_norm_of(&fs, lp.l, lp.m1, LorentzVariant::DoubleStar)?
        } else {
            1.0
        };
        rep.push(&f.id, &[], lhs, gterm.powf(1.0 - lp.theta) * fterm.powf(lp.theta));
        if let Some(e) = emb.as_mut() {
            let big = lorentz_norm_of(&fs, lp.r, lp.r, LorentzVariant::DoubleStar)?;
            e.push(&f.id, &[], big, lhs);
        }
    }
    Ok((rep, emb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Kind};
    use crate::ineq::fixtures::*;

    fn weak_oracle(space: &Space, f: &[f64], l: f64) -> f64 {
        f.iter()
            .map(|v| {
                let lam = v.abs();
                let m: f64 = f
                    .iter()
                    .zip(space.measure())
                    .filter(|(u, _)| u.abs() >= lam)
                    .map(|(_, m)| m)
                    .sum();
                lam * m.powf(1.0 / l)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn weak_norm_matches_lambda_sweep() {
        let s = builtin("grid:7x5");
        let c = Corpus::generate(&sg(s.clone()), 9, 10, &Kind::ALL, Default::default()).unwrap();
        for f in &c.functions {
            for l in [1.5, 2.0, 4.0] {
                let (a, b) = (weak_norm(&s, &f.values, l), weak_oracle(&s, &f.values, l));
                assert!((a - b).abs() <= 1e-12 * b, "{} l={l}: {a} vs {b}", f.id);
            }
        }
    }

    #[test]
    fn strong_dominates_weak_when_p_equals_q() {
        let s = builtin("torus:8x8");
        let g = sg(s);
        let c = Corpus::generate(&g, 7, 10, &Kind::ALL, Default::default()).unwrap();
        for norm in [GnNorm::Besov, GnNorm::Morrey] {
            let strong = check_gn(&g, &c.functions, 1.0, 2.0, 1.0, norm, GnVariant::Global).unwrap();
            let weak = check_gn_weak(&g, &c.functions, 1.0, 2.0, norm).unwrap();
            for (a, b) in strong.samples.iter().zip(&weak.samples) {
                assert!((a.rhs - b.rhs).abs() <= 1e-12 * a.rhs);
                assert!(a.ratio.unwrap() >= b.ratio.unwrap() * (1.0 - 1e-12));
            }
            assert!(strong.constant.unwrap() >= weak.constant.unwrap());
        }
    }

    #[test]
    fn local_variant_is_smaller() {
        let g = sg(builtin("torus:8x8"));
        let c = Corpus::generate(&g, 7, 6, &Kind::ALL, Default::default()).unwrap();
        let a = check_gn(&g, &c.functions, 1.0, 2.0, 1.0, GnNorm::Besov, GnVariant::Global).unwrap();
        let b = check_gn(&g, &c.functions, 1.0, 2.0, 1.0, GnNorm::Besov, GnVariant::Local).unwrap();
        assert_eq!(b.name, "gn_besov_local");
        assert!(b.constant.unwrap() <= a.constant.unwrap());
    }

    #[test]
    fn gn_homogeneous_and_skips_non_mean_zero() {
        let g = sg(builtin("torus:6x6"));
        let c = Corpus::generate(&g, 2, 6, &Kind::ALL, Default::default()).unwrap();
        let mut twice: Vec<_> = c.functions.iter().map(|f| scaled(f, 2.0)).collect();
        let a = check_gn(&g, &c.functions, 1.0, 3.0, 1.0, GnNorm::Morrey, GnVariant::Global).unwrap();
        twice.push(cf("const", vec![1.0; 36]));
        let b = check_gn(&g, &twice, 1.0, 3.0, 1.0, GnNorm::Morrey, GnVariant::Global).unwrap();
        assert_eq!(b.n_skipped, 1);
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((x.ratio.unwrap() - y.ratio.unwrap()).abs() <= 1e-9 * x.ratio.unwrap());
        }
        assert_eq!(a.params["alpha"], -0.5);
    }

    #[test]
    fn sobolev_exponents_and_guard() {
        let g = sg(builtin("cycle:12"));
        assert!(check_sobolev_recovery(&g, &[], 2.0, 2.0, &[1.0]).is_err());
        let (k, i) = check_sobolev_recovery(&g, &[cf("c", vec![1.0; 12])], 1.0, 2.0, &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(i.params["q_star"], 2.0);
        assert_eq!(i.n_skipped, 1);
        assert_eq!(k.n_samples, 3);
        assert_eq!(k.extras["expected_slope"], -1.0);
    }

    #[test]
    fn oscillation_p3_hand_values() {
        let rep = check_oscillation(&p3(), &[cf("f", vec![3.0, 1.0, 2.0])], 1.0, 1.0, &[2.0]).unwrap();
        let s = &rep.samples[0];
        assert!((s.lhs - 1.5).abs() < 1e-14);
        assert!((s.rhs - (2.0 + 5f64.sqrt())).abs() < 1e-13);
        let zero = check_oscillation(&p3(), &[cf("c", vec![1.0; 3])], 1.0, 1.0, &[1.0]).unwrap();
        assert_eq!(zero.n_skipped, 1);
    }

    #[test]
    fn lorentz_theta_zero_emits_embedding() {
        let s = builtin("torus:8x8");
        let c = Corpus::generate(&sg(s.clone()), 4, 5, &Kind::ALL, Default::default()).unwrap();
        let lp = LorentzParams::theta_zero(1.5, 2.0, 1.0).unwrap();
        let (rep, emb) = check_lorentz_gn(&s, &c.functions, &lp).unwrap();
        assert_eq!(rep.name, "lorentz_sli_prime");
        assert!(rep.is_finite());
        let emb = emb.unwrap();
        // L(p*, p*) <= C L(p*, p) with p < p*
        assert!(emb.constant.unwrap() <= 1.0 + 1e-9);
        let mut bad = lp;
        bad.r += 0.5;
        assert!(check_lorentz_gn(&s, &c.functions, &bad).is_err());
    }
}
