use super::hypotheses::t_note;
use super::report::CheckReport;
use super::{grad, qss, rearr};
use crate::corpus::CorpusFunction;
use crate::error::{Error, Result};
use crate::funcnorms::{besov_norm, morrey_norm, require_mean_zero, triebel_sup, BesovMode};
use crate::heat::Semigroup;
use crate::rearrange::StepFunction;

/// The endpoint norm on the right side of a symmetrization inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Besov,
    Morrey,
    Triebel,
}

impl Endpoint {
    pub fn name(self) -> &'static str {
        match self {
            Endpoint::Besov => "symmetrization_besov",
            Endpoint::Morrey => "symmetrization_morrey",
            Endpoint::Triebel => "symmetrization_triebel",
        }
    }
}

fn check_alpha_q(alpha: f64, q: f64) -> Result<()> {
    if !(alpha < 0.0) || !(q >= 1.0) || q.is_infinite() {
        return Err(Error::InvalidArgument(format!(
            "need alpha < 0 and 1 <= q < inf, got alpha={alpha}, q={q}"
        )));
    }
    Ok(())
}

/// `|f|^{q**1/q}(s) <= C |grad f|^{q** |a|/(q(1+|a|))}(s) N^{1/(1+|a|)}` with
/// `N` the Besov seminorm or the Morrey norm (`r_max` = diameter); for the
/// Triebel endpoint `N` becomes `(sup_t t^{-a/2}|P_t f|)^{q**1/q}(s)`.
/// Functions that are not mean zero are skipped.
pub fn check_symmetrization(
    sg: &Semigroup,
    corpus: &[CorpusFunction],
    q: f64,
    alpha: f64,
    s_grid: &[f64],
    endpoint: Endpoint,
) -> Result<CheckReport> {
    check_alpha_q(alpha, q)?;
    let space = sg.space();
    let a = alpha.abs();
    let mut rep = CheckReport::new(endpoint.name())
        .param("q", q)
        .param("alpha", alpha)
        .note(format!(
            "s in [{}, {}], {} points; t grid [{}, {}]",
            s_grid.first().copied().unwrap_or(f64::NAN),
            s_grid.last().copied().unwrap_or(f64::NAN),
            s_grid.len(),
            sg.t_grid()[0],
            sg.t_grid()[sg.t_grid().len() - 1]
        ));
    let mut not_mean_zero = 0;
    for f in corpus {
        if require_mean_zero(space, &f.values).is_err() {
            not_mean_zero += 1;
            rep.n_skipped += s_grid.len();
            continue;
        }
        let fs = rearr(space, &f.values);
        let gs = rearr(space, &grad(space, &f.values));
        let norm_at: Box<dyn Fn(f64) -> f64> = match endpoint {
            Endpoint::Besov => {
                let n = besov_norm(sg, &f.values, alpha, BesovMode::Seminorm)?.0;
                Box::new(move |_| n)
            }
            Endpoint::Morrey => {
                let n = morrey_norm(space, &f.values, alpha, space.diameter().max(1))?.0;
                Box::new(move |_| n)
            }
            Endpoint::Triebel => {
                let ts = rearr(space, &triebel_sup(sg, &f.values, alpha)?);
                Box::new(move |s| qss(&ts, q, s))
            }
        };
        for &s in s_grid {
            let lhs = qss(&fs, q, s);
            let rhs = qss(&gs, q, s).powf(a / (1.0 + a)) * norm_at(s).powf(1.0 / (1.0 + a));
            rep.push(&f.id, &[("s", s)], lhs, rhs);
        }
    }
    rep.extra("not_mean_zero", not_mean_zero);
    Ok(rep)
}

/// Heat step `|f - P_t f|^{q**1/q}(s) <= C sqrt(t) |grad f|^{q**1/q}(s)` over
/// the semigroup grid and `s_grid`.
pub fn check_heat_step(
    sg: &Semigroup,
    corpus: &[CorpusFunction],
    q: f64,
    t_grid: &[f64],
    s_grid: &[f64],
) -> Result<CheckReport> {
    check_alpha_q(-1.0, q)?;
    let space = sg.space();
    let mut rep = CheckReport::new("symmetrization_heat_step").param("q", q).note(format!(
        "{}; {} s points",
        t_note(t_grid),
        s_grid.len()
    ));
    for f in corpus {
        let gs = rearr(space, &grad(space, &f.values));
        let gq: Vec<f64> = s_grid.iter().map(|&s| qss(&gs, q, s)).collect();
        for (&t, pt) in t_grid.iter().zip(sg.apply_many(&f.values, t_grid)?) {
            let diff: Vec<f64> = f.values.iter().zip(&pt).map(|(a, b)| a - b).collect();
            let ds: StepFunction = rearr(space, &diff);
            for (&s, &g) in s_grid.iter().zip(&gq) {
                rep.push(&f.id, &[("t", t), ("s", s)], qss(&ds, q, s), t.sqrt() * g);
            }
        }
    }
    Ok(rep)
}
