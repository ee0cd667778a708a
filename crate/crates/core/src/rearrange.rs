//! Distribution functions, decreasing rearrangements and the quantities
//! built on them: `f**`, `|f|^{q**1/q}`, Lorentz norms and the
//! `(L_q, L_inf)` K-functional.
//!
//! Everything is exact on step functions except the Lorentz integrals with
//! non-integer exponents, which fall back to adaptive quadrature per piece.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mm_space::Space;
use crate::quad;

const LORENTZ_TOL: f64 = 1e-10;

/// Right-continuous nonincreasing step function on `[0, total)`.
///
/// Piece `i` covers `[ends[i-1], ends[i])` (with `ends[-1] = 0`) and takes
/// `values[i]`; the function vanishes past the last end.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction {
    ends: Vec<f64>,
    values: Vec<f64>,
    total: f64,
}

impl StepFunction {
    /// Decreasing rearrangement of `|values|` with respect to the weights `measure`.
    pub fn rearrange(values: &[f64], measure: &[f64]) -> Self {
        assert_eq!(values.len(), measure.len());
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&i, &j| values[j].abs().total_cmp(&values[i].abs()).then(i.cmp(&j)));
        let total: f64 = measure.iter().sum();
        let mut ends = Vec::new();
        let mut levels = Vec::new();
        let mut acc = 0.0;
        for &i in &idx {
            let v = values[i].abs();
            if v == 0.0 {
                break;
            }
            acc += measure[i];
            if levels.last() == Some(&v) {
                *ends.last_mut().unwrap() = acc;
            } else {
                levels.push(v);
                ends.push(acc);
            }
        }
        StepFunction {
            ends,
            values: levels,
            total,
        }
    }

    pub fn total_measure(&self) -> f64 {
        self.total
    }

    pub fn ends(&self) -> &[f64] {
        &self.ends
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(start, end, value)` for every nonzero piece.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.ends
            .iter()
            .enumerate()
            .map(|(i, &e)| (if i == 0 { 0.0 } else { self.ends[i - 1] }, e, self.values[i]))
    }

    /// End of the support, `mu({f != 0})`.
    pub fn support(&self) -> f64 {
        self.ends.last().copied().unwrap_or(0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.ends.partition_point(|&e| e <= t);
        self.values.get(i).copied().unwrap_or(0.0)
    }

    /// Pointwise power of the step function, still a rearrangement.
    pub fn powf(&self, q: f64) -> Self {
        StepFunction {
            ends: self.ends.clone(),
            values: self.values.iter().map(|v| v.powf(q)).collect(),
            total: self.total,
        }
    }

    /// `int_0^t f*(s)^q ds`.
    pub fn integral_pow(&self, t: f64, q: f64) -> f64 {
        let mut acc = 0.0;
        for (a, b, v) in self.pieces() {
            if a >= t {
                break;
            }
            acc += (b.min(t) - a) * v.powf(q);
        }
        acc
    }

    pub fn integral(&self, t: f64) -> f64 {
        self.integral_pow(t, 1.0)
    }

    /// `f**(t) = (1/t) int_0^t f*`.
    pub fn double_star(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("t = {t} must be positive")));
        }
        Ok(self.integral(t) / t)
    }

    /// `(|f|^q)**(t)^{1/q}`, i.e. `|f|^{q**1/q}(t)`.
    pub fn qdouble_star_root(&self, q: f64, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("t = {t} must be positive")));
        }
        Ok((self.integral_pow(t, q) / t).powf(1.0 / q))
    }

    /// Lebesgue measure of `{t : f*(t) > level}`.
    pub fn superlevel_length(&self, level: f64) -> f64 {
        self.pieces()
            .filter(|&(_, _, v)| v > level)
            .map(|(a, b, _)| b - a)
            .sum()
    }

    /// CSV rows `t_start,t_end,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_start,t_end,value\n");
        for (a, b, v) in self.pieces() {
            let _ = writeln!(out, "{a},{b},{v}");
        }
        if self.support() < self.total {
            let _ = writeln!(out, "{},{},0", self.support(), self.total);
        }
        out
    }
}

/// `mu({x : |f(x)| > lambda})`.
pub fn distribution(space: &Space, f: &[f64], lambda: f64) -> f64 {
    f.iter()
        .zip(space.measure())
        .filter(|(v, _)| v.abs() > lambda)
        .map(|(_, m)| m)
        .sum()
}

pub fn decreasing_rearrangement(space: &Space, f: &[f64]) -> StepFunction {
    StepFunction::rearrange(f, space.measure())
}

pub fn double_star(sf: &StepFunction, t: f64) -> Result<f64> {
    sf.double_star(t)
}

/// `(|f|^{q*}(t), |f|^{q**1/q}(t))` using `(|f|^q)* = (f*)^q`.
pub fn qstar_powers(space: &Space, f: &[f64], q: f64, t: f64) -> Result<(f64, f64)> {
    if !(q >= 1.0) {
        return Err(Error::InvalidArgument(format!("q = {q} must be >= 1")));
    }
    let sf = decreasing_rearrangement(space, f);
    Ok((sf.eval(t).powf(q), sf.qdouble_star_root(q, t)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LorentzVariant {
    /// `(int (t^{1/p} f**(t))^r dt/t)^{1/r}`
    DoubleStar,
    /// `(int (t^{1/p} f*(t))^r dt/t)^{1/r}`
    Star,
}

/// Lorentz norm `||f||_{L(p,r)}` on `[0, mu(M)]`; `r = inf` is `sup_t t^{1/p} f*(t)`.
pub fn lorentz_norm(space: &Space, f: &[f64], p: f64, r: f64, variant: LorentzVariant) -> Result<f64> {
    lorentz_norm_of(&decreasing_rearrangement(space, f), p, r, variant)
}

pub fn lorentz_norm_of(sf: &StepFunction, p: f64, r: f64, variant: LorentzVariant) -> Result<f64> {
    if r.is_infinite() {
        if !(p >= 1.0) {
            return Err(Error::InvalidArgument(format!("p = {p} must be >= 1")));
        }
        let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
        return Ok(sf.pieces().map(|(_, b, v)| v * b.powf(inv_p)).fold(0.0, f64::max));
    }
    if !(r >= 1.0) {
        return Err(Error::InvalidArgument(format!("r = {r} must be >= 1")));
    }
    if p.is_infinite() {
        return Err(Error::InvalidArgument("L(inf, r) is trivial for r < inf".into()));
    }
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} <= 1 with r < inf diverges")));
    }
    let e = r / p;
    let sum = match variant {
        LorentzVariant::Star => sf
            .pieces()
            .map(|(a, b, v)| v.powf(r) * (b.powf(e) - a.powf(e)) / e)
            .sum::<f64>(),
        LorentzVariant::DoubleStar => {
            let mut acc = 0.0;
            let mut mass = 0.0;
            for (a, b, v) in sf.pieces() {
                if a == 0.0 {
                    // f** is constant on the first piece
                    acc += v.powf(r) * b.powf(e) / e;
                } else {
                    let m0 = mass;
                    acc += quad::integrate(
                        |t: f64| (m0 + v * (t - a)).powf(r) * t.powf(e - r - 1.0),
                        a,
                        b,
                        LORENTZ_TOL,
                    );
                }
                mass += v * (b - a);
            }
            let (a, b) = (sf.support(), sf.total_measure());
            if b > a && mass > 0.0 {
                let k = e - r;
                acc += mass.powf(r) * (b.powf(k) - a.powf(k)) / k;
            }
            acc
        }
    };
    Ok(sum.powf(1.0 / r))
}

/// `(int_0^s f*(u)^q du)^{1/q}`, equivalent to `K(f, s^{1/q}; L_q, L_inf)`
/// and equal to it when `q = 1`.
pub fn k_functional_lq_linf(space: &Space, f: &[f64], q: f64, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("s = {s} must be positive")));
    }
    if !(q >= 1.0) {
        return Err(Error::InvalidArgument(format!("q = {q} must be >= 1")));
    }
    Ok(decreasing_rearrangement(space, f).integral_pow(s, q).powf(1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p3() -> Space {
        Space::builtin("grid:3", 10).unwrap()
    }

    const F: [f64; 3] = [3.0, 1.0, 2.0];

    #[test]
    fn distribution_counts() {
        let s = p3();
        assert_eq!(distribution(&s, &F, 1.5), 2.0);
        assert_eq!(distribution(&s, &F, 0.0), 3.0);
        assert_eq!(distribution(&s, &[0.0; 3], 0.0), 0.0);
    }

    #[test]
    fn rearrangement_examples() {
        let sf = decreasing_rearrangement(&p3(), &F);
        assert_eq!(sf.values(), &[3.0, 2.0, 1.0]);
        assert_eq!(sf.ends(), &[1.0, 2.0, 3.0]);
        let c = decreasing_rearrangement(&p3(), &[-2.5; 3]);
        assert_eq!(c.values(), &[2.5]);
        assert_eq!(c.ends(), &[3.0]);
        let k2 = Space::parse("v a 2\nv b 1\ne a b 1\n", "k2", 10).unwrap();
        let sf = decreasing_rearrangement(&k2, &[1.0, 5.0]);
        assert_eq!(sf.values(), &[5.0, 1.0]);
        assert_eq!(sf.ends(), &[1.0, 3.0]);
        assert_eq!(sf.eval(0.999), 5.0);
        assert_eq!(sf.eval(1.0), 1.0);
        assert_eq!(sf.eval(3.0), 0.0);
    }

    #[test]
    fn double_star_examples() {
        let sf = decreasing_rearrangement(&p3(), &F);
        assert_eq!(sf.double_star(2.0).unwrap(), 2.5);
        assert_eq!(sf.double_star(3.0).unwrap(), 2.0);
        assert_eq!(sf.double_star(6.0).unwrap(), 1.0);
        assert!(sf.double_star(0.0).is_err());
        let c = decreasing_rearrangement(&p3(), &[4.0; 3]);
        assert_eq!(c.double_star(1.7).unwrap(), 4.0);
    }

    #[test]
    fn qstar_examples() {
        let s = p3();
        let (star, root) = qstar_powers(&s, &F, 2.0, 2.0).unwrap();
        assert_eq!(star, 1.0);
        assert!((root - (13.0f64 / 2.0).sqrt()).abs() < 1e-15);
        let (_, r1) = qstar_powers(&s, &F, 1.0, 2.0).unwrap();
        assert_eq!(r1, 2.5);
        let (_, rc) = qstar_powers(&s, &[1.5; 3], 3.0, 2.0).unwrap();
        assert!((rc - 1.5).abs() < 1e-15);
    }

    #[test]
    fn lorentz_examples() {
        let s = p3();
        let one = lorentz_norm(&s, &[1.0; 3], 2.0, f64::INFINITY, LorentzVariant::Star).unwrap();
        assert!((one - 3f64.sqrt()).abs() < 1e-15);
        assert!(lorentz_norm(&s, &F, f64::INFINITY, 2.0, LorentzVariant::DoubleStar).is_err());
        assert!(lorentz_norm(&s, &F, 1.0, 2.0, LorentzVariant::Star).is_err());
        let ind = lorentz_norm(&s, &[1.0, 0.0, 0.0], 2.0, 2.0, LorentzVariant::Star).unwrap();
        assert!((ind - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lorentz_double_star_matches_fine_quadrature() {
        let s = p3();
        let sf = decreasing_rearrangement(&s, &F);
        let (p, r) = (1.5, 2.5);
        let got = lorentz_norm_of(&sf, p, r, LorentzVariant::DoubleStar).unwrap();
        // midpoint rule in log t on the exact f**
        let n = 400_000;
        let (lo, hi) = (1e-12f64.ln(), 3f64.ln());
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let t = (lo + (i as f64 + 0.5) * h).exp();
            acc += (sf.double_star(t).unwrap() * t.powf(1.0 / p)).powf(r) * h;
        }
        // tail below 1e-12 is v^r t^{r/p}/(r/p), negligible
        let want = acc.powf(1.0 / r);
        assert!((got - want).abs() < 1e-7 * want, "{got} vs {want}");
    }

    #[test]
    fn k_functional_examples() {
        let s = p3();
        assert_eq!(k_functional_lq_linf(&s, &F, 1.0, 2.0).unwrap(), 5.0);
        assert_eq!(k_functional_lq_linf(&s, &[0.0; 3], 1.0, 2.0).unwrap(), 0.0);
        assert_eq!(k_functional_lq_linf(&s, &F, 2.0, 1.0).unwrap(), 3.0);
        assert!(k_functional_lq_linf(&s, &F, 1.0, 0.0).is_err());
    }

    /// `inf_c sum mu (|f| - c)_+ + s c` over the candidate thresholds `{0} u {|f(x)|}`.
    fn k1_brute(f: &[f64], mu: &[f64], s: f64) -> f64 {
        std::iter::once(0.0)
            .chain(f.iter().map(|v| v.abs()))
            .map(|c| f.iter().zip(mu).map(|(v, m)| m * (v.abs() - c).max(0.0)).sum::<f64>() + s * c)
            .fold(f64::INFINITY, f64::min)
    }

    /// Sorted list of (value, measure) atoms, the independent oracle for f*.
    fn sort_oracle(f: &[f64], mu: &[f64], t: f64) -> f64 {
        let mut pairs: Vec<(f64, f64)> = f.iter().map(|v| v.abs()).zip(mu.iter().copied()).collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut acc = 0.0;
        for (v, m) in pairs {
            acc += m;
            if t < acc {
                return v;
            }
        }
        0.0
    }

    proptest! {
        #[test]
        fn rearrangement_invariants(
            vals in proptest::collection::vec((-5i32..6, 1u32..4), 1..30),
            probe in 0.0f64..1.0,
        ) {
            let f: Vec<f64> = vals.iter().map(|&(v, _)| v as f64 * 0.5).collect();
            let mu: Vec<f64> = vals.iter().map(|&(_, m)| m as f64 * 0.25).collect();
            let sf = StepFunction::rearrange(&f, &mu);
            let total: f64 = mu.iter().sum();
            let t = probe * total * 1.1;
            prop_assert_eq!(sf.eval(t), sort_oracle(&f, &mu, t));
            let l1: f64 = f.iter().zip(&mu).map(|(v, m)| v.abs() * m).sum();
            prop_assert!((sf.integral(total) - l1).abs() <= 1e-12 * l1.max(1.0));
            for lvl in [0.0, 0.5, 1.0, 1.75] {
                let dist: f64 = f.iter().zip(&mu).filter(|(v, _)| v.abs() > lvl).map(|(_, m)| m).sum();
                prop_assert!((sf.superlevel_length(lvl) - dist).abs() < 1e-12);
            }
            if t > 0.0 {
                prop_assert!(sf.double_star(t).unwrap() >= sf.eval(t) - 1e-12);
                prop_assert!((sf.integral_pow(t, 1.0) - k1_brute(&f, &mu, t)).abs() < 1e-9);
            }
            prop_assert_eq!(sf.eval(total), 0.0);
        }
    }
}
