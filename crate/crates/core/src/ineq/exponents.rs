use serde::Serialize;

use crate::error::{Error, Result};

const REL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentSet {
    pub p: f64,
    pub l: f64,
    pub theta: f64,
    pub alpha: f64,
    pub nu: Option<f64>,
    /// `1/p* = 1/p - 1/nu`.
    pub p_star: Option<f64>,
}

/// `theta = p/l`, `alpha = p/(p - l) = theta/(theta - 1)`.
pub fn exponents(p: f64, l: f64, nu: Option<f64>) -> Result<ExponentSet> {
    if !(p >= 1.0 && p < l && l.is_finite()) {
        return Err(Error::ExponentRelation(format!(
            "need 1 <= p < l < inf, got p={p}, l={l}"
        )));
    }
    let p_star = nu.map(|nu| sobolev_exponent(p, nu)).transpose()?;
    Ok(ExponentSet {
        p,
        l,
        theta: p / l,
        alpha: p / (p - l),
        nu,
        p_star,
    })
}

/// `p*` with `1/p* = 1/p - 1/nu`; infinite when `p = nu`.
pub fn sobolev_exponent(p: f64, nu: f64) -> Result<f64> {
    if !(p >= 1.0 && nu >= p) {
        return Err(Error::ExponentRelation(format!(
            "need 1 <= p <= nu, got p={p}, nu={nu}"
        )));
    }
    if p == nu {
        return Ok(f64::INFINITY);
    }
    Ok(p * nu / (nu - p))
}

/// Parameters of the Lorentz Gagliardo-Nirenberg inequality
/// `||f||_{L(r,m)} <= C || |grad f| ||_{L(p,m0)}^{1-theta} ||f||_{L(l,m1)}^theta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LorentzParams {
    pub theta: f64,
    pub p: f64,
    pub l: f64,
    pub m0: f64,
    pub m1: f64,
    pub sigma: f64,
    pub q: f64,
    pub r: f64,
    pub m: f64,
}

impl LorentzParams {
    /// The `theta = 0` case: `m0 = m = p`, `r = p*`.
    pub fn theta_zero(p: f64, sigma: f64, q: f64) -> Result<Self> {
        let p_star = sobolev_exponent(p, sigma)?;
        let lp = LorentzParams {
            theta: 0.0,
            p,
            l: p_star,
            m0: p,
            m1: p,
            sigma,
            q,
            r: p_star,
            m: p,
        };
        lp.validate()?;
        Ok(lp)
    }

    /// Fills `r` and `m` from the exponent relations.
    pub fn derived(theta: f64, p: f64, l: f64, m0: f64, m1: f64, sigma: f64, q: f64) -> Result<Self> {
        let p_star = sobolev_exponent(p, sigma)?;
        let lp = LorentzParams {
            theta,
            p,
            l,
            m0,
            m1,
            sigma,
            q,
            r: 1.0 / ((1.0 - theta) / p_star + theta / l),
            m: 1.0 / ((1.0 - theta) / m0 + theta / m1),
        };
        lp.validate()?;
        Ok(lp)
    }

    pub fn p_star(&self) -> f64 {
        sobolev_exponent(self.p, self.sigma).unwrap_or(f64::NAN)
    }

    /// Checks every relation and reports all failures at once.
    pub fn validate(&self) -> Result<()> {
        let mut failed = Vec::new();
        if !(0.0..=1.0).contains(&self.theta) {
            failed.push(format!("0 <= theta <= 1 (theta = {})", self.theta));
        }
        if !(self.q >= 1.0 && self.p > self.q) {
            failed.push(format!("p > q >= 1 (p = {}, q = {})", self.p, self.q));
        }
        if !(self.sigma > self.p) {
            failed.push(format!(
                "sigma > p for a finite p* (sigma = {}, p = {})",
                self.sigma, self.p
            ));
        }
        if !(self.m0 >= self.q) {
            failed.push(format!("m0 >= q (m0 = {}, q = {})", self.m0, self.q));
        }
        if !(self.l > 1.0 && self.r > 1.0 && self.m >= 1.0 && self.m1 >= 1.0) {
            failed.push("l, r > 1 and m, m1 >= 1".to_string());
        }
        if failed.is_empty() {
            let inv_r = (1.0 - self.theta) / self.p_star() + self.theta / self.l;
            if !close(1.0 / self.r, inv_r) {
                failed.push(format!("1/r = (1-theta)/p* + theta/l ({} vs {inv_r})", 1.0 / self.r));
            }
            let inv_m = (1.0 - self.theta) / self.m0 + self.theta / self.m1;
            if !close(1.0 / self.m, inv_m) {
                failed.push(format!("1/m = (1-theta)/m0 + theta/m1 ({} vs {inv_m})", 1.0 / self.m));
            }
        }
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::ExponentRelation(failed.join("; ")))
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_examples() {
        let e = exponents(1.0, 2.0, None).unwrap();
        assert_eq!((e.theta, e.alpha), (0.5, -1.0));
        let e = exponents(2.0, 4.0, None).unwrap();
        assert_eq!((e.theta, e.alpha), (0.5, -1.0));
        assert_eq!(exponents(1.0, 3.0, Some(2.0)).unwrap().p_star, Some(2.0));
        assert_eq!(sobolev_exponent(1.0, 2.0).unwrap(), 2.0);
        assert!(exponents(2.0, 2.0, None).is_err());
        assert!(exponents(0.5, 2.0, None).is_err());
        assert!(sobolev_exponent(3.0, 2.0).is_err());
    }

    #[test]
    fn alpha_matches_theta_form() {
        for (p, l) in [(1.0, 2.0), (1.5, 4.0), (2.0, 7.0)] {
            let e = exponents(p, l, None).unwrap();
            assert!((e.alpha - e.theta / (e.theta - 1.0)).abs() < 1e-15);
            assert!(e.theta > 0.0 && e.theta < 1.0 && e.alpha < 0.0);
        }
    }

    #[test]
    fn lorentz_validator() {
        let z = LorentzParams::theta_zero(1.5, 2.0, 1.0).unwrap();
        assert_eq!((z.m0, z.m, z.r), (1.5, 1.5, 6.0));
        let d = LorentzParams::derived(0.5, 1.5, 3.0, 2.0, 2.0, 2.0, 1.0).unwrap();
        assert!((1.0 / d.r - (0.5 / 6.0 + 0.5 / 3.0)).abs() < 1e-15);
        let mut bad = d;
        bad.r *= 1.01;
        let msg = bad.validate().unwrap_err().to_string();
        assert!(msg.contains("1/r = (1-theta)/p* + theta/l"), "{msg}");
        let mut bad = d;
        bad.m = 5.0;
        assert!(bad.validate().unwrap_err().to_string().contains("1/m"));
        assert!(LorentzParams::theta_zero(1.0, 2.0, 1.0).is_err());
    }
}
