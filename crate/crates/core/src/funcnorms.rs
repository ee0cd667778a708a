//! Gradient and Hessian moduli, Sobolev, Besov and Morrey norms, the
//! maximal function and the pointwise heat supremum.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heat::Semigroup;
use crate::mm_space::Space;

pub const MEAN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GradientMode {
    /// `(sum_{y~x} w (f(y) - f(x))^2)^{1/2}`
    #[default]
    L2,
    /// `max_{y~x} w^{1/2} |f(y) - f(x)|`
    Max,
}

pub fn gradient_modulus(space: &Space, f: &[f64], mode: GradientMode) -> Vec<f64> {
    (0..space.len())
        .map(|x| {
            let nb = space.neighbors(x).iter();
            match mode {
                GradientMode::L2 => nb.map(|&(y, w)| w * (f[y] - f[x]).powi(2)).sum::<f64>().sqrt(),
                GradientMode::Max => nb.map(|&(y, w)| w.sqrt() * (f[y] - f[x]).abs()).fold(0.0, f64::max),
            }
        })
        .collect()
}

/// `||f||_{L_p(mu)}` for `p` in `[1, inf]`; `p < 1` gives the quasi-norm.
pub fn lp_norm_weighted(f: &[f64], mu: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return f.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let s: f64 = f.iter().zip(mu).map(|(v, m)| m * (v.abs() / scale).powf(p)).sum();
    scale * s.powf(1.0 / p)
}

pub fn lp_norm(space: &Space, f: &[f64], p: f64) -> f64 {
    lp_norm_weighted(f, space.measure(), p)
}

/// `||f||_p + || |grad f| ||_p`, or only the gradient term when `homogeneous`.
pub fn sobolev_norm(space: &Space, f: &[f64], p: f64, mode: GradientMode, homogeneous: bool) -> f64 {
    let g = lp_norm(space, &gradient_modulus(space, f, mode), p);
    if homogeneous {
        g
    } else {
        lp_norm(space, f, p) + g
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BesovMode {
    /// `sup_t t^{-alpha/2} || P_t (f - P_t f) ||_inf`
    Seminorm,
    /// `sup_t t^{-alpha/2} || P_t f ||_inf`, mean-zero input only
    Raw,
}

/// Fails when `|mean f|` exceeds the tolerance relative to `max(1, ||f||_inf)`.
pub fn require_mean_zero(space: &Space, f: &[f64]) -> Result<()> {
    let mean = space.mean(f);
    let scale = lp_norm_weighted(f, space.measure(), f64::INFINITY).max(1.0);
    if mean.abs() > MEAN_TOL * scale {
        return Err(Error::NonzeroMean { mean });
    }
    Ok(())
}

/// Besov norm of order `alpha < 0` over the semigroup's time grid; returns
/// the value and the maximizing time.
pub fn besov_norm(sg: &Semigroup, f: &[f64], alpha: f64, mode: BesovMode) -> Result<(f64, f64)> {
    if !(alpha < 0.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be negative")));
    }
    if mode == BesovMode::Raw {
        require_mean_zero(sg.space(), f)?;
    }
    let grid = sg.t_grid();
    let mut best = (0.0, grid[0]);
    let coeffs = if sg.is_dense() { Some(sg.coefficients(f)?) } else { None };
    for &t in grid {
        let v = match (&coeffs, mode) {
            (Some(c), BesovMode::Raw) => sg.synthesize(c, t)?,
            (Some(c), BesovMode::Seminorm) => sg.synthesize_with(c, |l| (l * t).exp() - (2.0 * l * t).exp())?,
            (None, BesovMode::Raw) => sg.apply(f, t)?,
            (None, BesovMode::Seminorm) => {
                let pt = sg.apply(f, t)?;
                let d: Vec<f64> = f.iter().zip(&pt).map(|(a, b)| a - b).collect();
                sg.apply(&d, t)?
            }
        };
        let val = t.powf(-alpha / 2.0) * lp_norm_weighted(&v, &[], f64::INFINITY);
        if val > best.0 {
            best = (val, t);
        }
    }
    Ok(best)
}

/// `max_{x, 1<=r<=r_max} r^{-alpha} |f_{B(x,r)}|` with the maximizing `(x, r)`.
pub fn morrey_norm(space: &Space, f: &[f64], alpha: f64, r_max: usize) -> Result<(f64, (usize, usize))> {
    if !(alpha < 0.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be negative")));
    }
    if r_max < 1 || r_max > space.diameter().max(1) {
        return Err(Error::InvalidArgument(format!(
            "r_max = {r_max} outside [1, {}]",
            space.diameter()
        )));
    }
    let mut best = (0.0, (0, 1));
    for r in 1..=r_max {
        let w = (r as f64).powf(-alpha);
        for x in 0..space.len() {
            let v = w * space.ball_average(f, x, r).abs();
            if v > best.0 {
                best = (v, (x, r));
            }
        }
    }
    Ok(best)
}

/// `Mf(x) = max_r (1/mu(B(x,r))) int_{B(x,r)} |f|`.
pub fn maximal_function(space: &Space, f: &[f64]) -> Vec<f64> {
    let abs: Vec<f64> = f.iter().map(|v| v.abs()).collect();
    let mu = space.measure();
    let balls = space.balls();
    (0..space.len())
        .map(|x| {
            // balls grow along the BFS order, so running sums give every radius
            let order = balls.ball(x, space.diameter());
            let mut acc = 0.0;
            let mut k = 0;
            let mut best = 0.0f64;
            for r in 0..=space.diameter() {
                let end = balls.len(x, r);
                while k < end {
                    let y = order[k] as usize;
                    acc += abs[y] * mu[y];
                    k += 1;
                }
                best = best.max(acc / balls.measure(x, r));
            }
            best
        })
        .collect()
}

/// Frobenius norm of the coordinate Hessian stencil on grid-family spaces.
pub fn hessian_modulus(space: &Space, f: &[f64]) -> Result<Vec<f64>> {
    let grid = space.grid().ok_or(Error::NoCoordinates)?;
    let d = grid.dims.len();
    Ok((0..space.len())
        .map(|x| {
            let mut s = 0.0;
            for i in 0..d {
                if let (Some(a), Some(b)) = (grid.step(x, i, 1), grid.step(x, i, -1)) {
                    s += (f[a] - 2.0 * f[x] + f[b]).powi(2);
                }
                for j in 0..d {
                    if i == j {
                        continue;
                    }
                    let xi = grid.step(x, i, 1);
                    let xj = grid.step(x, j, 1);
                    let xij = xi.and_then(|y| grid.step(y, j, 1));
                    if let (Some(a), Some(b), Some(c)) = (xi, xj, xij) {
                        s += (f[c] - f[a] - f[b] + f[x]).powi(2);
                    }
                }
            }
            s.sqrt()
        })
        .collect())
}

/// Pointwise `max_t t^{-alpha/2} |P_t f(x)|` over the time grid.
pub fn triebel_sup(sg: &Semigroup, f: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha < 0.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be negative")));
    }
    let mut out = vec![0.0f64; f.len()];
    for (t, v) in sg.t_grid().iter().zip(sg.apply_many(f, sg.t_grid())?) {
        let w = t.powf(-alpha / 2.0);
        for (o, a) in out.iter_mut().zip(v) {
            *o = o.max(w * a.abs());
        }
    }
    Ok(out)
}

/// CSV rows `vertex_id,value`.
pub fn vertex_csv(space: &Space, f: &[f64]) -> String {
    let mut out = String::from("vertex_id,value\n");
    for (id, v) in space.ids().iter().zip(f) {
        let _ = writeln!(out, "{id},{v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::{doubling_grid, HeatOptions};
    use proptest::prelude::*;
    use std::sync::Arc;

    const F: [f64; 3] = [3.0, 1.0, 2.0];

    fn p3() -> Space {
        Space::builtin("grid:3", 10).unwrap()
    }

    #[test]
    fn gradient_examples() {
        let s = p3();
        let l2 = gradient_modulus(&s, &F, GradientMode::L2);
        assert_eq!(l2, vec![2.0, 5f64.sqrt(), 1.0]);
        assert_eq!(gradient_modulus(&s, &F, GradientMode::Max), vec![2.0, 2.0, 1.0]);
        assert_eq!(gradient_modulus(&s, &[7.0; 3], GradientMode::L2), vec![0.0; 3]);
    }

    #[test]
    fn sobolev_examples() {
        let s = p3();
        let v = sobolev_norm(&s, &F, 1.0, GradientMode::L2, true);
        assert!((v - (3.0 + 5f64.sqrt())).abs() < 1e-14);
        assert_eq!(sobolev_norm(&s, &[2.0; 3], 2.0, GradientMode::L2, true), 0.0);
        let inf = sobolev_norm(&s, &F, f64::INFINITY, GradientMode::L2, false);
        assert_eq!(inf, 3.0 + 5f64.sqrt());
    }

    #[test]
    fn besov_k2_closed_form() {
        let sp = Arc::new(Space::builtin("grid:2", 10).unwrap());
        let sg = Semigroup::with_defaults(sp).unwrap();
        let (v, t) = besov_norm(&sg, &[1.0, -1.0], -1.0, BesovMode::Seminorm).unwrap();
        let want = sg
            .t_grid()
            .iter()
            .map(|t| t.sqrt() * ((-2.0 * t).exp() - (-4.0 * t).exp()))
            .fold(0.0, f64::max);
        assert!((v - want).abs() < 1e-14);
        assert!(sg.t_grid().contains(&t));
        let (c, _) = besov_norm(&sg, &[2.0, 2.0], -1.0, BesovMode::Seminorm).unwrap();
        assert!(c < 1e-15);
        assert!(matches!(
            besov_norm(&sg, &[1.0, 0.0], -1.0, BesovMode::Raw),
            Err(Error::NonzeroMean { .. })
        ));
    }

    #[test]
    fn besov_krylov_agrees() {
        let sp = Arc::new(Space::builtin("cycle:9", 100).unwrap());
        let dense = Semigroup::with_defaults(sp.clone()).unwrap();
        let sparse = Semigroup::new(
            sp,
            &HeatOptions {
                dense_cap: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let f: Vec<f64> = (0..9).map(|i| (i as f64 * 0.9).cos()).collect();
        let a = besov_norm(&dense, &f, -1.5, BesovMode::Seminorm).unwrap();
        let b = besov_norm(&sparse, &f, -1.5, BesovMode::Seminorm).unwrap();
        assert!((a.0 - b.0).abs() < 1e-9);
    }

    #[test]
    fn morrey_p3() {
        let s = p3();
        let (v, w) = morrey_norm(&s, &F, -1.0, 2).unwrap();
        // six (x, r) pairs by hand: r=1 gives 2, 2, 1.5; r=2 gives 2*2 = 4 everywhere
        assert_eq!(v, 4.0);
        assert_eq!(w.1, 2);
        let (v1, _) = morrey_norm(&s, &F, -1.0, 1).unwrap();
        assert_eq!(v1, 2.0);
        assert_eq!(morrey_norm(&s, &[0.0; 3], -1.0, 2).unwrap().0, 0.0);
        assert!(morrey_norm(&s, &F, -1.0, 3).is_err());
    }

    #[test]
    fn maximal_p3() {
        let s = p3();
        assert_eq!(maximal_function(&s, &[3.0, 0.0, 0.0]), vec![3.0, 1.0, 1.0]);
        assert_eq!(maximal_function(&s, &[-2.0; 3]), vec![2.0; 3]);
    }

    #[test]
    fn hessian_examples() {
        let g5 = Space::builtin("grid:5", 10).unwrap();
        let h = hessian_modulus(&g5, &[0.0, 1.0, 4.0, 9.0, 16.0]).unwrap();
        assert_eq!(h, vec![0.0, 2.0, 2.0, 2.0, 0.0]);
        assert!(matches!(hessian_modulus(&p3_file(), &F), Err(Error::NoCoordinates)));
        let t = Space::builtin("torus:4x4", 100).unwrap();
        let mut f = vec![0.0; 16];
        f[0] = 1.0;
        let h = hessian_modulus(&t, &f).unwrap();
        let grid = t.grid().unwrap();
        // stencil oracle: at x, D_ii hits x, x+-e_i; D_ij hits x, x+e_i, x+e_j, x+e_i+e_j
        for x in 0..16 {
            let c = grid.coords(x);
            let (a, b) = (c[0] as i64, c[1] as i64);
            let at = |da: i64, db: i64| ((a + da).rem_euclid(4) == 0 && (b + db).rem_euclid(4) == 0) as i64 as f64;
            let d00 = at(1, 0) - 2.0 * at(0, 0) + at(-1, 0);
            let d11 = at(0, 1) - 2.0 * at(0, 0) + at(0, -1);
            let d01 = at(1, 1) - at(1, 0) - at(0, 1) + at(0, 0);
            let want = (d00 * d00 + d11 * d11 + 2.0 * d01 * d01).sqrt();
            assert!((h[x] - want).abs() < 1e-15, "x={x}");
        }
        assert_eq!(h[0], (4.0f64 + 4.0 + 2.0).sqrt());
    }

    fn p3_file() -> Space {
        Space::parse("v a 1\nv b 1\nv c 1\ne a b 1\ne b c 1\n", "p3", 10).unwrap()
    }

    #[test]
    fn triebel_k2() {
        let sp = Arc::new(Space::builtin("grid:2", 10).unwrap());
        let sg = Semigroup::with_defaults(sp).unwrap();
        let v = triebel_sup(&sg, &[1.0, -1.0], -1.0).unwrap();
        let want = sg
            .t_grid()
            .iter()
            .map(|t| t.sqrt() * (-2.0 * t).exp())
            .fold(0.0, f64::max);
        assert!((v[0] - want).abs() < 1e-15 && (v[1] - want).abs() < 1e-15);
        // the grid 1/16 .. contains 1/4, the continuous maximizer
        assert!((want - 0.5 * (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(triebel_sup(&sg, &[0.0, 0.0], -1.0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn raw_and_seminorm_equivalence_k2() {
        let sp = Arc::new(Space::builtin("cycle:6", 10).unwrap());
        let sg = Semigroup::new(
            sp,
            &HeatOptions {
                t_max: Some(4096.0),
                ..Default::default()
            },
        )
        .unwrap();
        let f = [1.0, -2.0, 0.5, 0.0, 1.5, -1.0];
        for alpha in [-1.0f64, -2.0] {
            let (semi, _) = besov_norm(&sg, &f, alpha, BesovMode::Seminorm).unwrap();
            let (raw, _) = besov_norm(&sg, &f, alpha, BesovMode::Raw).unwrap();
            let k = 2f64.powf(alpha / 2.0);
            assert!(semi <= (1.0 + k) * raw + 1e-9);
            assert!(raw <= semi / (1.0 - k) + 1e-9);
        }
        assert_eq!(doubling_grid(1.0 / 16.0, 4096.0, 1).unwrap(), sg.t_grid());
    }

    proptest! {
        #[test]
        fn gradient_mode_sandwich(vals in proptest::collection::vec(-10.0f64..10.0, 16)) {
            let t = Space::builtin("torus:4x4", 100).unwrap();
            let l2 = gradient_modulus(&t, &vals, GradientMode::L2);
            let mx = gradient_modulus(&t, &vals, GradientMode::Max);
            let k = (t.max_degree() as f64).sqrt();
            for (a, b) in l2.iter().zip(&mx) {
                prop_assert!(*b <= *a * (1.0 + 1e-15));
                prop_assert!(*a <= k * *b * (1.0 + 1e-15));
            }
        }

        #[test]
        fn besov_seminorm_is_a_seminorm(
            a in proptest::collection::vec(-3.0f64..3.0, 8),
            b in proptest::collection::vec(-3.0f64..3.0, 8),
            c in -4.0f64..4.0,
        ) {
            let sp = Arc::new(Space::builtin("cycle:8", 10).unwrap());
            let sg = Semigroup::with_defaults(sp).unwrap();
            let n = |f: &[f64]| besov_norm(&sg, f, -1.0, BesovMode::Seminorm).unwrap().0;
            let ca: Vec<f64> = a.iter().map(|v| c * v).collect();
            prop_assert!((n(&ca) - c.abs() * n(&a)).abs() <= 1e-10 * (1.0 + n(&ca)));
            let s: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            prop_assert!(n(&s) <= n(&a) + n(&b) + 1e-10);
        }
    }
}
