//! Lamé functions of the second kind.
//!
//! `F(lambda) = (2n+1) E(lambda) I(lambda)` with
//! `I(lambda) = int_lambda^inf ds / (E(s)^2 sqrt(s^2-k^2) sqrt(s^2-h^2))`,
//! evaluated by adaptive quadrature.

use std::cell::Cell;
use std::collections::HashMap;
use std::sync::RwLock;

use serde::Serialize;

use crate::coords::Sign;
use crate::error::{Error, Result};
use crate::lame1::LameFunction;
use crate::numerics::{adaptive_quad_with, QuadOptions};

/// Default relative tolerance for `I`.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Below `NEAR_SINGULAR * k` the integral is split at `SPLIT_POINT * k`.
const NEAR_SINGULAR: f64 = 1.01;
const SPLIT_POINT: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondKindEval {
    pub i_value: f64,
    pub f_value: f64,
    pub di_dlambda: f64,
    pub df_dlambda: f64,
}

fn quad_options(rel_tol: f64) -> QuadOptions {
    // I can be extremely small for high degree, so only relative accuracy counts.
    QuadOptions {
        rel_tol,
        abs_tol: 0.0,
        ..QuadOptions::default()
    }
}

/// `I(|lambda|)`; requires `|lambda| > k`.
pub fn eval_i(f: &LameFunction, lambda: f64, rel_tol: f64) -> Result<f64> {
    let lam = lambda.abs();
    let (h2, k) = (f.system.h2(), f.system.k());
    if !lam.is_finite() || lam <= k * (1.0 + 1e-12) {
        return Err(Error::SingularLowerLimit { lambda, k });
    }
    let zero_at: Cell<Option<f64>> = Cell::new(None);
    let e2 = |s: f64| {
        let e = f.eval(s, Sign::Plus, Sign::Plus);
        if e == 0.0 && zero_at.get().is_none() {
            zero_at.set(Some(s));
        }
        e * e
    };
    let opts = quad_options(rel_tol);

    let value = if lam <= NEAR_SINGULAR * k {
        let split = SPLIT_POINT * k;
        // s = k cosh(t) cancels sqrt(s^2 - k^2) against ds.
        let near = adaptive_quad_with(
            |t: f64| {
                let s = k * t.cosh();
                let d = e2(s) * (s * s - h2).sqrt();
                if d.is_finite() && d > 0.0 {
                    1.0 / d
                } else {
                    0.0
                }
            },
            (lam / k).acosh(),
            SPLIT_POINT.acosh(),
            &opts,
        )?;
        near.value + tail(f, split, &opts, &e2)?
    } else {
        tail(f, lam, &opts, &e2)?
    };
    if let Some(s) = zero_at.get() {
        return Err(Error::ZeroOnIntegrationPath {
            n: f.n(),
            p: f.p,
            s,
        });
    }
    Ok(value)
}

fn tail(f: &LameFunction, lo: f64, opts: &QuadOptions, e2: &dyn Fn(f64) -> f64) -> Result<f64> {
    let (h2, k2) = (f.system.h2(), f.system.k2());
    let r = adaptive_quad_with(
        |s: f64| {
            let d = e2(s) * (s * s - k2).sqrt() * (s * s - h2).sqrt();
            // Overflow far out on the ray means the integrand is negligible.
            if d.is_finite() && d > 0.0 {
                1.0 / d
            } else {
                0.0
            }
        },
        lo,
        f64::INFINITY,
        opts,
    )?;
    Ok(r.value)
}

/// `dI/dlambda`, a single evaluation of the integrand.
pub fn eval_i_derivative(f: &LameFunction, lambda: f64) -> Result<f64> {
    let lam = lambda.abs();
    let (h2, k2, k) = (f.system.h2(), f.system.k2(), f.system.k());
    if lam <= k * (1.0 + 1e-12) {
        return Err(Error::SingularLowerLimit { lambda, k });
    }
    let e = f.eval(lam, Sign::Plus, Sign::Plus);
    let d = e * e * (lam * lam - k2).sqrt() * (lam * lam - h2).sqrt();
    Ok(-Sign::of(lambda).value() / d)
}

/// Second-kind function and derivatives with all root-factor signs positive.
pub fn eval_f(f: &LameFunction, lambda: f64) -> Result<SecondKindEval> {
    eval_f_signed(f, lambda, Sign::Plus, Sign::Plus, DEFAULT_REL_TOL)
}

/// Second-kind function at a signed `lambda` with octant signs for `E`.
pub fn eval_f_signed(
    f: &LameFunction,
    lambda: f64,
    s_mu: Sign,
    s_nu: Sign,
    rel_tol: f64,
) -> Result<SecondKindEval> {
    let i = eval_i(f, lambda, rel_tol)?;
    assemble(f, lambda, s_mu, s_nu, i)
}

fn assemble(f: &LameFunction, lambda: f64, s_mu: Sign, s_nu: Sign, i: f64) -> Result<SecondKindEval> {
    let (e, de) = f.eval_with_derivative(lambda, s_mu, s_nu)?;
    let di = eval_i_derivative(f, lambda)?;
    let w = (2 * f.n() + 1) as f64;
    Ok(SecondKindEval {
        i_value: i,
        f_value: w * e * i,
        di_dlambda: di,
        df_dlambda: w * (de * i + e * di),
    })
}

/// Memo of `I` values keyed by `(n, p, |lambda|)`.
#[derive(Debug, Default)]
pub struct SecondKindCache {
    rel_tol: f64,
    cache: RwLock<HashMap<(usize, usize, u64), f64>>,
}

impl SecondKindCache {
    pub fn new(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol
    }

    pub fn eval_i(&self, f: &LameFunction, lambda: f64) -> Result<f64> {
        let key = (f.n(), f.p, lambda.abs().to_bits());
        if let Some(&v) = self.cache.read().expect("I cache poisoned").get(&key) {
            return Ok(v);
        }
        let v = eval_i(f, lambda, self.rel_tol)?;
        self.cache.write().expect("I cache poisoned").insert(key, v);
        Ok(v)
    }

    pub fn eval_f(&self, f: &LameFunction, lambda: f64, s_mu: Sign, s_nu: Sign) -> Result<SecondKindEval> {
        let i = self.eval_i(f, lambda)?;
        assemble(f, lambda, s_mu, s_nu, i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coords::EllipsoidSystem;
    use approx::assert_relative_eq;

    fn sys() -> EllipsoidSystem {
        EllipsoidSystem::new(2.0, 1.5, 1.0).unwrap()
    }

    fn lame(n: usize, p: usize) -> LameFunction {
        LameFunction::new(&sys(), n, p).unwrap()
    }

    #[test]
    fn monopole_against_midpoint_brute_force() {
        // s = 2 / t on (0, 1], composite midpoint with 10^6 cells.
        let (h2, k2) = (1.75, 3.0);
        let cells = 1_000_000;
        let dt = 1.0 / cells as f64;
        let brute: f64 = (0..cells)
            .map(|i| {
                let t = (i as f64 + 0.5) * dt;
                let s = 2.0 / t;
                2.0 / (t * t) / ((s * s - k2).sqrt() * (s * s - h2).sqrt())
            })
            .sum::<f64>()
            * dt;
        let i = eval_i(&lame(0, 1), 2.0, 1e-10).unwrap();
        assert_relative_eq!(i, brute, max_relative = 1e-8);
    }

    #[test]
    fn monopole_far_field() {
        let i = eval_i(&lame(0, 1), 1e4, 1e-10).unwrap();
        assert!((i * 1e4 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn asymptotic_decay() {
        for p in 1..=3 {
            let f = lame(1, p);
            let ratio = eval_i(&f, 200.0, 1e-10).unwrap() / eval_i(&f, 100.0, 1e-10).unwrap();
            assert!((ratio / 0.125 - 1.0).abs() < 0.02, "p={p} ratio {ratio}");
            let fr = eval_f(&f, 200.0).unwrap().f_value / eval_f(&f, 100.0).unwrap().f_value;
            assert!((fr / 0.25 - 1.0).abs() < 0.02, "p={p} ratio {fr}");
        }
    }

    #[test]
    fn derivative_closed_form_and_difference() {
        let f = lame(0, 1);
        let d = eval_i_derivative(&f, 2.5).unwrap();
        let closed = -1.0 / ((2.5f64 * 2.5 - 3.0).sqrt() * (2.5f64 * 2.5 - 1.75).sqrt());
        assert_relative_eq!(d, closed, max_relative = 1e-14);
        let step = 1e-6;
        let fd = (eval_i(&f, 2.5 + step, 1e-13).unwrap() - eval_i(&f, 2.5 - step, 1e-13).unwrap()) / (2.0 * step);
        assert_relative_eq!(d, fd, max_relative = 1e-6);
        let e = eval_f(&f, 2.5).unwrap();
        assert_relative_eq!(e.f_value, e.i_value);
    }

    #[test]
    fn second_kind_derivative_for_higher_degree() {
        for p in 1..=5 {
            let f = lame(2, p);
            let step = 1e-5;
            let up = eval_f_signed(&f, 2.4 + step, Sign::Plus, Sign::Plus, 1e-13).unwrap();
            let dn = eval_f_signed(&f, 2.4 - step, Sign::Plus, Sign::Plus, 1e-13).unwrap();
            let mid = eval_f(&f, 2.4).unwrap();
            let fd = (up.f_value - dn.f_value) / (2.0 * step);
            assert_relative_eq!(mid.df_dlambda, fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn near_singular_split_agrees() {
        // Splitting must be continuous across the 1.01 k switch.
        let s = sys();
        let f = lame(2, 1);
        let lo = eval_i(&f, 1.0099 * s.k(), 1e-12).unwrap();
        let hi = eval_i(&f, 1.0101 * s.k(), 1e-12).unwrap();
        let d = eval_i_derivative(&f, 1.01 * s.k()).unwrap();
        assert_relative_eq!(hi - lo, d * 0.0002 * s.k(), max_relative = 1e-4);
        assert!(eval_i(&f, 1.000_001 * s.k(), 1e-10).unwrap().is_finite());
    }

    #[test]
    fn monotone_and_guarded() {
        let f = lame(3, 4);
        let vals: Vec<f64> = [1.8, 2.0, 2.5, 4.0, 10.0]
            .iter()
            .map(|&l| eval_i(&f, l, 1e-10).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[0] > w[1]));
        assert!(matches!(eval_i(&f, sys().k(), 1e-10), Err(Error::SingularLowerLimit { .. })));
        assert!(matches!(eval_i(&f, 1.0, 1e-10), Err(Error::SingularLowerLimit { .. })));
    }

    #[test]
    fn cache_returns_same_value() {
        let c = SecondKindCache::new(1e-10);
        let f = lame(2, 3);
        let a = c.eval_i(&f, 2.0).unwrap();
        assert_eq!(a, c.eval_i(&f, -2.0).unwrap());
        assert_eq!(a, eval_i(&f, 2.0, 1e-10).unwrap());
    }
}
