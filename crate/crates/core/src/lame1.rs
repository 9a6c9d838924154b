//! Lamé functions of the first kind.
//!
//! Every first-kind function of degree `n` factors as `E(s) = psi(s) P(u)`
//! with `u = 1 - s^2/h^2`, where
//! `psi(s) = s^alpha * sqrt(s^2 - h^2)^beta * sqrt(s^2 - k^2)^gamma` fixes
//! the class and `P` is a polynomial of degree `m = (n - alpha - beta - gamma)/2`
//! in `u`. Substituting into the Lamé equation
//! `(s^2-h^2)(s^2-k^2)E'' + s(2s^2-h^2-k^2)E' + (p - n(n+1)s^2)E = 0`
//! gives a three-term recurrence for the coefficients of `P`, which is an
//! eigenproblem for the separation constant `p`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::coords::{EllipsoidSystem, Sign};
use crate::error::{Error, Result};
use crate::numerics::{solve_tridiagonal, TridiagonalSpec};

/// Default largest degree for which Lamé functions are built.
pub const DEFAULT_N_MAX: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ClassTag {
    K,
    L,
    M,
    N,
}

impl fmt::Display for ClassTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ClassTag::K => "K",
            ClassTag::L => "L",
            ClassTag::M => "M",
            ClassTag::N => "N",
        };
        f.write_str(s)
    }
}

/// Class membership of a Lamé function: tag, degree and class-local index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct LameClass {
    pub tag: ClassTag,
    pub n: usize,
    pub p_local: usize,
}

impl LameClass {
    /// Exponents `(alpha, beta, gamma)` of `s`, `sqrt(s^2-h^2)`, `sqrt(s^2-k^2)` in psi.
    pub fn exponents(&self) -> (usize, usize, usize) {
        let parity = self.n % 2;
        match self.tag {
            ClassTag::K => (parity, 0, 0),
            ClassTag::L => (1 - parity, 1, 0),
            ClassTag::M => (1 - parity, 0, 1),
            ClassTag::N => (parity, 1, 1),
        }
    }

    /// Degree of `P` in `u`.
    pub fn poly_degree(&self) -> usize {
        let (a, b, g) = self.exponents();
        (self.n - (a + b + g)) / 2
    }
}

/// Number of solutions in each class for degree `n`, in `K, L, M, N` order.
pub fn class_counts(n: usize) -> [usize; 4] {
    let r = n / 2;
    [r + 1, n - r, n - r, r]
}

/// Maps the 1-based global order `p` of degree `n` onto its class.
pub fn class_of(n: usize, p: usize) -> Result<LameClass> {
    let max = 2 * n + 1;
    if p == 0 || p > max {
        return Err(Error::OrderOutOfRange { n, p, max });
    }
    let tags = [ClassTag::K, ClassTag::L, ClassTag::M, ClassTag::N];
    let mut offset = p - 1;
    for (tag, count) in tags.into_iter().zip(class_counts(n)) {
        if offset < count {
            return Ok(LameClass {
                tag,
                n,
                p_local: offset,
            });
        }
        offset -= count;
    }
    unreachable!("class counts sum to 2n+1")
}

/// Tridiagonal matrix whose eigenvalues are the separation constants of a
/// class; eigenvectors hold the coefficients of `P` in powers of `u`.
pub fn build_tridiagonal(sys: &EllipsoidSystem, cls: &LameClass) -> TridiagonalSpec {
    let (alpha, beta, gamma) = cls.exponents();
    let (al, be, ga) = (alpha as f64, beta as f64, gamma as f64);
    let m = cls.poly_degree();
    let n = cls.n as f64;
    let q = n * (n + 1.0);
    let sigma = al + be + ga;

    let a_h = 2.0 * be + 1.0;
    let a_k = 2.0 * ga + 1.0;
    let a_0 = 2.0 * al + 1.0;
    let a_sum = 2.0 * sigma + 3.0;
    let w_h = 2.0 * al * ga + al + ga;
    let w_k = 2.0 * al * be + al + be;
    let w = sigma * sigma + sigma;

    let kappa = sys.k2() / sys.h2();
    let delta = kappa - 1.0;
    let c0 = w - q - w_h - w_k * kappa;
    let scale = -sys.h2();

    let diag = (0..=m)
        .map(|j| {
            let j = j as f64;
            let d = 4.0 * j * (j - 1.0) * (1.0 - delta)
                + 2.0 * j * (a_h * (1.0 - delta) + a_k - a_0 * delta)
                + c0;
            scale * d
        })
        .collect();
    let upper = (0..m)
        .map(|j| {
            let j = j as f64;
            scale * 2.0 * delta * (j + 1.0) * (2.0 * j + a_h)
        })
        .collect();
    let lower = (1..=m)
        .map(|j| {
            let j = j as f64;
            -scale * (4.0 * (j - 1.0) * (j - 2.0) + 2.0 * (j - 1.0) * a_sum + w - q)
        })
        .collect();
    TridiagonalSpec {
        diag,
        lower,
        upper,
    }
}

/// A normalized first-kind Lamé function `E_n^p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LameFunction {
    pub system: EllipsoidSystem,
    pub cls: LameClass,
    /// Global 1-based order.
    pub p: usize,
    /// Coefficients `b_j` of `P(u) = sum_j b_j u^j`.
    pub coeffs: Vec<f64>,
    pub separation_constant: f64,
}

impl LameFunction {
    /// Builds `E_n^p`. Within a class, `p_local = 0` carries the largest
    /// separation constant.
    pub fn new(sys: &EllipsoidSystem, n: usize, p: usize) -> Result<Self> {
        let cls = class_of(n, p)?;
        let spec = build_tridiagonal(sys, &cls);
        let eig = solve_tridiagonal(&spec)?;
        let idx = eig.values.len() - 1 - cls.p_local;
        let mut coeffs = eig.vectors[idx].clone();

        let m = coeffs.len() - 1;
        let lead = coeffs[m] * (-1.0 / sys.h2()).powi(m as i32);
        if lead == 0.0 || !lead.is_finite() {
            return Err(Error::EigenFailure(format!(
                "eigenvector of (n, p) = ({n}, {p}) has no leading term"
            )));
        }
        coeffs.iter_mut().for_each(|b| *b /= lead);
        Ok(Self {
            system: *sys,
            cls,
            p,
            coeffs,
            separation_constant: eig.values[idx],
        })
    }

    pub fn n(&self) -> usize {
        self.cls.n
    }

    fn u(&self, s: f64) -> f64 {
        1.0 - s * s / self.system.h2()
    }

    /// `P` and `dP/ds` at `s`.
    fn poly(&self, s: f64) -> (f64, f64) {
        let u = self.u(s);
        let mut val = 0.0;
        let mut du = 0.0;
        for &b in self.coeffs.iter().rev() {
            du = du * u + val;
            val = val * u + b;
        }
        (val, du * (-2.0 * s / self.system.h2()))
    }

    fn second_poly_derivative(&self, s: f64) -> f64 {
        let u = self.u(s);
        let h2 = self.system.h2();
        // dP/du and d2P/du2 by Horner on the differentiated coefficients.
        let (mut p1, mut p2) = (0.0, 0.0);
        let m = self.coeffs.len();
        for j in (1..m).rev() {
            p1 = p1 * u + j as f64 * self.coeffs[j];
        }
        for j in (2..m).rev() {
            p2 = p2 * u + (j * (j - 1)) as f64 * self.coeffs[j];
        }
        let du_ds = -2.0 * s / h2;
        p2 * du_ds * du_ds + p1 * (-2.0 / h2)
    }

    /// Signed root factors `(s^alpha, f_h, f_k)` raised to the class exponents.
    fn root_factors(&self, s: f64, s_mu: Sign, s_nu: Sign) -> (f64, f64, f64) {
        let (alpha, beta, gamma) = self.cls.exponents();
        let sg = Sign::of(s);
        let fa = if alpha == 1 { s } else { 1.0 };
        let fh = if beta == 1 {
            (sg * s_mu).value() * (s * s - self.system.h2()).abs().sqrt()
        } else {
            1.0
        };
        let fk = if gamma == 1 {
            (sg * s_nu).value() * (s * s - self.system.k2()).abs().sqrt()
        } else {
            1.0
        };
        (fa, fh, fk)
    }

    /// `E(s)` with the root-factor signs set by the octant signs `s_mu`, `s_nu`.
    pub fn eval(&self, s: f64, s_mu: Sign, s_nu: Sign) -> f64 {
        let (fa, fh, fk) = self.root_factors(s, s_mu, s_nu);
        fa * fh * fk * self.poly(s).0
    }

    /// `(E(s), E'(s))`.
    pub fn eval_with_derivative(&self, s: f64, s_mu: Sign, s_nu: Sign) -> Result<(f64, f64)> {
        let (alpha, beta, gamma) = self.cls.exponents();
        let (h2, k2) = (self.system.h2(), self.system.k2());
        let (fa, fh, fk) = self.root_factors(s, s_mu, s_nu);
        let s2 = s * s;
        if (beta == 1 && at_branch(s2, h2)) || (gamma == 1 && at_branch(s2, k2)) {
            return Err(Error::BranchPointDerivative { s });
        }
        let dfa = if alpha == 1 { 1.0 } else { 0.0 };
        let dfh = if beta == 1 { s * fh / (s2 - h2) } else { 0.0 };
        let dfk = if gamma == 1 { s * fk / (s2 - k2) } else { 0.0 };
        let psi = fa * fh * fk;
        let dpsi = dfa * fh * fk + fa * dfh * fk + fa * fh * dfk;
        let (pv, dp) = self.poly(s);
        Ok((psi * pv, dpsi * pv + psi * dp))
    }

    pub fn derivative(&self, s: f64, s_mu: Sign, s_nu: Sign) -> Result<f64> {
        self.eval_with_derivative(s, s_mu, s_nu).map(|(_, d)| d)
    }

    /// `E''(s)`, away from `s = 0` and the branch points.
    pub fn second_derivative(&self, s: f64, s_mu: Sign, s_nu: Sign) -> Result<f64> {
        let (alpha, beta, gamma) = self.cls.exponents();
        let (h2, k2) = (self.system.h2(), self.system.k2());
        let s2 = s * s;
        if s == 0.0 || (beta == 1 && at_branch(s2, h2)) || (gamma == 1 && at_branch(s2, k2)) {
            return Err(Error::BranchPointDerivative { s });
        }
        let (fa, fh, fk) = self.root_factors(s, s_mu, s_nu);
        let psi = fa * fh * fk;
        let (al, be, ga) = (alpha as f64, beta as f64, gamma as f64);
        let ld = al / s + be * s / (s2 - h2) + ga * s / (s2 - k2);
        let ld_prime = -al / s2
            - be * (s2 + h2) / ((s2 - h2) * (s2 - h2))
            - ga * (s2 + k2) / ((s2 - k2) * (s2 - k2));
        let dpsi = psi * ld;
        let d2psi = psi * (ld * ld + ld_prime);
        let (pv, dp) = self.poly(s);
        let d2p = self.second_poly_derivative(s);
        Ok(d2psi * pv + 2.0 * dpsi * dp + psi * d2p)
    }

    /// Relative residual of the Lamé equation at `s`: the absolute residual
    /// divided by the sum of the magnitudes of its four terms.
    pub fn lame_residual(&self, s: f64) -> Result<f64> {
        let (h2, k2) = (self.system.h2(), self.system.k2());
        let (e, de) = self.eval_with_derivative(s, Sign::Plus, Sign::Plus)?;
        let d2e = self.second_derivative(s, Sign::Plus, Sign::Plus)?;
        let s2 = s * s;
        let q = (self.n() * (self.n() + 1)) as f64;
        let terms = [
            (s2 - h2) * (s2 - k2) * d2e,
            s * (2.0 * s2 - h2 - k2) * de,
            self.separation_constant * e,
            -q * s2 * e,
        ];
        let scale: f64 = terms.iter().map(|t| t.abs()).sum();
        let sum: f64 = terms.iter().sum();
        Ok(if scale == 0.0 { 0.0 } else { sum.abs() / scale })
    }

    /// Coefficients of `P` in powers of `s^2`, lowest first.
    pub fn monomial_coefficients(&self) -> Vec<f64> {
        let m = self.coeffs.len() - 1;
        let t = -1.0 / self.system.h2();
        let mut out = vec![0.0; m + 1];
        for (j, &b) in self.coeffs.iter().enumerate() {
            // (1 + t s^2)^j
            let mut binom = 1.0;
            for i in 0..=j {
                out[i] += b * binom * t.powi(i as i32);
                binom = binom * (j - i) as f64 / (i + 1) as f64;
            }
        }
        out
    }
}

fn at_branch(s2: f64, f2: f64) -> bool {
    (s2 - f2).abs() <= 1e-14 * f2
}

/// Thread-safe memo table of Lamé functions for one ellipsoid.
#[derive(Debug)]
pub struct LameTable {
    system: EllipsoidSystem,
    n_max: usize,
    cache: RwLock<HashMap<(usize, usize), Arc<LameFunction>>>,
}

impl LameTable {
    pub fn new(system: EllipsoidSystem, n_max: usize) -> Self {
        Self {
            system,
            n_max,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn system(&self) -> &EllipsoidSystem {
        &self.system
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn get(&self, n: usize, p: usize) -> Result<Arc<LameFunction>> {
        if n > self.n_max {
            return Err(Error::DegreeTooLarge { n, n_max: self.n_max });
        }
        if let Some(f) = self.cache.read().expect("lame cache poisoned").get(&(n, p)) {
            return Ok(Arc::clone(f));
        }
        let f = Arc::new(LameFunction::new(&self.system, n, p)?);
        let mut w = self.cache.write().expect("lame cache poisoned");
        Ok(Arc::clone(w.entry((n, p)).or_insert(f)))
    }
}
