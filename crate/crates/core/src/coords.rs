//! Confocal ellipsoidal coordinates.
//!
//! Ellipsoidal coordinates `(lambda, mu, nu)` of a Cartesian point are the
//! square roots of the three roots of the confocal cubic
//! `x^2/s^2 + y^2/(s^2-h^2) + z^2/(s^2-k^2) = 1`, with
//! `lambda^2 >= k^2 >= mu^2 >= h^2 >= nu^2 >= 0`.
//!
//! All three coordinates are stored signed. The octant of a Cartesian point
//! is encoded as `s_lambda = s_x s_y s_z`, `s_mu = s_x s_y`,
//! `s_nu = s_x s_z`, and inverted with `s_x = s_lambda s_mu s_nu`,
//! `s_y = s_lambda s_nu`, `s_z = s_lambda s_mu`.

use std::f64::consts::PI;
use std::ops::Mul;

use serde::Serialize;

use crate::error::{Error, Result};

/// Round-trip tolerance of the Cartesian to ellipsoidal transform.
pub const ROUND_TRIP_TOL: f64 = 1e-6;

const RANGE_SLACK: f64 = 1e-12;

/// A sign in `{-1, +1}`. Zero maps to `Plus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn of(x: f64) -> Self {
        if x < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// Tri-axial ellipsoid `x^2/a^2 + y^2/b^2 + z^2/c^2 = 1` and its confocal
/// family, with semifocal distances `h^2 = a^2 - b^2`, `k^2 = a^2 - c^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipsoidSystem {
    a: f64,
    b: f64,
    c: f64,
    h: f64,
    k: f64,
    h2: f64,
    k2: f64,
}

/// Signed ellipsoidal coordinates together with their octant signs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipsoidalPoint {
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
    pub s_lambda: Sign,
    pub s_mu: Sign,
    pub s_nu: Sign,
}

impl EllipsoidalPoint {
    /// Builds a point from coordinate magnitudes and signs.
    pub fn from_magnitudes(mag: [f64; 3], signs: [Sign; 3]) -> Self {
        Self {
            lambda: signs[0].value() * mag[0].abs(),
            mu: signs[1].value() * mag[1].abs(),
            nu: signs[2].value() * mag[2].abs(),
            s_lambda: signs[0],
            s_mu: signs[1],
            s_nu: signs[2],
        }
    }

    pub fn magnitudes(&self) -> [f64; 3] {
        [self.lambda.abs(), self.mu.abs(), self.nu.abs()]
    }
}

/// Intermediates of the trigonometric solution of the coordinate cubic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CubicAuxiliaries {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub q: f64,
    pub r: f64,
    pub theta: f64,
}

impl EllipsoidSystem {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let degenerate = || Error::DegenerateEllipsoid { a, b, c };
        if !(a.is_finite() && b.is_finite() && c.is_finite()) || c <= 0.0 {
            return Err(degenerate());
        }
        if !(c < b && b < a) {
            return Err(degenerate());
        }
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs());
        if close(a, b) || close(b, c) {
            return Err(degenerate());
        }
        let h2 = (a - b) * (a + b);
        let k2 = (a - c) * (a + c);
        Ok(Self {
            a,
            b,
            c,
            h: h2.sqrt(),
            k: k2.sqrt(),
            h2,
            k2,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn h2(&self) -> f64 {
        self.h2
    }
    pub fn k2(&self) -> f64 {
        self.k2
    }
    pub fn semiaxes(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    /// `x^2/a^2 + y^2/b^2 + z^2/c^2`; below one strictly inside.
    pub fn shape_function(&self, r: [f64; 3]) -> f64 {
        (r[0] / self.a).powi(2) + (r[1] / self.b).powi(2) + (r[2] / self.c).powi(2)
    }

    pub fn contains_strictly(&self, r: [f64; 3]) -> bool {
        self.shape_function(r) < 1.0
    }

    /// Outward unit normal of the ellipsoid surface through `r`.
    pub fn outward_normal(&self, r: [f64; 3]) -> [f64; 3] {
        let g = [
            r[0] / (self.a * self.a),
            r[1] / (self.b * self.b),
            r[2] / (self.c * self.c),
        ];
        let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        [g[0] / n, g[1] / n, g[2] / n]
    }

    pub fn cubic_auxiliaries(&self, r: [f64; 3]) -> CubicAuxiliaries {
        let (x2, y2, z2) = (r[0] * r[0], r[1] * r[1], r[2] * r[2]);
        let (h2, k2) = (self.h2, self.k2);
        let w1 = -(x2 + y2 + z2 + h2 + k2);
        let w2 = x2 * (h2 + k2) + y2 * k2 + z2 * h2 + h2 * k2;
        let w3 = -x2 * h2 * k2;
        let q = (w1 * w1 - 3.0 * w2) / 9.0;
        let rr = (9.0 * w1 * w2 - 27.0 * w3 - 2.0 * w1 * w1 * w1) / 54.0;
        let cos_theta = if q > 0.0 {
            (rr / (q * q * q).sqrt()).clamp(-1.0, 1.0)
        } else {
            1.0
        };
        CubicAuxiliaries {
            w1,
            w2,
            w3,
            q,
            r: rr,
            theta: cos_theta.acos(),
        }
    }

    /// Squared coordinate magnitudes clamped into their ranges.
    fn squared_coordinates(&self, r: [f64; 3]) -> [f64; 3] {
        let aux = self.cubic_auxiliaries(r);
        let sq = 2.0 * aux.q.max(0.0).sqrt();
        let shift = aux.w1 / 3.0;
        let t = aux.theta / 3.0;
        let lambda2 = sq * t.cos() - shift;
        let mu2 = sq * (t + 4.0 * PI / 3.0).cos() - shift;
        let nu2 = sq * (t + 2.0 * PI / 3.0).cos() - shift;
        let cubic = |x: f64| ((x + aux.w1) * x + aux.w2) * x + aux.w3;
        let slope = |x: f64| (3.0 * x + 2.0 * aux.w1) * x + aux.w2;
        [
            polish(lambda2.max(self.k2), self.k2, f64::INFINITY, cubic, slope),
            polish(mu2.clamp(self.h2, self.k2), self.h2, self.k2, cubic, slope),
            polish(nu2.clamp(0.0, self.h2), 0.0, self.h2, cubic, slope),
        ]
    }

    /// Cartesian to ellipsoidal without the round-trip verification.
    pub fn cart_to_ell_unchecked(&self, r: [f64; 3]) -> EllipsoidalPoint {
        let sq = self.squared_coordinates(r);
        let (sx, sy, sz) = (Sign::of(r[0]), Sign::of(r[1]), Sign::of(r[2]));
        EllipsoidalPoint::from_magnitudes(
            [sq[0].sqrt(), sq[1].sqrt(), sq[2].sqrt()],
            [sx * sy * sz, sx * sy, sx * sz],
        )
    }

    /// Cartesian to ellipsoidal, verified by transforming back.
    pub fn cart_to_ell(&self, r: [f64; 3]) -> Result<EllipsoidalPoint> {
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite point {r:?}")));
        }
        let p = self.cart_to_ell_unchecked(r);
        let back = self.ell_to_cart(&p)?;
        let residual = (0..3).map(|i| (back[i] - r[i]).abs()).fold(0.0, f64::max);
        if residual > ROUND_TRIP_TOL {
            return Err(Error::RoundTripFailure {
                x: r[0],
                y: r[1],
                z: r[2],
                residual,
            });
        }
        Ok(p)
    }

    pub fn ell_to_cart(&self, p: &EllipsoidalPoint) -> Result<[f64; 3]> {
        let [l, m, n] = p.magnitudes();
        let (h2, k2) = (self.h2, self.k2);
        let (l2, m2, n2) = (l * l, m * m, n * n);
        let slack = RANGE_SLACK * k2;
        if l2 < k2 - slack || m2 < h2 - slack || m2 > k2 + slack || n2 > h2 + slack {
            return Err(Error::RangeViolation(format!(
                "(lambda, mu, nu) = ({}, {}, {}) with h = {}, k = {}",
                p.lambda, p.mu, p.nu, self.h, self.k
            )));
        }
        let x2 = l2 * m2 * n2 / (h2 * k2);
        let y2 = (l2 - h2) * (m2 - h2) * (h2 - n2) / (h2 * (k2 - h2));
        let z2 = (l2 - k2) * (k2 - m2) * (k2 - n2) / (k2 * (k2 - h2));
        let sx = p.s_lambda * p.s_mu * p.s_nu;
        let sy = p.s_lambda * p.s_nu;
        let sz = p.s_lambda * p.s_mu;
        Ok([
            sx.value() * x2.max(0.0).sqrt(),
            sy.value() * y2.max(0.0).sqrt(),
            sz.value() * z2.max(0.0).sqrt(),
        ])
    }

    /// Factor converting `d/d lambda` into the outward normal derivative on
    /// the surface `lambda = a`.
    pub fn normal_derivative_factor(&self, mu: f64, nu: f64) -> f64 {
        let a2 = self.a * self.a;
        self.b * self.c / ((a2 - mu * mu).sqrt() * (a2 - nu * nu).sqrt())
    }
}

/// A few guarded Newton steps on the cubic. Far from the origin the
/// trigonometric roots lose digits through `acos` near zero.
fn polish(mut x: f64, lo: f64, hi: f64, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> f64 {
    let mut fx = f(x);
    for _ in 0..4 {
        let d = df(x);
        if fx == 0.0 || d == 0.0 || !d.is_finite() {
            break;
        }
        let next = (x - fx / d).clamp(lo, hi);
        let fn_ = f(next);
        if fn_.abs() >= fx.abs() {
            break;
        }
        x = next;
        fx = fn_;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sys() -> EllipsoidSystem {
        EllipsoidSystem::new(2.0, 1.5, 1.0).unwrap()
    }

    #[test]
    fn semifocal_distances() {
        let s = sys();
        assert_relative_eq!(s.h2(), 1.75);
        assert_relative_eq!(s.k2(), 3.0);
        let s = EllipsoidSystem::new(15.0, 12.0, 10.0).unwrap();
        assert_relative_eq!(s.h2(), 81.0);
        assert_relative_eq!(s.k2(), 125.0);
        assert_relative_eq!(s.h2() + s.b() * s.b() - s.c() * s.c(), s.k2());
    }

    #[test]
    fn rejects_degenerate() {
        for (a, b, c) in [(1.0, 1.0, 1.0), (2.0, 2.0, 1.0), (2.0, 1.0, 1.0), (1.0, 2.0, 3.0), (2.0, 1.0, 0.0)] {
            assert!(matches!(
                EllipsoidSystem::new(a, b, c),
                Err(Error::DegenerateEllipsoid { .. })
            ));
        }
    }

    #[test]
    fn x_axis_surface_point() {
        let s = sys();
        let p = s.cart_to_ell([2.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(p.lambda.abs(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(p.mu.abs(), 3.0_f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(p.nu.abs(), 1.75_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn inverse_of_axis_case() {
        let s = sys();
        let plus = [Sign::Plus; 3];
        let p = EllipsoidalPoint::from_magnitudes([2.0, s.k(), s.h()], plus);
        let r = s.ell_to_cart(&p).unwrap();
        assert_relative_eq!(r[0], 2.0, epsilon = 1e-12);
        assert!(r[1].abs() < 1e-7 && r[2].abs() < 1e-7);

        let p = EllipsoidalPoint::from_magnitudes([2.0, s.k(), s.h()], [Sign::Minus, Sign::Plus, Sign::Plus]);
        let r = s.ell_to_cart(&p).unwrap();
        assert_relative_eq!(r[0], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn source_charge_of_convergence_study() {
        let s = sys();
        let p = s.cart_to_ell([0.0, 0.0, 0.5]).unwrap();
        let r = s.ell_to_cart(&p).unwrap();
        assert!((r[0]).abs() < 1e-6 && (r[1]).abs() < 1e-6 && (r[2] - 0.5).abs() < 1e-6);
        // On the z-axis the cubic factors as T (T - h^2) (T - k^2 - z^2).
        assert_relative_eq!(p.lambda * p.lambda, 3.25, epsilon = 1e-12);
    }

    #[test]
    fn octant_signs_are_distinct() {
        let s = sys();
        let mut seen = std::collections::HashSet::new();
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    let r = [0.3 * sx, 0.4 * sy, 0.5 * sz];
                    let p = s.cart_to_ell(r).unwrap();
                    seen.insert((p.s_lambda, p.s_mu, p.s_nu));
                    let back = s.ell_to_cart(&p).unwrap();
                    for i in 0..3 {
                        assert!((back[i] - r[i]).abs() < 1e-6);
                    }
                }
            }
        }
        assert_eq!(seen.len(), 8);
    }

    #[test]
    fn sign_algebra_closes() {
        for sx in [Sign::Plus, Sign::Minus] {
            for sy in [Sign::Plus, Sign::Minus] {
                for sz in [Sign::Plus, Sign::Minus] {
                    let (sl, sm, sn) = (sx * sy * sz, sx * sy, sx * sz);
                    assert_eq!(sl * sm * sn, sx);
                    assert_eq!(sl * sn, sy);
                    assert_eq!(sl * sm, sz);
                }
            }
        }
        assert_eq!(Sign::of(0.0), Sign::Plus);
        assert_eq!(Sign::of(-0.0), Sign::Plus);
    }

    #[test]
    fn range_violation() {
        let s = sys();
        let p = EllipsoidalPoint::from_magnitudes([1.0, 1.5, 0.5], [Sign::Plus; 3]);
        assert!(matches!(s.ell_to_cart(&p), Err(Error::RangeViolation(_))));
    }

    #[test]
    fn normal_factor_identities() {
        let s = sys();
        assert_relative_eq!(s.normal_derivative_factor(s.h(), 0.0), s.c() / s.a(), epsilon = 1e-14);
        assert_relative_eq!(s.normal_derivative_factor(s.k(), s.h()), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn normal_factor_matches_finite_difference() {
        // lambda itself is a smooth function of position; the factor times
        // d(lambda)/d(lambda) = 1 must equal the directional derivative of
        // lambda(x) along the outward normal at the surface.
        let s = sys();
        let (mu, nu) = (1.5, 0.5);
        let p = EllipsoidalPoint::from_magnitudes([s.a(), mu, nu], [Sign::Plus; 3]);
        let r = s.ell_to_cart(&p).unwrap();
        let n = s.outward_normal(r);
        let step = 1e-5;
        let lam = |t: f64| {
            let q = [r[0] + t * n[0], r[1] + t * n[1], r[2] + t * n[2]];
            s.cart_to_ell_unchecked(q).lambda.abs()
        };
        let dldn = (lam(step) - lam(-step)) / (2.0 * step);
        assert_relative_eq!(dldn, s.normal_derivative_factor(mu, nu), max_relative = 1e-7);
    }
}
