//! Solid and surface ellipsoidal harmonics, their normalization constants
//! and the expansion of the Coulomb kernel.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::coords::{EllipsoidSystem, EllipsoidalPoint, Sign};
use crate::error::{Error, Result};
use crate::lame1::{LameFunction, LameTable, DEFAULT_N_MAX};
use crate::lame2::{SecondKindCache, DEFAULT_REL_TOL};
use crate::numerics::gauss_legendre;

/// Default Gauss-Legendre order per axis for normalization constants.
pub const DEFAULT_GAMMA_ORDER: usize = 64;
/// Largest order tried when doubling.
pub const MAX_GAMMA_ORDER: usize = 512;
const GAMMA_REL_TOL: f64 = 1e-8;

/// A term's intermediate magnitude over the running sum above which the
/// expansion is flagged as cancelling.
pub const CANCELLATION_THRESHOLD: f64 = 1e6;

/// Degree `n` and 1-based order `p` in `1..=2n+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct HarmonicIndex {
    pub n: usize,
    pub p: usize,
}

impl HarmonicIndex {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if p == 0 || p > 2 * n + 1 {
            return Err(Error::OrderOutOfRange { n, p, max: 2 * n + 1 });
        }
        Ok(Self { n, p })
    }

    /// Position in the ascending `(n, p)` enumeration.
    pub fn flat(&self) -> usize {
        self.n * self.n + self.p - 1
    }

    /// All indices with degree at most `order`, ascending in `n` then `p`.
    pub fn up_to(order: usize) -> impl Iterator<Item = HarmonicIndex> {
        (0..=order).flat_map(|n| (1..=2 * n + 1).map(move |p| HarmonicIndex { n, p }))
    }

    /// Number of indices with degree at most `order`.
    pub fn count(order: usize) -> usize {
        (order + 1) * (order + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaValue {
    pub value: f64,
    pub error_estimate: f64,
    pub quadrature_order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaEntry {
    pub index: HarmonicIndex,
    pub gamma: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizationTable {
    pub system: EllipsoidSystem,
    pub quadrature_order: usize,
    pub entries: Vec<GammaEntry>,
}

impl NormalizationTable {
    pub fn gamma(&self, idx: HarmonicIndex) -> Option<f64> {
        self.entries.get(idx.flat()).map(|e| e.gamma)
    }
}

/// Normalization integral over one octant of the surface with the
/// substitutions `nu = h sin(theta)`, `mu^2 = h^2 + (k^2 - h^2) sin^2(phi)`,
/// which remove every endpoint singularity of the weight.
fn octant_integral<F>(sys: &EllipsoidSystem, order: usize, mut integrand: F) -> Result<f64>
where
    F: FnMut(f64, f64) -> f64,
{
    let rule = gauss_legendre(order, 0.0, FRAC_PI_2)?;
    let (h, h2, k2) = (sys.h(), sys.h2(), sys.k2());
    let mut total = 0.0;
    for (&phi, &wp) in rule.nodes.iter().zip(&rule.weights) {
        let sp = phi.sin();
        let mu = (h2 + (k2 - h2) * sp * sp).sqrt();
        let mut row = 0.0;
        for (&theta, &wt) in rule.nodes.iter().zip(&rule.weights) {
            let nu = h * theta.sin();
            let weight = (mu * mu - nu * nu) / (mu * (k2 - nu * nu).sqrt());
            row += wt * weight * integrand(mu, nu);
        }
        total += wp * row;
    }
    Ok(total)
}

fn gamma_at_order(f: &LameFunction, order: usize) -> Result<f64> {
    let sys = f.system;
    let v = octant_integral(&sys, order, |mu, nu| {
        let e = f.eval(mu, Sign::Plus, Sign::Plus) * f.eval(nu, Sign::Plus, Sign::Plus);
        e * e
    })?;
    Ok(8.0 * v)
}

/// `gamma_n^p = int (E(mu) E(nu))^2 w dS` over the whole ellipsoid surface,
/// verified by doubling the quadrature order.
pub fn gamma(f: &LameFunction, quad_order: usize) -> Result<GammaValue> {
    if quad_order < 16 {
        return Err(Error::InvalidInput(format!(
            "gamma quadrature order {quad_order} below 16"
        )));
    }
    let mut order = quad_order;
    let mut prev = gamma_at_order(f, order)?;
    loop {
        let next = gamma_at_order(f, 2 * order)?;
        let err = (next - prev).abs();
        if err <= GAMMA_REL_TOL * next.abs() {
            return Ok(GammaValue {
                value: next,
                error_estimate: err,
                quadrature_order: 2 * order,
            });
        }
        order *= 2;
        if order >= MAX_GAMMA_ORDER {
            return Err(Error::NonConvergence(format!(
                "gamma for (n, p) = ({}, {}) changed by {:e} relative at order {}",
                f.n(),
                f.p,
                err / next.abs(),
                order
            )));
        }
        prev = next;
    }
}

/// One term `(4 pi/(2n+1)) E(source) F(field) / gamma` of the expansion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoulombTerm {
    pub index: HarmonicIndex,
    pub interior: f64,
    pub exterior: f64,
    pub gamma: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeSummary {
    pub n: usize,
    pub partial_sum: f64,
    pub max_interior: f64,
    pub max_exterior: f64,
    pub min_gamma: f64,
    /// Largest `|F| / gamma` over the degree divided by `|partial_sum|`.
    pub cancellation_ratio: f64,
    pub cancellation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoulombExpansion {
    pub order: usize,
    pub terms: Vec<CoulombTerm>,
    pub partial_sums: Vec<f64>,
    pub degrees: Vec<DegreeSummary>,
    /// `1/|r - r'|`.
    pub exact: f64,
}

impl CoulombExpansion {
    pub fn value(&self) -> f64 {
        *self.partial_sums.last().expect("at least degree 0")
    }

    pub fn relative_errors(&self) -> Vec<f64> {
        self.partial_sums
            .iter()
            .map(|s| ((s - self.exact) / self.exact).abs())
            .collect()
    }

    /// Degrees at which the cancellation diagnostic fired.
    pub fn flagged_degrees(&self) -> Vec<usize> {
        self.degrees.iter().filter(|d| d.cancellation).map(|d| d.n).collect()
    }
}

/// Lamé functions, second-kind integrals and normalization constants of one
/// ellipsoid, built lazily and cached.
#[derive(Debug)]
pub struct HarmonicBasis {
    lame: LameTable,
    second: SecondKindCache,
    gamma_order: usize,
    gammas: RwLock<HashMap<HarmonicIndex, GammaValue>>,
}

impl HarmonicBasis {
    pub fn new(system: EllipsoidSystem) -> Self {
        Self::with_options(system, DEFAULT_N_MAX, DEFAULT_GAMMA_ORDER, DEFAULT_REL_TOL)
    }

    pub fn with_options(system: EllipsoidSystem, n_max: usize, gamma_order: usize, i_rel_tol: f64) -> Self {
        Self {
            lame: LameTable::new(system, n_max),
            second: SecondKindCache::new(i_rel_tol),
            gamma_order,
            gammas: RwLock::new(HashMap::new()),
        }
    }

    pub fn system(&self) -> &EllipsoidSystem {
        self.lame.system()
    }

    pub fn n_max(&self) -> usize {
        self.lame.n_max()
    }

    pub fn lame(&self, idx: HarmonicIndex) -> Result<Arc<LameFunction>> {
        self.lame.get(idx.n, idx.p)
    }

    pub fn second_kind(&self) -> &SecondKindCache {
        &self.second
    }

    /// Angular factor `E(mu) E(nu)`.
    fn angular(f: &LameFunction, pt: &EllipsoidalPoint) -> f64 {
        f.eval(pt.mu, pt.s_mu, pt.s_nu) * f.eval(pt.nu, pt.s_mu, pt.s_nu)
    }

    /// `E(lambda) E(mu) E(nu)`.
    pub fn interior_solid(&self, idx: HarmonicIndex, pt: &EllipsoidalPoint) -> Result<f64> {
        let f = self.lame(idx)?;
        Ok(f.eval(pt.lambda, pt.s_mu, pt.s_nu) * Self::angular(&f, pt))
    }

    /// Interior harmonic and its derivative along signed `lambda`.
    pub fn interior_solid_dlambda(&self, idx: HarmonicIndex, pt: &EllipsoidalPoint) -> Result<(f64, f64)> {
        let f = self.lame(idx)?;
        let (e, de) = f.eval_with_derivative(pt.lambda, pt.s_mu, pt.s_nu)?;
        let ang = Self::angular(&f, pt);
        Ok((e * ang, de * ang))
    }

    /// `(2n+1) E(lambda) I(lambda) E(mu) E(nu)`.
    pub fn exterior_solid(&self, idx: HarmonicIndex, pt: &EllipsoidalPoint) -> Result<f64> {
        let f = self.lame(idx)?;
        let i = self.second.eval_i(&f, pt.lambda)?;
        let w = (2 * idx.n + 1) as f64;
        Ok(w * f.eval(pt.lambda, pt.s_mu, pt.s_nu) * i * Self::angular(&f, pt))
    }

    /// Exterior harmonic and its derivative along signed `lambda`.
    pub fn exterior_solid_dlambda(&self, idx: HarmonicIndex, pt: &EllipsoidalPoint) -> Result<(f64, f64)> {
        let f = self.lame(idx)?;
        let sk = self.second.eval_f(&f, pt.lambda, pt.s_mu, pt.s_nu)?;
        let ang = Self::angular(&f, pt);
        Ok((sk.f_value * ang, sk.df_dlambda * ang))
    }

    /// `E(mu) E(nu)` with the root-factor signs of the given octant.
    pub fn surface_harmonic(&self, idx: HarmonicIndex, mu: f64, nu: f64, s_mu: Sign, s_nu: Sign) -> Result<f64> {
        let f = self.lame(idx)?;
        Ok(f.eval(mu, s_mu, s_nu) * f.eval(nu, s_mu, s_nu))
    }

    pub fn gamma(&self, idx: HarmonicIndex) -> Result<GammaValue> {
        if let Some(g) = self.gammas.read().expect("gamma cache poisoned").get(&idx) {
            return Ok(*g);
        }
        let g = gamma(&*self.lame(idx)?, self.gamma_order)?;
        self.gammas.write().expect("gamma cache poisoned").insert(idx, g);
        Ok(g)
    }

    pub fn normalization_table(&self, order: usize) -> Result<NormalizationTable> {
        let entries = HarmonicIndex::up_to(order)
            .map(|idx| {
                let g = self.gamma(idx)?;
                Ok(GammaEntry {
                    index: idx,
                    gamma: g.value,
                    error_estimate: g.error_estimate,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NormalizationTable {
            system: *self.system(),
            quadrature_order: self.gamma_order,
            entries,
        })
    }

    /// Surface inner product of two harmonics over all eight octants of the
    /// surface `lambda = a`, each harmonic scaled by `1 / E(a)`.
    pub fn surface_inner_product(&self, i: HarmonicIndex, j: HarmonicIndex, quad_order: usize) -> Result<f64> {
        let (fi, fj) = (self.lame(i)?, self.lame(j)?);
        let a = self.system().a();
        let (ei, ej) = (fi.eval(a, Sign::Plus, Sign::Plus), fj.eval(a, Sign::Plus, Sign::Plus));
        let signs = [Sign::Plus, Sign::Minus];
        let mut total = 0.0;
        for sl in signs {
            for sm in signs {
                for sn in signs {
                    total += octant_integral(self.system(), quad_order, |mu, nu| {
                        let pt = EllipsoidalPoint::from_magnitudes([a, mu, nu], [sl, sm, sn]);
                        let vi = fi.eval(pt.lambda, sm, sn) * Self::angular(&fi, &pt) / ei;
                        let vj = fj.eval(pt.lambda, sm, sn) * Self::angular(&fj, &pt) / ej;
                        vi * vj
                    })?;
                }
            }
        }
        Ok(total)
    }

    /// Expands `1/|field - source|` in ellipsoidal harmonics through degree
    /// `order`. Requires `|lambda(field)| > |lambda(source)|`.
    pub fn coulomb_expand(&self, source: [f64; 3], field: [f64; 3], order: usize) -> Result<CoulombExpansion> {
        let sys = self.system();
        let src = sys.cart_to_ell(source)?;
        let fld = sys.cart_to_ell(field)?;
        if fld.lambda.abs() <= src.lambda.abs() {
            return Err(Error::OrderingViolation {
                field: fld.lambda.abs(),
                source_lambda: src.lambda.abs(),
            });
        }
        if order > self.n_max() {
            return Err(Error::DegreeTooLarge { n: order, n_max: self.n_max() });
        }
        let d = [field[0] - source[0], field[1] - source[1], field[2] - source[2]];
        let exact = 1.0 / (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();

        let mut terms = Vec::with_capacity(HarmonicIndex::count(order));
        let mut partial_sums = Vec::with_capacity(order + 1);
        let mut degrees = Vec::with_capacity(order + 1);
        let mut running = 0.0;
        for n in 0..=order {
            let (mut max_in, mut max_ex, mut min_g, mut max_ratio_num) = (0.0_f64, 0.0_f64, f64::INFINITY, 0.0_f64);
            for p in 1..=2 * n + 1 {
                let idx = HarmonicIndex { n, p };
                let interior = self.interior_solid(idx, &src)?;
                let exterior = self.exterior_solid(idx, &fld)?;
                let g = self.gamma(idx)?.value;
                let contribution = 4.0 * PI / (2 * n + 1) as f64 * interior * exterior / g;
                running += contribution;
                max_in = max_in.max(interior.abs());
                max_ex = max_ex.max(exterior.abs());
                min_g = min_g.min(g);
                max_ratio_num = max_ratio_num.max(exterior.abs() / g);
                terms.push(CoulombTerm {
                    index: idx,
                    interior,
                    exterior,
                    gamma: g,
                    contribution,
                });
            }
            let ratio = max_ratio_num / running.abs();
            partial_sums.push(running);
            degrees.push(DegreeSummary {
                n,
                partial_sum: running,
                max_interior: max_in,
                max_exterior: max_ex,
                min_gamma: min_g,
                cancellation_ratio: ratio,
                cancellation: ratio > CANCELLATION_THRESHOLD,
            });
        }
        Ok(CoulombExpansion {
            order,
            terms,
            partial_sums,
            degrees,
            exact,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn basis() -> HarmonicBasis {
        HarmonicBasis::new(EllipsoidSystem::new(2.0, 1.5, 1.0).unwrap())
    }

    #[test]
    fn flat_index_enumeration() {
        for (i, idx) in HarmonicIndex::up_to(6).enumerate() {
            assert_eq!(idx.flat(), i);
        }
        assert_eq!(HarmonicIndex::up_to(6).count(), HarmonicIndex::count(6));
        assert!(HarmonicIndex::new(1, 4).is_err());
    }

    #[test]
    fn monopole_is_constant() {
        let b = basis();
        let idx = HarmonicIndex { n: 0, p: 1 };
        let pt = b.system().cart_to_ell([0.3, -0.2, 0.1]).unwrap();
        assert_eq!(b.interior_solid(idx, &pt).unwrap(), 1.0);
        assert_relative_eq!(b.gamma(idx).unwrap().value, 4.0 * PI, max_relative = 1e-12);
    }

    #[test]
    fn dipole_harmonic_is_scaled_coordinate() {
        // E(lambda) E(mu) E(nu) = lambda mu nu = h k x for the K dipole.
        let b = basis();
        let s = *b.system();
        let idx = HarmonicIndex { n: 1, p: 1 };
        for r in [[0.3, 0.2, 0.1], [-0.5, 0.4, -0.3], [1.2, -0.6, 0.2]] {
            let pt = s.cart_to_ell(r).unwrap();
            assert_relative_eq!(b.interior_solid(idx, &pt).unwrap(), s.h() * s.k() * r[0], max_relative = 1e-8);
        }
    }

    #[test]
    fn exterior_monopole_far_field() {
        let b = basis();
        // On an axis this far out the inverse map amplifies roundoff in mu^2
        // past the absolute round-trip tolerance, so skip the check.
        let pt = b.system().cart_to_ell_unchecked([100.0, 0.0, 0.0]);
        let v = b.exterior_solid(HarmonicIndex { n: 0, p: 1 }, &pt).unwrap();
        assert!((v * 100.0 - 1.0).abs() < 2e-3);
    }

    #[test]
    fn surface_harmonic_is_product() {
        let b = basis();
        let idx = HarmonicIndex { n: 2, p: 4 };
        let f = b.lame(idx).unwrap();
        let v = b.surface_harmonic(idx, 1.5, 0.5, Sign::Plus, Sign::Plus).unwrap();
        assert_eq!(v, f.eval(1.5, Sign::Plus, Sign::Plus) * f.eval(0.5, Sign::Plus, Sign::Plus));
    }

    #[test]
    fn dipole_orthogonal_to_monopole() {
        let b = basis();
        let m = HarmonicIndex { n: 0, p: 1 };
        for p in 1..=3 {
            let d = HarmonicIndex { n: 1, p };
            let v = b.surface_inner_product(m, d, 32).unwrap();
            assert!(v.abs() < 1e-10, "p={p}: {v}");
        }
        let v = b.surface_inner_product(HarmonicIndex { n: 1, p: 1 }, HarmonicIndex { n: 1, p: 2 }, 32).unwrap();
        assert!(v.abs() < 1e-10);
    }

    #[test]
    fn low_degree_gammas_match_closed_forms() {
        // Closed forms for n <= 2 evaluated in mpmath at 30 digits.
        let expected = [
            (1, 1, 21.99114857512855),
            (1, 2, 9.16297857297023),
            (1, 3, 15.70796326794897),
            (2, 1, 14.78993850662571),
            (2, 2, 8.250346874423879),
            (2, 3, 9.621127501618742),
            (2, 4, 16.49336143134641),
            (2, 5, 6.872233929727673),
        ];
        let b = basis();
        for (n, p, g) in expected {
            assert_relative_eq!(b.gamma(HarmonicIndex { n, p }).unwrap().value, g, max_relative = 1e-10);
        }
    }

    #[test]
    fn diagonal_inner_product_is_gamma() {
        let b = basis();
        let idx = HarmonicIndex { n: 2, p: 2 };
        let g = b.gamma(idx).unwrap().value;
        assert_relative_eq!(b.surface_inner_product(idx, idx, 64).unwrap(), g, max_relative = 1e-10);
    }

    #[test]
    fn monopole_term_far_field() {
        let b = basis();
        let e = b.coulomb_expand([0.0, 0.0, 0.5], [0.0, 0.0, 50.0], 0).unwrap();
        assert!((e.partial_sums[0] * 49.5 - 1.0).abs() < 0.02);
    }

    #[test]
    fn ordering_is_enforced() {
        let b = basis();
        assert!(matches!(
            b.coulomb_expand([0.0, 0.0, 2.0], [0.0, 0.0, 0.5], 4),
            Err(Error::OrderingViolation { .. })
        ));
    }
}
