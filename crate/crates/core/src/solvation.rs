//! Point charges inside a dielectric ellipsoid embedded in a second
//! dielectric: expansion coefficients, reaction potential and solvation
//! free energy.
//!
//! Units are Gaussian with lengths in Å and charges in e, so potentials come
//! out in e/Å and energies in e²/Å. [`KCAL_PER_MOL`] converts energies to
//! kcal/mol.

use std::f64::consts::PI;

use serde::Serialize;

use crate::coords::{EllipsoidalPoint, Sign};
use crate::error::{Error, Result};
use crate::harmonics::{HarmonicBasis, HarmonicIndex, CANCELLATION_THRESHOLD};

/// e²/Å in kcal/mol.
pub const KCAL_PER_MOL: f64 = 332.0637;

const RESONANCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointCharge {
    pub position: [f64; 3],
    pub q: f64,
}

impl PointCharge {
    pub fn new(position: [f64; 3], q: f64) -> Self {
        Self { position, q }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DielectricModel {
    pub eps1: f64,
    pub eps2: f64,
}

impl DielectricModel {
    pub fn new(eps1: f64, eps2: f64) -> Result<Self> {
        for (name, v) in [("eps1", eps1), ("eps2", eps2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidDielectric(format!("{name} = {v} must be finite and positive")));
            }
        }
        Ok(Self { eps1, eps2 })
    }
}

/// `(q^2 / 2R)(1/eps2 - 1/eps1)` in e²/Å.
pub fn born_energy(radius: f64, q: f64, diel: &DielectricModel) -> Result<f64> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidInput(format!("Born radius {radius} must be positive")));
    }
    Ok(q * q / (2.0 * radius) * (1.0 / diel.eps2 - 1.0 / diel.eps1))
}

/// `G`, `B` and `C` indexed by [`HarmonicIndex::flat`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionCoefficients {
    pub order: usize,
    pub g: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// Values of the first- and second-kind functions and their
/// `lambda`-derivatives on the surface `lambda = a`, positive signs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceFactors {
    pub e: f64,
    pub de: f64,
    pub f: f64,
    pub df: f64,
}

pub fn surface_factors(basis: &HarmonicBasis, idx: HarmonicIndex) -> Result<SurfaceFactors> {
    let a = basis.system().a();
    let lame = basis.lame(idx)?;
    let (e, de) = lame.eval_with_derivative(a, Sign::Plus, Sign::Plus)?;
    let sk = basis.second_kind().eval_f(&lame, a, Sign::Plus, Sign::Plus)?;
    Ok(SurfaceFactors {
        e,
        de,
        f: sk.f_value,
        df: sk.df_dlambda,
    })
}

fn check_inside(basis: &HarmonicBasis, charges: &[PointCharge]) -> Result<()> {
    for c in charges {
        let [x, y, z] = c.position;
        if !basis.system().contains_strictly(c.position) || !c.q.is_finite() {
            return Err(Error::ChargeOutsideEllipsoid { x, y, z });
        }
    }
    Ok(())
}

/// `G_n^p = sum_k q_k (4 pi/(2n+1)) E(r_k) / gamma_n^p`.
pub fn source_coefficients(basis: &HarmonicBasis, charges: &[PointCharge], order: usize) -> Result<Vec<f64>> {
    check_inside(basis, charges)?;
    let sys = basis.system();
    let points = charges
        .iter()
        .map(|c| sys.cart_to_ell(c.position))
        .collect::<Result<Vec<_>>>()?;
    HarmonicIndex::up_to(order)
        .map(|idx| {
            let gamma = basis.gamma(idx)?.value;
            let w = 4.0 * PI / (2 * idx.n + 1) as f64 / gamma;
            let mut acc = 0.0;
            for (c, pt) in charges.iter().zip(&points) {
                acc += c.q * basis.interior_solid(idx, pt)?;
            }
            Ok(w * acc)
        })
        .collect()
}

fn order_of(len: usize) -> Result<usize> {
    let order = (len as f64).sqrt().round() as usize;
    if order == 0 || order * order != len {
        return Err(Error::InvalidInput(format!("{len} coefficients is not (N+1)^2")));
    }
    Ok(order - 1)
}

/// Reaction-field coefficients from the source coefficients.
pub fn reaction_coefficients(basis: &HarmonicBasis, g: &[f64], diel: &DielectricModel) -> Result<Vec<f64>> {
    let order = order_of(g.len())?;
    let (e1, e2) = (diel.eps1, diel.eps2);
    if e1 == e2 {
        return Ok(vec![0.0; g.len()]);
    }
    HarmonicIndex::up_to(order)
        .zip(g)
        .map(|(idx, &gv)| {
            let sf = surface_factors(basis, idx)?;
            let log_e = sf.de / sf.e;
            let log_f = sf.df / sf.f;
            let denom = 1.0 - (e1 / e2) * log_e / log_f;
            if denom.abs() < RESONANCE_TOL || !denom.is_finite() {
                return Err(Error::ResonantDenominator { n: idx.n, p: idx.p });
            }
            Ok((e1 - e2) / (e1 * e2) * (sf.f / sf.e) / denom * gv)
        })
        .collect()
}

/// Exterior coefficients from potential continuity.
pub fn exterior_coefficients(basis: &HarmonicBasis, g: &[f64], b: &[f64], diel: &DielectricModel) -> Result<Vec<f64>> {
    let order = order_of(g.len())?;
    HarmonicIndex::up_to(order)
        .map(|idx| {
            let i = idx.flat();
            let sf = surface_factors(basis, idx)?;
            Ok(g[i] / diel.eps1 + b[i] * sf.e / sf.f)
        })
        .collect()
}

/// Exterior coefficients from flux continuity; agrees with
/// [`exterior_coefficients`] when `B` solves both boundary conditions.
pub fn exterior_coefficients_from_flux(
    basis: &HarmonicBasis,
    g: &[f64],
    b: &[f64],
    diel: &DielectricModel,
) -> Result<Vec<f64>> {
    let order = order_of(g.len())?;
    HarmonicIndex::up_to(order)
        .map(|idx| {
            let i = idx.flat();
            let sf = surface_factors(basis, idx)?;
            Ok(g[i] / diel.eps2 + diel.eps1 / diel.eps2 * b[i] * sf.de / sf.df)
        })
        .collect()
}

pub fn expansion_coefficients(
    basis: &HarmonicBasis,
    charges: &[PointCharge],
    diel: &DielectricModel,
    order: usize,
) -> Result<ExpansionCoefficients> {
    let g = source_coefficients(basis, charges, order)?;
    let b = reaction_coefficients(basis, &g, diel)?;
    let c = exterior_coefficients(basis, &g, &b, diel)?;
    Ok(ExpansionCoefficients { order, g, b, c })
}

/// `psi(r) = sum B_n^p E_n^p(r)` at an interior point.
pub fn reaction_potential(basis: &HarmonicBasis, b: &[f64], point: [f64; 3]) -> Result<f64> {
    let order = order_of(b.len())?;
    let pt = basis.system().cart_to_ell(point)?;
    let mut acc = 0.0;
    for idx in HarmonicIndex::up_to(order) {
        acc += b[idx.flat()] * basis.interior_solid(idx, &pt)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvationEnergy {
    pub order: usize,
    /// e²/Å.
    pub gaussian: f64,
    pub kcal_per_mol: f64,
    /// Energy truncated after each degree, e²/Å.
    pub by_degree: Vec<f64>,
    /// Degrees whose largest term exceeds the running energy by the
    /// cancellation threshold.
    pub cancellation_degrees: Vec<usize>,
}

/// `1/2 sum_k q_k psi(r_k)`.
pub fn solvation_energy(
    basis: &HarmonicBasis,
    charges: &[PointCharge],
    diel: &DielectricModel,
    order: usize,
) -> Result<SolvationEnergy> {
    let coeffs = expansion_coefficients(basis, charges, diel, order)?;
    energy_from_coefficients(basis, charges, &coeffs)
}

pub fn energy_from_coefficients(
    basis: &HarmonicBasis,
    charges: &[PointCharge],
    coeffs: &ExpansionCoefficients,
) -> Result<SolvationEnergy> {
    let sys = basis.system();
    let points = charges
        .iter()
        .map(|c| sys.cart_to_ell(c.position))
        .collect::<Result<Vec<_>>>()?;
    let mut running = 0.0;
    let mut by_degree = Vec::with_capacity(coeffs.order + 1);
    let mut cancellation_degrees = Vec::new();
    for n in 0..=coeffs.order {
        let mut largest = 0.0_f64;
        for p in 1..=2 * n + 1 {
            let idx = HarmonicIndex { n, p };
            let mut term = 0.0;
            for (c, pt) in charges.iter().zip(&points) {
                term += 0.5 * c.q * coeffs.b[idx.flat()] * basis.interior_solid(idx, pt)?;
            }
            largest = largest.max(term.abs());
            running += term;
        }
        if largest > CANCELLATION_THRESHOLD * running.abs() && running != 0.0 {
            cancellation_degrees.push(n);
        }
        by_degree.push(running);
    }
    Ok(SolvationEnergy {
        order: coeffs.order,
        gaussian: running,
        kcal_per_mol: running * KCAL_PER_MOL,
        by_degree,
        cancellation_degrees,
    })
}

/// Potentials and normal fluxes on both sides of the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryValues {
    pub position: [f64; 3],
    pub phi_inside: f64,
    pub phi_outside: f64,
    /// `eps1 dPhi1/dn`.
    pub flux_inside: f64,
    /// `eps2 dPhi2/dn`.
    pub flux_outside: f64,
}

/// How the direct Coulomb part of the interior potential is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CoulombForm {
    /// `sum q_k / |r - r_k|`; residuals then include series truncation.
    Exact,
    /// The truncated `G` series, as used to derive `B` and `C`.
    Series,
}

/// Potentials and fluxes just inside and outside the surface point. The
/// reaction field and the exterior potential are truncated series.
pub fn boundary_values(
    basis: &HarmonicBasis,
    charges: &[PointCharge],
    diel: &DielectricModel,
    coeffs: &ExpansionCoefficients,
    point: &EllipsoidalPoint,
    form: CoulombForm,
) -> Result<BoundaryValues> {
    let sys = basis.system();
    let r = sys.ell_to_cart(point)?;
    let normal = sys.outward_normal(r);
    let [mu, nu] = [point.mu.abs(), point.nu.abs()];
    // Outward is increasing |lambda|.
    let to_normal = sys.normal_derivative_factor(mu, nu) * point.s_lambda.value();

    let mut coulomb = 0.0;
    let mut coulomb_dn = 0.0;
    for c in charges.iter().filter(|_| form == CoulombForm::Exact) {
        let d = [r[0] - c.position[0], r[1] - c.position[1], r[2] - c.position[2]];
        let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        coulomb += c.q / dist;
        coulomb_dn -= c.q * (d[0] * normal[0] + d[1] * normal[1] + d[2] * normal[2]) / (dist * dist * dist);
    }

    let (mut psi, mut psi_dl, mut out, mut out_dl) = (0.0, 0.0, 0.0, 0.0);
    for idx in HarmonicIndex::up_to(coeffs.order) {
        let i = idx.flat();
        let (e, de) = basis.interior_solid_dlambda(idx, point)?;
        let (f, df) = basis.exterior_solid_dlambda(idx, point)?;
        psi += coeffs.b[i] * e;
        psi_dl += coeffs.b[i] * de;
        out += coeffs.c[i] * f;
        out_dl += coeffs.c[i] * df;
        if form == CoulombForm::Series {
            coulomb += coeffs.g[i] * f;
            coulomb_dn += coeffs.g[i] * to_normal * df;
        }
    }
    Ok(BoundaryValues {
        position: r,
        phi_inside: coulomb / diel.eps1 + psi,
        phi_outside: out,
        flux_inside: coulomb_dn + diel.eps1 * to_normal * psi_dl,
        flux_outside: diel.eps2 * to_normal * out_dl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coords::EllipsoidSystem;
    use approx::assert_relative_eq;

    fn born_sys(delta: f64) -> EllipsoidSystem {
        EllipsoidSystem::new(1.0 + delta, 1.0 + delta / 5.0, 1.0 + delta / 10.0).unwrap()
    }

    #[test]
    fn born_formula() {
        let d = DielectricModel::new(4.0, 80.0).unwrap();
        let e = born_energy(1.0, 1.0, &d).unwrap() * KCAL_PER_MOL;
        assert_relative_eq!(e, -39.432_564_375, max_relative = 1e-10);
        assert_relative_eq!(born_energy(2.0, 1.0, &d).unwrap(), 0.5 * born_energy(1.0, 1.0, &d).unwrap());
        let same = DielectricModel::new(4.0, 4.0).unwrap();
        assert_eq!(born_energy(1.0, 1.0, &same).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(DielectricModel::new(0.0, 80.0).is_err());
        assert!(DielectricModel::new(4.0, f64::NAN).is_err());
        let basis = HarmonicBasis::new(EllipsoidSystem::new(2.0, 1.5, 1.0).unwrap());
        let out = [PointCharge::new([2.5, 0.0, 0.0], 1.0)];
        assert!(matches!(
            source_coefficients(&basis, &out, 2),
            Err(Error::ChargeOutsideEllipsoid { .. })
        ));
    }

    #[test]
    fn dipoles_vanish_for_central_charge() {
        let basis = HarmonicBasis::new(EllipsoidSystem::new(2.0, 1.5, 1.0).unwrap());
        let g = source_coefficients(&basis, &[PointCharge::new([0.0; 3], 1.0)], 2).unwrap();
        assert_relative_eq!(g[0], 1.0, max_relative = 1e-12);
        for p in 1..=3 {
            // The origin sits on lambda = k, so sqrt(lambda^2 - k^2) sees roundoff.
            assert!(g[HarmonicIndex { n: 1, p }.flat()].abs() < 1e-6);
        }
        let pair = [PointCharge::new([0.3, 0.2, 0.1], 1.0), PointCharge::new([-0.3, -0.2, -0.1], -1.0)];
        let g = source_coefficients(&basis, &pair, 1).unwrap();
        assert!(g[0].abs() < 1e-14);
    }

    #[test]
    fn equal_dielectrics_give_no_reaction_field() {
        let basis = HarmonicBasis::new(EllipsoidSystem::new(2.0, 1.5, 1.0).unwrap());
        let d = DielectricModel::new(4.0, 4.0).unwrap();
        let q = [PointCharge::new([0.2, 0.3, 0.1], 1.0)];
        let c = expansion_coefficients(&basis, &q, &d, 4).unwrap();
        assert!(c.b.iter().all(|&b| b == 0.0));
        for (cv, gv) in c.c.iter().zip(&c.g) {
            assert_eq!(*cv, gv / 4.0);
        }
        assert_eq!(solvation_energy(&basis, &q, &d, 4).unwrap().gaussian, 0.0);
    }

    #[test]
    fn ratio_b_over_g_is_charge_independent() {
        let basis = HarmonicBasis::new(EllipsoidSystem::new(2.0, 1.5, 1.0).unwrap());
        let d = DielectricModel::new(2.0, 80.0).unwrap();
        let c1 = expansion_coefficients(&basis, &[PointCharge::new([0.2, 0.3, 0.1], 1.0)], &d, 3).unwrap();
        let c2 = expansion_coefficients(&basis, &[PointCharge::new([-0.5, 0.1, 0.3], -2.0)], &d, 3).unwrap();
        for i in 0..c1.g.len() {
            if c1.g[i].abs() > 1e-10 && c2.g[i].abs() > 1e-10 {
                assert_relative_eq!(c1.b[i] / c1.g[i], c2.b[i] / c2.g[i], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn dual_exterior_formulas_agree() {
        let basis = HarmonicBasis::new(EllipsoidSystem::new(2.0, 1.5, 1.0).unwrap());
        let d = DielectricModel::new(4.0, 80.0).unwrap();
        let c = expansion_coefficients(&basis, &[PointCharge::new([0.4, -0.3, 0.2], 1.0)], &d, 6).unwrap();
        let alt = exterior_coefficients_from_flux(&basis, &c.g, &c.b, &d).unwrap();
        for (a, b) in c.c.iter().zip(&alt) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12), "{a} vs {b}");
        }
    }

    #[test]
    fn central_charge_potential_is_monopole_coefficient() {
        let basis = HarmonicBasis::new(born_sys(0.1));
        let d = DielectricModel::new(4.0, 80.0).unwrap();
        let c = expansion_coefficients(&basis, &[PointCharge::new([0.0; 3], 1.0)], &d, 4).unwrap();
        let psi = reaction_potential(&basis, &c.b, [0.0; 3]).unwrap();
        // Even K harmonics do not vanish at the origin, only the dipoles do.
        assert_relative_eq!(psi, c.b[0], max_relative = 1e-2);
        let mut no_dipoles = c.b.clone();
        no_dipoles[1..4].iter_mut().for_each(|b| *b = 0.0);
        let psi2 = reaction_potential(&basis, &no_dipoles, [0.0; 3]).unwrap();
        assert_relative_eq!(psi, psi2, max_relative = 1e-9);
    }

    #[test]
    fn series_boundary_conditions_hold_termwise() {
        let s = EllipsoidSystem::new(2.0, 1.5, 1.0).unwrap();
        let basis = HarmonicBasis::new(s);
        let d = DielectricModel::new(4.0, 80.0).unwrap();
        let q = [PointCharge::new([0.3, -0.2, 0.4], 1.0), PointCharge::new([-0.5, 0.1, 0.0], -0.5)];
        let c = expansion_coefficients(&basis, &q, &d, 6).unwrap();
        for (i, (mu, nu)) in [(1.4, 0.2), (1.6, 1.1), (1.7, 0.7)].into_iter().enumerate() {
            let sg = if i % 2 == 0 { Sign::Plus } else { Sign::Minus };
            let pt = EllipsoidalPoint::from_magnitudes([s.a(), mu, nu], [sg, Sign::Plus, sg]);
            let bv = boundary_values(&basis, &q, &d, &c, &pt, CoulombForm::Series).unwrap();
            assert_relative_eq!(bv.phi_inside, bv.phi_outside, max_relative = 1e-10);
            assert_relative_eq!(bv.flux_inside, bv.flux_outside, max_relative = 1e-9);
        }
    }

    #[test]
    fn energy_is_bilinear_and_negative() {
        let basis = HarmonicBasis::new(EllipsoidSystem::new(2.0, 1.5, 1.0).unwrap());
        let d = DielectricModel::new(4.0, 80.0).unwrap();
        let one = solvation_energy(&basis, &[PointCharge::new([0.3, 0.2, -0.1], 1.0)], &d, 6).unwrap();
        let two = solvation_energy(&basis, &[PointCharge::new([0.3, 0.2, -0.1], 2.0)], &d, 6).unwrap();
        assert!(one.gaussian < 0.0);
        assert_relative_eq!(two.gaussian, 4.0 * one.gaussian, max_relative = 1e-12);
    }

    #[test]
    fn near_sphere_approaches_born() {
        let basis = HarmonicBasis::new(born_sys(1e-2));
        let d = DielectricModel::new(4.0, 80.0).unwrap();
        let e = solvation_energy(&basis, &[PointCharge::new([0.0; 3], 1.0)], &d, 4).unwrap();
        let born = born_energy(1.0, 1.0, &d).unwrap();
        assert!((e.gaussian / born - 1.0).abs() < 0.02, "{} vs {}", e.gaussian, born);
    }
}
