//! Adaptive Gauss–Kronrod integration and fixed Gauss–Legendre rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};

// 7-point Gauss / 15-point Kronrod pair (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Tolerances for [`adaptive_quad_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    /// Absolute floor below which the error is accepted regardless of
    /// `rel_tol`. Set to zero for integrals whose magnitude is tiny.
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 2000,
        }
    }
}

impl QuadOptions {
    pub fn relative(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let x = half * XGK[j];
        let (f1, f2) = (f(center - x), f(center + x));
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Panel {
        lo,
        hi,
        value,
        error,
    }
}

/// Integrates `f` over `[lo, hi]`, where `hi` may be `f64::INFINITY`.
///
/// Semi-infinite ranges with `lo > 0` use `s = lo / t`, `t` in `(0, 1]`;
/// the integrand must decay at least as `s^-2`.
pub fn adaptive_quad<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<QuadratureResult> {
    adaptive_quad_with(f, lo, hi, &QuadOptions::relative(rel_tol))
}

pub fn adaptive_quad_with<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    opts: &QuadOptions,
) -> Result<QuadratureResult> {
    if !lo.is_finite() || hi.is_nan() || hi < lo {
        return Err(Error::InvalidInput(format!(
            "integration range [{lo}, {hi}] must have finite lo <= hi"
        )));
    }
    if hi == lo {
        return Ok(QuadratureResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
        });
    }
    if hi.is_infinite() {
        if lo > 0.0 {
            let g = |t: f64| lo / (t * t) * f(lo / t);
            integrate_finite(&g, 0.0, 1.0, opts)
        } else {
            let g = |t: f64| {
                let s = lo + (1.0 - t) / t;
                f(s) / (t * t)
            };
            integrate_finite(&g, 0.0, 1.0, opts)
        }
    } else {
        integrate_finite(&f, lo, hi, opts)
    }
}

fn integrate_finite<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, opts: &QuadOptions) -> Result<QuadratureResult> {
    let first = kronrod15(f, lo, hi);
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut total = first.value;
    let mut total_err = first.error;
    let tolerance = |total: f64| opts.abs_tol.max(opts.rel_tol * total.abs());

    let mut converged = total_err <= tolerance(total);
    let mut splits = 0;
    while !converged && splits < opts.max_subdivisions {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Panel no longer splittable in floating point.
            heap.push(worst);
            break;
        }
        let left = kronrod15(f, worst.lo, mid);
        let right = kronrod15(f, mid, worst.hi);
        evaluations += 30;
        splits += 1;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if splits % 32 == 0 {
            // Re-sum to shed drift from the running updates.
            let (v, e) = resum(&heap);
            total = v;
            total_err = e;
        }
        converged = total_err <= tolerance(total);
    }
    let (value, error_estimate) = resum(&heap);
    let converged = converged || error_estimate <= tolerance(value);
    if !value.is_finite() {
        return Err(Error::NonConvergence(format!(
            "non-finite integral over [{lo}, {hi}]"
        )));
    }
    if !converged {
        return Err(Error::MaxSubdivisions {
            value,
            error_estimate,
        });
    }
    Ok(QuadratureResult {
        value,
        error_estimate,
        evaluations,
    })
}

fn resum(heap: &BinaryHeap<Panel>) -> (f64, f64) {
    let mut panels: Vec<&Panel> = heap.iter().collect();
    panels.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    panels
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error))
}

/// Nodes and weights of a Gauss–Legendre rule mapped onto an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss–Legendre rule of the given order on `[lo, hi]`, exact for
/// polynomials of degree `2 * order - 1`.
pub fn gauss_legendre(order: usize, lo: f64, hi: f64) -> Result<GaussRule> {
    if order == 0 {
        return Err(Error::InvalidInput("Gauss–Legendre order must be >= 1".into()));
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    for i in 0..n.div_ceil(2) {
        // Newton on P_n from the Tricomi-style initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = mid - half * x;
        nodes[n - 1 - i] = mid + half * x;
        weights[i] = w * half;
        weights[n - 1 - i] = w * half;
    }
    if n % 2 == 1 {
        nodes[n / 2] = mid;
    }
    Ok(GaussRule { nodes, weights })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_on_unit_interval() {
        let r = adaptive_quad(|_| 1.0, 0.0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-15);
        assert!(r.error_estimate >= 0.0);
    }

    #[test]
    fn inverse_square_tail() {
        let r = adaptive_quad(|s| s.powi(-2), 1.0, f64::INFINITY, 1e-12).unwrap();
        assert_relative_eq!(r.value, 1.0, max_relative = 1e-13);
    }

    #[test]
    fn tail_with_nonpositive_lower_limit() {
        let r = adaptive_quad(|s| (-s).exp(), 0.0, f64::INFINITY, 1e-12).unwrap();
        assert_relative_eq!(r.value, 1.0, max_relative = 1e-11);
    }

    #[test]
    fn kronrod_exact_through_degree_22() {
        for d in 0..=22 {
            let p = kronrod15(&|x: f64| x.powi(d), -1.0, 1.0);
            let exact = if d % 2 == 0 { 2.0 / (d as f64 + 1.0) } else { 0.0 };
            assert!((p.value - exact).abs() < 1e-15, "degree {d}");
        }
    }

    #[test]
    fn reports_subdivision_limit() {
        let opts = QuadOptions {
            rel_tol: 1e-15,
            abs_tol: 0.0,
            max_subdivisions: 3,
        };
        let err = adaptive_quad_with(|x: f64| (1.0 / x).sin(), 1e-4, 1.0, &opts).unwrap_err();
        match err {
            Error::MaxSubdivisions { value, error_estimate } => {
                assert!(value.is_finite());
                assert!(error_estimate > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gauss_small_orders() {
        let g1 = gauss_legendre(1, -1.0, 1.0).unwrap();
        assert_eq!(g1.nodes, vec![0.0]);
        assert_relative_eq!(g1.weights[0], 2.0, epsilon = 1e-15);

        let g2 = gauss_legendre(2, -1.0, 1.0).unwrap();
        let r = 1.0 / 3.0_f64.sqrt();
        assert_relative_eq!(g2.nodes[0], -r, epsilon = 1e-15);
        assert_relative_eq!(g2.nodes[1], r, epsilon = 1e-15);
        assert_relative_eq!(g2.weights[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(g2.weights[1], 1.0, epsilon = 1e-15);

        let g = gauss_legendre(2, 0.0, 1.0).unwrap();
        assert_relative_eq!(g.integrate(|x| x.powi(3)), 0.25, epsilon = 1e-16);
        assert!(gauss_legendre(0, 0.0, 1.0).is_err());
    }

    #[test]
    fn gauss_high_order_exactness() {
        for order in [5, 16, 64, 128] {
            let g = gauss_legendre(order, -0.5, 2.0).unwrap();
            let d = 2 * order as i32 - 1;
            let exact = (2.0_f64.powi(d + 1) - (-0.5_f64).powi(d + 1)) / (d + 1) as f64;
            assert_relative_eq!(g.integrate(|x| x.powi(d)), exact, max_relative = 1e-12);
            assert_relative_eq!(g.weights.iter().sum::<f64>(), 2.5, max_relative = 1e-14);
        }
    }
}
