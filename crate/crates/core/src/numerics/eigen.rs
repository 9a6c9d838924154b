//! Eigendecomposition of small real tridiagonal matrices.
//!
//! The matrices produced by the Lamé recurrences are not symmetric, but
//! their off-diagonal products are positive, so a diagonal similarity
//! turns them into symmetric ones with the same spectrum. The symmetric
//! problem is handed to nalgebra; eigenvectors are mapped back through the
//! inverse scaling.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

/// Three diagonals of a real tridiagonal matrix.
///
/// Row `i` reads `lower[i-1], diag[i], upper[i]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TridiagonalSpec {
    pub diag: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl TridiagonalSpec {
    pub fn new(diag: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let spec = Self { diag, lower, upper };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.diag.len();
        if n == 0 {
            return Err(Error::MalformedMatrix("empty diagonal".into()));
        }
        if self.lower.len() != n - 1 || self.upper.len() != n - 1 {
            return Err(Error::MalformedMatrix(format!(
                "diag has {n} entries but lower/upper have {}/{}",
                self.lower.len(),
                self.upper.len()
            )));
        }
        let all = self.diag.iter().chain(&self.lower).chain(&self.upper);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::MalformedMatrix("non-finite entry".into()));
        }
        Ok(())
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.diag
            .iter()
            .chain(&self.lower)
            .chain(&self.upper)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `T v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * v[i];
                if i > 0 {
                    acc += self.lower[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    acc += self.upper[i] * v[i + 1];
                }
                acc
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.upper[i];
                m[(i + 1, i)] = self.lower[i];
            }
        }
        m
    }

    fn symmetrizable(&self) -> bool {
        self.lower
            .iter()
            .zip(&self.upper)
            .all(|(f, g)| f * g > 0.0 || (*f == 0.0 && *g == 0.0))
    }
}

/// Eigenvalues in ascending order with matching unit-norm eigenvectors of
/// the original (unsymmetrized) matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// False when the similarity scaling was impossible and the general
    /// dense fallback produced the result.
    pub symmetrized: bool,
}

impl EigenPairs {
    /// `max_i ||T v_i - p_i v_i||_inf`.
    pub fn max_residual(&self, spec: &TridiagonalSpec) -> f64 {
        self.values
            .iter()
            .zip(&self.vectors)
            .map(|(p, v)| {
                spec.apply(v)
                    .iter()
                    .zip(v)
                    .fold(0.0_f64, |m, (tv, vi)| m.max((tv - p * vi).abs()))
            })
            .fold(0.0, f64::max)
    }
}

/// Solves the eigenproblem of a real tridiagonal matrix with a real
/// spectrum.
pub fn solve_tridiagonal(spec: &TridiagonalSpec) -> Result<EigenPairs> {
    spec.validate()?;
    if spec.symmetrizable() {
        Ok(solve_symmetrized(spec))
    } else {
        solve_general(spec)
    }
}

fn solve_symmetrized(spec: &TridiagonalSpec) -> EigenPairs {
    let n = spec.dim();
    // S = D T D^{-1} with d_i / d_{i-1} = sqrt(g_{i-1} / f_i).
    let mut scale = vec![1.0; n];
    for i in 1..n {
        let (f, g) = (spec.lower[i - 1], spec.upper[i - 1]);
        scale[i] = if f == 0.0 {
            scale[i - 1]
        } else {
            scale[i - 1] * (g / f).sqrt()
        };
    }
    let mut sym = DMatrix::zeros(n, n);
    for i in 0..n {
        sym[(i, i)] = spec.diag[i];
        if i + 1 < n {
            let (f, g) = (spec.lower[i], spec.upper[i]);
            let off = f.signum() * (f * g).sqrt();
            sym[(i, i + 1)] = off;
            sym[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let w = eig.eigenvectors.column(i);
            let v: Vec<f64> = (0..n).map(|j| w[j] / scale[j]).collect();
            normalize(v)
        })
        .collect();
    EigenPairs {
        values,
        vectors,
        symmetrized: true,
    }
}

fn solve_general(spec: &TridiagonalSpec) -> Result<EigenPairs> {
    let n = spec.dim();
    let dense = spec.to_dense();
    let complex = dense.complex_eigenvalues();
    let norm = spec.max_abs().max(f64::MIN_POSITIVE);
    let mut values = Vec::with_capacity(n);
    for z in complex.iter() {
        if z.im.abs() > 1e-10 * norm {
            return Err(Error::EigenFailure(format!(
                "complex eigenvalue {} + {}i in non-symmetrizable matrix",
                z.re, z.im
            )));
        }
        values.push(z.re);
    }
    values.sort_by(f64::total_cmp);

    // Inverse iteration on the slightly shifted matrix.
    let mut vectors = Vec::with_capacity(n);
    for (idx, &p) in values.iter().enumerate() {
        let shift = p + 1e-10 * norm * (1.0 + idx as f64);
        let shifted = &dense - DMatrix::identity(n, n) * shift;
        let lu = shifted.lu();
        let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
        for _ in 0..4 {
            let Some(next) = lu.solve(&v) else {
                return Err(Error::EigenFailure("singular inverse iteration".into()));
            };
            let nrm = next.norm();
            if !nrm.is_finite() || nrm == 0.0 {
                return Err(Error::EigenFailure("inverse iteration diverged".into()));
            }
            v = next / nrm;
        }
        vectors.push(normalize(v.iter().copied().collect()));
    }
    Ok(EigenPairs {
        values,
        vectors,
        symmetrized: false,
    })
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_by_one() {
        let spec = TridiagonalSpec::new(vec![5.0], vec![], vec![]).unwrap();
        let e = solve_tridiagonal(&spec).unwrap();
        assert_eq!(e.values, vec![5.0]);
        assert_relative_eq!(e.vectors[0][0].abs(), 1.0);
    }

    #[test]
    fn two_by_two_flip() {
        let spec = TridiagonalSpec::new(vec![0.0, 0.0], vec![1.0], vec![1.0]).unwrap();
        let e = solve_tridiagonal(&spec).unwrap();
        assert_relative_eq!(e.values[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(e.values[1], 1.0, epsilon = 1e-14);
        assert!(e.max_residual(&spec) < 1e-14);
    }

    #[test]
    fn nonsymmetric_but_symmetrizable() {
        // eigenvalues of [[1, 4], [1, 1]] are 1 +- 2
        let spec = TridiagonalSpec::new(vec![1.0, 1.0], vec![1.0], vec![4.0]).unwrap();
        let e = solve_tridiagonal(&spec).unwrap();
        assert!(e.symmetrized);
        assert_relative_eq!(e.values[0], -1.0, epsilon = 1e-13);
        assert_relative_eq!(e.values[1], 3.0, epsilon = 1e-13);
        assert!(e.max_residual(&spec) <= 1e-12 * spec.max_abs());
        for v in &e.vectors {
            assert_relative_eq!(v.iter().map(|x| x * x).sum::<f64>(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn falls_back_when_not_symmetrizable() {
        // [[2, 1], [0, 3]]: f*g = 0 with only one side zero.
        let spec = TridiagonalSpec::new(vec![2.0, 3.0], vec![0.0], vec![1.0]).unwrap();
        let e = solve_tridiagonal(&spec).unwrap();
        assert!(!e.symmetrized);
        assert_relative_eq!(e.values[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(e.values[1], 3.0, epsilon = 1e-12);
        assert!(e.max_residual(&spec) < 1e-8);
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(
            TridiagonalSpec::new(vec![1.0, 2.0], vec![], vec![1.0]),
            Err(Error::MalformedMatrix(_))
        ));
        assert!(TridiagonalSpec::new(vec![f64::NAN], vec![], vec![]).is_err());
    }

    #[test]
    fn residual_on_larger_matrix() {
        let n = 9;
        let diag: Vec<f64> = (0..n).map(|i| (i * i) as f64 - 3.0).collect();
        let lower: Vec<f64> = (1..n).map(|i| 0.5 + i as f64).collect();
        let upper: Vec<f64> = (1..n).map(|i| 2.0 / i as f64).collect();
        let spec = TridiagonalSpec::new(diag, lower, upper).unwrap();
        let e = solve_tridiagonal(&spec).unwrap();
        assert_eq!(e.values.len(), n);
        assert!(e.values.windows(2).all(|w| w[0] < w[1]));
        assert!(e.max_residual(&spec) <= 1e-12 * spec.max_abs());
    }
}
