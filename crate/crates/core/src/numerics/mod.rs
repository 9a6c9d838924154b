//! Numerical building blocks: tridiagonal eigensolver and quadrature.

mod eigen;
mod quadrature;

pub use eigen::{solve_tridiagonal, EigenPairs, TridiagonalSpec};
pub use quadrature::{
    adaptive_quad, adaptive_quad_with, gauss_legendre, GaussRule, QuadOptions, QuadratureResult,
};
