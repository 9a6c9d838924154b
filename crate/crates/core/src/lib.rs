//! Ellipsoidal harmonics for continuum electrostatics.
//!
//! Confocal ellipsoidal coordinates, Lamé functions of both kinds, solid and
//! surface ellipsoidal harmonics, and the reaction-field solution for point
//! charges inside a dielectric ellipsoid, plus a dense boundary-element
//! solver used to cross-check solvation energies.

pub mod bem;
pub mod coords;
pub mod error;
pub mod harmonics;
pub mod lame1;
pub mod lame2;
pub mod numerics;
pub mod solvation;

pub use coords::{EllipsoidSystem, EllipsoidalPoint, Sign};
pub use error::{Error, Result};
pub use lame1::{class_of, ClassTag, LameClass, LameFunction, LameTable};
