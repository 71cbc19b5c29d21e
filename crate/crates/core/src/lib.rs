//! Resonance computation for the anisotropic Helmholtz equation on exterior
//! domains using radial complex scaling (perfectly matched layers).
//!
//! The crate is organised bottom-up:
//!
//! - [`media`]: the constant SPD coefficient and the numerical-range bounds
//!   of the phase-rotated coefficient matrix.
//! - [`scaling`]: radial scaling profiles, derived pointwise quantities,
//!   their limits/suprema and the admissibility checks.
//! - [`analytic`]: Bessel/Hankel functions, the complex distance, scaled
//!   fundamental solutions, damping diagnostics and reference resonances.
//! - [`mesh`]: structured curvilinear triangulations of truncated exterior
//!   domains with a conforming layer interface.
//! - [`fem`]: hierarchic high-order elements and assembly of the pencil
//!   `K - omega^2 M`.
//! - [`eig`]: sparse LU, shift-invert Arnoldi and spurious filtering.
//! - [`pipeline`]: mesh, assembly and eigensolve chained for one run.

pub mod analytic;
pub mod eig;
mod error;
pub mod fem;
mod ldl;
pub mod media;
pub mod mesh;
pub mod pipeline;
pub mod quadrature;
pub mod scaling;
pub mod sparse;

pub use error::{Error, Result};
pub use num_complex::Complex64;
