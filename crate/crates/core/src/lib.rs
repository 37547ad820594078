//! Rapid boundary-feedback stabilization of the Korteweg-de Vries equation
//! on a bounded interval.
//!
//! The pipeline runs in four stages:
//!
//! * [`spectral`] computes eigenpairs of `-d^3/dx^3 - d/dx` with the boundary
//!   conditions `phi(0) = phi(L) = 0`, `phi'(0) = phi'(L)`;
//! * [`kernel`] sums the spectral series for the transform kernel `k(x, y)`
//!   and the feedback gain `g(y) = k_x(L, y)`;
//! * [`transform`] discretizes `w = (I - K) v` and its inverse;
//! * [`sim`] integrates the closed-loop KdV equation with the feedback
//!   `v_x(t, L) = int g(y) v(t, y) dy`.
//!
//! The low-level numerics ([`grid`], [`roots`], [`stencil`], [`banded`]) are
//! generic over the floating point type. The spectral pipeline itself works
//! in `f64` and [`num_complex::Complex64`].

pub mod banded;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod roots;
pub mod report;
pub mod scalar;
pub mod sim;
pub mod spectral;
pub mod stencil;
pub mod transform;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::{Field, Scalar};

/// Double precision grid used throughout the pipeline.
pub type Grid = grid::UniformGrid<f64>;
/// Single precision grid.
pub type Grid32 = grid::UniformGrid<f32>;
/// Real banded matrix.
pub type BandedMatrix = banded::BandedMatrix<f64>;
/// Complex banded matrix.
pub type ComplexBandedMatrix = banded::BandedMatrix<num_complex::Complex64>;
