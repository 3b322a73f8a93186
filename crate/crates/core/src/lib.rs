//! Numerical laboratory for final-state scattering of the symmetric
//! Zakharov–Kuznetsov equation
//!
//! ```text
//! ∂_t v + (∂₁³ + ∂₂³) v = (∂₁ + ∂₂)(v²)
//! ```
//!
//! on a periodic box. Fields are sampled on a [`grid::Grid`] and moved to
//! Fourier space for every linear operation; the free group is an exact
//! phase, bilinear terms are evaluated as direct sums over mode pairs, and
//! the nonlinear flow is integrated with an integrating-factor RK4 scheme.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod airy;
pub mod bilinear;
pub mod data;
pub mod dynamics;
pub mod error;
pub mod fieldio;
pub mod fit;
pub mod grid;
pub mod norms;
pub mod par;
pub mod propagator;
pub mod quad;
pub mod resonance;
pub mod symmetry;

pub use error::{Result, ZkError};
pub use grid::{make_grid, FourierMultiplier, Grid, RealField, SpectralField};
pub use par::Execution;
