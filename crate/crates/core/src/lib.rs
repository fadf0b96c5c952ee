//! Numerical construction of the Z_N-vertex elliptic R-matrix and of the
//! structure functions of the associated q-deformed W algebras, together with
//! residual checks certifying the c-number identities they satisfy.
//!
//! All parameters live in logarithmic coordinates: a spectral parameter is
//! `z = exp(i pi xi)`, the deformation parameter is `q = exp(i pi zeta)` and the
//! elliptic nome is `p = exp(2 i pi tau)`. Every fractional power and every
//! multiplicative shift is realized by adding to a log coordinate, which fixes
//! all branch choices once and for all.
//!
//! Module map:
//! - [`params`]: log-coordinate bookkeeping, surfaces, classical line.
//! - [`specfun`]: theta functions with characteristics, q-Pochhammer products,
//!   `Theta_t`, `tau_N` and the R-matrix normalization.
//! - [`rmatrix`]: clock/shift matrices, Boltzmann weights, `R`, `R-hat` and leg
//!   plumbing (partial transposes, permutations, embeddings).
//! - [`identities`]: residual checks of matrix identities.
//! - [`structfn`]: the scalar structure functions `F_N`, `G_N`, `Y_N`.
//! - [`poisson`]: the classical Poisson structure function and its limit check.
//! - [`runner`]: manifest-driven execution of check grids and function sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod identities;
pub mod params;
pub mod poisson;
pub mod report;
pub mod rmatrix;
pub mod runner;
pub mod specfun;
pub mod structfn;

pub use num_complex::Complex64 as C64;

pub use error::{Error, Result};
pub use params::{LogParams, SpectralPoint, SurfaceSpec};
pub use report::{CheckReport, ParamRecord};
pub use rmatrix::{HeisenbergSet, LegMatrix};
pub use specfun::TruncationPolicy;
