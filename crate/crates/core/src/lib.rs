//! Pseudo-spectral simulation and verification laboratory for the generalized
//! Schrödinger equation with direction-dependent fractional dispersion
//!
//! ```text
//!     i ∂_t u + ((-Δ_x)^σ + (-∂_y²)^σ) u = μ |u|^p u
//! ```
//!
//! on waveguide domains: a large periodic box standing in for ℝ^d times a
//! 2π-periodic torus factor 𝕋^n. The dispersion symbol is
//! 𝔪(ξ,η) = |ξ|^{2σ} + |η|^{2σ}, anisotropic between the two direction groups.
//!
//! The crate is organized around the experiments it supports:
//!
//! - [`grid`] — discretized domain, spectral transforms, checkpoint format;
//! - [`operators`] — multiplier calculus: fractional Laplacians, resolvents,
//!   the Balakrishnan quadrature, dyadic frequency projectors;
//! - [`evolve`] — exact linear propagator, Strang split-step integrator,
//!   Duhamel integral evaluation;
//! - [`diagnostics`] — conserved quantities, mixed space-time norms, the
//!   weighted momentum (Morawetz) identity and its space-time bound, decay
//!   and scattering extraction;
//! - [`strichartz`] — empirical dyadic scaling and bilinear experiments for
//!   the linear flow;
//! - [`wellposedness`] — exponent-system solver and Picard iteration of the
//!   Duhamel fixed point;
//! - [`rng`] — counter-based deterministic random streams.

// `!(x > 0.0)`-style guards are used on purpose: they reject NaN along with
// the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod evolve;
pub mod grid;
pub mod operators;
pub mod rng;
pub mod strichartz;
pub mod wellposedness;

pub use grid::{Field, GridError, Space, WaveguideGrid};
pub use operators::{ModelParams, Multiplier, OperatorError, QuadratureSpec};
