//! Two independent solvers for the stochastic Navier-Stokes equation on the
//! 2-D periodic torus, built to cross-validate each other:
//!
//! * a deterministic Wiener-chaos propagator for the Hermite-Fourier
//!   coefficients of the solution, and
//! * a Monte Carlo path solver of the Ito-form equation with Kraichnan-type
//!   transport noise.
//!
//! The crate also carries the supporting algebra (multi-index combinatorics,
//! Wick polynomials, coupling tables), the spectral toolbox (FFT fields,
//! Leray projection, dealiased convection), the truncated noise model, and a
//! quadrature oracle used to verify the algebra independently.

pub mod coupling;
pub mod error;
pub mod field;
pub mod grid;
pub mod hermite;
pub mod kernels;
pub mod mc;
pub mod multi_index;
pub mod noise;
pub mod oracle;
pub mod par;
pub mod propagator;
pub mod quadrature;
pub mod rng;
pub mod snsf;
pub mod validate;

pub use error::{Error, Result};
pub use par::ExecStrategy;
